"""Render spheremode CSV outputs into figures.

Strict consumer of two published schemas; nothing is recomputed here.

* Simulation CSV: ``figure,ell,r,test,n,M,alpha,reject_freq,stderr,asym_power,seed``
* Zone CSV: ``theta_x,theta_y,theta_z,member,component_id,preferred``

Figure kinds:

* ``fig1`` -- grouped level bars by rate index, one panel per sample size,
  with the nominal-level reference line.
* ``fig2`` -- power against severity, one panel per rate index, dashed
  asymptotic overlays where the CSV carries them.
* ``fig3`` -- single power panel (score vs oracle) with dashed asymptotics.
* ``zone`` -- orthographic hemisphere projections of a confidence zone with
  the preferred symmetric component in a lighter shade.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

MC_COLUMNS = ["figure", "ell", "r", "test", "n", "M", "alpha", "reject_freq",
              "stderr", "asym_power", "seed"]
ZONE_COLUMNS = ["theta_x", "theta_y", "theta_z", "member", "component_id",
                "preferred"]

# Drawing conventions: the score test is green, the spherical-mean (Wald)
# family red/orange/purple, the oracle blue; asymptotic curves are dashed.
TEST_COLORS = {
    "watson": "tab:green",
    "wald": "tab:red",
    "wald_contiguity": "tab:orange",
    "wald_strict": "tab:purple",
    "oracle": "tab:blue",
}
ZONE_PALETTES = {
    "watson": {"member": "#1a7a1a", "preferred": "#8fdf8f"},
    "wald": {"member": "#b34700", "preferred": "#ffb366"},
}


class SchemaError(Exception):
    """CSV does not match the published contract."""


@dataclass(frozen=True)
class FigureRequest:
    csv_path: str
    kind: str  # fig1 | fig2 | fig3 | zone
    out_path: str
    dpi: int = 150
    palette: str = "watson"  # zone rendering only


def read_rows(csv_path, columns):
    with open(csv_path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        extra = [c for c in header if c not in columns]
        if missing:
            raise SchemaError(
                f"{csv_path}: missing columns {missing}; found {header}"
                + (f"; unexpected {extra}" if extra else ""))
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    return rows


def _floats(rows, key):
    return [float(row[key]) for row in rows]


def _alpha_level(rows):
    return float(rows[0]["alpha"])


def build_fig1(rows):
    sizes = sorted({int(row["n"]) for row in rows})
    ells = sorted({int(row["ell"]) for row in rows})
    tests = [t for t in ("watson", "wald") if any(row["test"] == t for row in rows)]
    fig, axes = plt.subplots(1, len(sizes), figsize=(5.5 * len(sizes), 3.6),
                             sharey=True, squeeze=False)
    width = 0.8 / max(len(tests), 1)
    for ax, n in zip(axes[0], sizes):
        for k, test in enumerate(tests):
            freqs = {int(row["ell"]): float(row["reject_freq"]) for row in rows
                     if int(row["n"]) == n and row["test"] == test}
            offsets = [ell + (k - (len(tests) - 1) / 2) * width for ell in ells]
            ax.bar(offsets, [freqs.get(ell, np.nan) for ell in ells], width,
                   color=TEST_COLORS.get(test, "gray"), label=test)
        ax.axhline(_alpha_level(rows), color="black", linestyle="--",
                   linewidth=0.8, label="nominal level")
        ax.set_xticks(ells)
        ax.set_xlabel("rate index")
        ax.set_title(f"n = {n}")
    axes[0][0].set_ylabel("rejection frequency")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    return fig


def _power_panel(ax, rows, tests):
    severities = sorted({int(row["r"]) for row in rows})
    for test in tests:
        sub = {int(row["r"]): row for row in rows if row["test"] == test}
        if not sub:
            continue
        color = TEST_COLORS.get(test, "gray")
        ax.plot(severities, [float(sub[r]["reject_freq"]) for r in severities],
                marker="o", color=color, label=test)
        if all(sub[r]["asym_power"] for r in severities):
            ax.plot(severities, [float(sub[r]["asym_power"]) for r in severities],
                    linestyle="--", color=color, linewidth=1.0,
                    label=f"{test} (asymptotic)")
    ax.axhline(_alpha_level(rows), color="black", linestyle=":", linewidth=0.8)
    ax.set_xticks(severities)
    ax.set_xlabel("severity r")


def build_fig2(rows):
    ells = sorted({int(row["ell"]) for row in rows})
    tests = sorted({row["test"] for row in rows},
                   key=lambda t: list(TEST_COLORS).index(t) if t in TEST_COLORS else 9)
    fig, axes = plt.subplots(1, len(ells), figsize=(4.2 * len(ells), 3.4),
                             sharey=True, squeeze=False)
    for ax, ell in zip(axes[0], ells):
        _power_panel(ax, [row for row in rows if int(row["ell"]) == ell], tests)
        ax.set_title(f"rate index {ell}")
    axes[0][0].set_ylabel("rejection frequency")
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    return fig


def build_fig3(rows):
    tests = sorted({row["test"] for row in rows},
                   key=lambda t: list(TEST_COLORS).index(t) if t in TEST_COLORS else 9)
    fig, axes = plt.subplots(figsize=(5.2, 3.8))
    _power_panel(axes, rows, tests)
    axes.set_ylabel("rejection frequency")
    axes.legend(fontsize=8)
    fig.tight_layout()
    return fig


def build_zone(rows, palette="watson"):
    colors = ZONE_PALETTES.get(palette)
    if colors is None:
        raise SchemaError(f"unknown zone palette {palette!r}; "
                          f"choose from {sorted(ZONE_PALETTES)}")
    pts = np.array([[float(row["theta_x"]), float(row["theta_y"]),
                     float(row["theta_z"])] for row in rows])
    member = np.array([row["member"] == "1" for row in rows])
    preferred = np.array([row["preferred"] == "1" for row in rows])
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 4.2))
    for ax, upper in zip(axes, (True, False)):
        mask = pts[:, 2] >= 0 if upper else pts[:, 2] < 0
        x, y = pts[mask, 0], pts[mask, 1]
        mem, pref = member[mask], preferred[mask]
        ax.scatter(x[~mem], y[~mem], s=2, c="#dddddd", linewidths=0)
        ax.scatter(x[mem & ~pref], y[mem & ~pref], s=3,
                   c=colors["member"], linewidths=0)
        ax.scatter(x[mem & pref], y[mem & pref], s=3,
                   c=colors["preferred"], linewidths=0)
        circle = plt.Circle((0, 0), 1.0, fill=False, color="black", linewidth=0.8)
        ax.add_patch(circle)
        ax.set_aspect("equal")
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
        ax.set_title("upper hemisphere" if upper else "lower hemisphere",
                     fontsize=9)
        ax.set_xticks(())
        ax.set_yticks(())
    fig.tight_layout()
    return fig


_BUILDERS = {"fig1": build_fig1, "fig2": build_fig2, "fig3": build_fig3}


def build(request: FigureRequest):
    """Build the matplotlib figure for a request (without writing it)."""
    if request.kind == "zone":
        rows = read_rows(request.csv_path, ZONE_COLUMNS)
        return build_zone(rows, request.palette)
    if request.kind not in _BUILDERS:
        raise SchemaError(f"unknown figure kind {request.kind!r}")
    rows = read_rows(request.csv_path, MC_COLUMNS)
    expected = request.kind
    got = {row["figure"] for row in rows}
    if got != {expected}:
        raise SchemaError(f"{request.csv_path}: figure column says {sorted(got)}, "
                          f"expected {expected!r}")
    return _BUILDERS[request.kind](rows)


def render(request: FigureRequest) -> str:
    """Render a request to disk; returns the output path."""
    fig = build(request)
    out = Path(request.out_path)
    fig.savefig(out, dpi=request.dpi)
    plt.close(fig)
    return str(out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spheremode-figs",
        description="Render spheremode simulation/zone CSVs into figures.")
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--kind", required=True,
                        choices=["fig1", "fig2", "fig3", "zone"],
                        help="which figure the CSV holds")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (default 150)")
    parser.add_argument("--palette", choices=sorted(ZONE_PALETTES),
                        default="watson",
                        help="zone colors (default watson greens)")
    args = parser.parse_args(argv)
    request = FigureRequest(csv_path=args.csv, kind=args.kind,
                            out_path=args.out, dpi=args.dpi,
                            palette=args.palette)
    try:
        out = render(request)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
