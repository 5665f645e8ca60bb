"""Directional-data ingestion and experiment-config parsing.

Data files are header-less CSV; blank lines and lines starting with ``#``
are skipped.  Cartesian rows must already be of unit length to within 1e-6
(measurement precision); they are renormalized exactly on load.  Experiment
configs are flat ``key=value`` text files layered on top of the figure
presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import mc, sampling
from .errors import ConfigError, NormalizationError, ParseError
from .stats import Sample

_INPUT_NORM_TOL = 1e-6

FORMATS = ("cartesian", "angles_deg")


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    format: str = "cartesian"
    p: int = 3

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"unknown data format {self.format!r}", key="format")
        if self.format == "angles_deg" and self.p != 3:
            raise ConfigError("angles_deg input is defined for p = 3 only", key="p")
        if self.p < 2:
            raise ConfigError("p must be at least 2", key="p")


def _data_rows(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def load_sample(spec: DatasetSpec) -> Sample:
    """Load and validate a directional sample.

    Raises
    ------
    ParseError
        On malformed rows (wrong field count, non-numeric fields, angles out
        of range), with the offending row number.
    NormalizationError
        When a cartesian row deviates from unit norm by more than 1e-6.
    """
    points = []
    for lineno, line in _data_rows(spec.path):
        fields = [f.strip() for f in line.split(",")]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"row {lineno}: non-numeric field in {line!r}",
                             row=lineno) from None
        if spec.format == "cartesian":
            if len(values) != spec.p:
                raise ParseError(
                    f"row {lineno}: expected {spec.p} coordinates, got {len(values)}",
                    row=lineno)
            norm = math.sqrt(sum(v * v for v in values))
            if abs(norm - 1.0) > _INPUT_NORM_TOL:
                raise NormalizationError(
                    f"row {lineno}: norm {norm:.8f} deviates from 1 by more than "
                    f"{_INPUT_NORM_TOL}", row=lineno, norm=norm)
            points.append([v / norm for v in values])
        else:
            if len(values) != 2:
                raise ParseError(
                    f"row {lineno}: expected colatitude,longitude, got "
                    f"{len(values)} fields", row=lineno)
            colat, lon = values
            if not 0.0 <= colat <= 180.0:
                raise ParseError(
                    f"row {lineno}: colatitude {colat} outside [0, 180]", row=lineno)
            if not 0.0 <= lon < 360.0:
                raise ParseError(
                    f"row {lineno}: longitude {lon} outside [0, 360)", row=lineno)
            c = math.radians(colat)
            g = math.radians(lon)
            points.append([math.sin(c) * math.cos(g),
                           math.sin(c) * math.sin(g),
                           math.cos(c)])
    if not points:
        raise ParseError(f"no data rows found in {spec.path}")
    return Sample(np.asarray(points, dtype=float))


def write_sample(sample: Sample, path) -> None:
    """Write a sample as cartesian CSV at full precision (round-trips to 1e-12)."""
    lines = [",".join(f"{v:.17g}" for v in row) for row in sample.points]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiment configs
# ---------------------------------------------------------------------------

_INT_KEYS = {"p", "M", "seed", "workers"}
_FLOAT_KEYS = {"alpha", "xi"}
_RANGE_KEYS = {"n", "ell", "r"}
_ALL_KEYS = {"figure", "radial"} | _INT_KEYS | _FLOAT_KEYS | _RANGE_KEYS


def _parse_range(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(",") if v.strip())


def load_experiment(path) -> mc.ExperimentSpec:
    """Parse a flat key=value config into an experiment spec.

    The ``figure`` key selects the preset (fig1, fig2, fig3, thm21); every
    other key overrides the preset's default.  Unknown keys and out-of-range
    values raise :class:`ConfigError` naming the offending key.
    """
    entries = {}
    for lineno, line in _data_rows(path):
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        entries[key] = value
    if "figure" not in entries:
        raise ConfigError("config must set figure=fig1|fig2|fig3|thm21", key="figure")
    spec = mc.preset_spec(entries.pop("figure"))
    overrides = {}
    for key, value in entries.items():
        try:
            if key in _INT_KEYS:
                overrides[key] = int(value)
            elif key in _FLOAT_KEYS:
                overrides[key] = float(value)
            elif key in _RANGE_KEYS:
                name = {"n": "n", "ell": "ell_values", "r": "r_values"}[key]
                overrides[name] = _parse_range(value)
            else:
                overrides[key] = value
        except ValueError:
            raise ConfigError(f"invalid value {value!r} for key {key!r}",
                              key=key) from None
    try:
        return replace(spec, **overrides)
    except ConfigError:
        raise
