"""Figure rendering for spheremode CSV outputs."""

from .render import (FigureRequest, SchemaError, build, main, render,
                     MC_COLUMNS, ZONE_COLUMNS)
