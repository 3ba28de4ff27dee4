"""Quasi-periodic planar T-graphs and the balanced random walk on them."""

from .construction import (
    DegenerateGraphError,
    Params,
    TGraphWindow,
    Triangle,
    build_window,
    classify_degeneracy,
    genericity_margin,
    rotate_lambda,
)
from .lattice import DualVertex, EdgeKind, HexCoord, black, white

__all__ = [
    "DegenerateGraphError",
    "DualVertex",
    "EdgeKind",
    "HexCoord",
    "Params",
    "TGraphWindow",
    "Triangle",
    "black",
    "build_window",
    "classify_degeneracy",
    "genericity_margin",
    "rotate_lambda",
    "white",
]
