"""Hexagonal lattice combinatorics.

Coordinates: every vertex of the honeycomb lattice H is labelled by a pair
(m, n) and a color.  b(m, n) and w(m, n) are the two endpoints of a vertical
edge, black at the bottom, white at the top.  The dual lattice H* is
triangular; the dual vertex v(m, n) sits in the hexagon immediately left of
the vertical edge (m, n).

Neighbor rules:
    b(m, n) ~ w(m, n)      vertical
    b(m, n) ~ w(m, n-1)    NE-SW
    b(m, n) ~ w(m+1, n-1)  NW-SE
"""

from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple

BLACK = "black"
WHITE = "white"

# Plane embedding (unit edge length) used only for orientation checks and
# drawing; the lattice vectors are e1 = (sqrt(3), 0), e2 = (sqrt(3)/2, 3/2).
_SQ3 = math.sqrt(3.0)
_E1 = complex(_SQ3, 0.0)
_E2 = complex(_SQ3 / 2.0, 1.5)


class EdgeKind(Enum):
    VERTICAL = "vertical"
    NE_SW = "ne_sw"
    NW_SE = "nw_se"


class HexCoord(NamedTuple):
    m: int
    n: int
    color: str

    def __repr__(self):
        return f"{'b' if self.color == BLACK else 'w'}({self.m},{self.n})"


class DualVertex(NamedTuple):
    m: int
    n: int

    def __repr__(self):
        return f"v({self.m},{self.n})"


def black(m: int, n: int) -> HexCoord:
    return HexCoord(m, n, BLACK)


def white(m: int, n: int) -> HexCoord:
    return HexCoord(m, n, WHITE)


def black_neighbors(b: HexCoord) -> list[tuple[HexCoord, EdgeKind]]:
    """The three white neighbors of a black vertex, with edge kinds."""
    if b.color != BLACK:
        raise ValueError(f"expected a black vertex, got {b!r}")
    m, n = b.m, b.n
    return [
        (white(m, n), EdgeKind.VERTICAL),
        (white(m, n - 1), EdgeKind.NE_SW),
        (white(m + 1, n - 1), EdgeKind.NW_SE),
    ]


def white_neighbors(w: HexCoord) -> list[tuple[HexCoord, EdgeKind]]:
    """The three black neighbors of a white vertex, with edge kinds."""
    if w.color != WHITE:
        raise ValueError(f"expected a white vertex, got {w!r}")
    m, n = w.m, w.n
    return [
        (black(m, n), EdgeKind.VERTICAL),
        (black(m, n + 1), EdgeKind.NE_SW),
        (black(m - 1, n + 1), EdgeKind.NW_SE),
    ]


def edge_kind(w: HexCoord, b: HexCoord) -> EdgeKind:
    """Kind of the edge joining a white and a black vertex."""
    if w.color != WHITE or b.color != BLACK:
        raise ValueError(f"edge must join a white and a black vertex: {w!r}, {b!r}")
    for nb, kind in white_neighbors(w):
        if nb == b:
            return kind
    raise ValueError(f"{w!r} and {b!r} are not adjacent")


def face_dual_vertices(x: HexCoord) -> list[DualVertex]:
    """Dual vertices around an H vertex, counterclockwise from the lower left.

    The face of H* containing x is a triangle; its corners are the centers of
    the three hexagons meeting at x.
    """
    m, n = x.m, x.n
    if x.color == WHITE:
        # lower-left, lower-right, top
        return [DualVertex(m, n), DualVertex(m + 1, n), DualVertex(m, n + 1)]
    # bottom, upper-right, upper-left
    return [DualVertex(m + 1, n - 1), DualVertex(m + 1, n), DualVertex(m, n)]


def dual_faces(v: DualVertex) -> list[HexCoord]:
    """The six H vertices whose dual faces have v as a corner (3 black, 3 white)."""
    m, n = v
    return [
        black(m, n), black(m - 1, n), black(m - 1, n + 1),
        white(m, n), white(m - 1, n), white(m, n - 1),
    ]


def dual_black_faces(v: DualVertex) -> list[HexCoord]:
    m, n = v
    return [black(m, n), black(m - 1, n), black(m - 1, n + 1)]


def hex_position(x: HexCoord) -> complex:
    """Embedding of an H vertex in the plane (orientation reference only)."""
    base = x.m * _E1 + x.n * _E2
    return base + 1j if x.color == WHITE else base


def dual_position(v: DualVertex) -> complex:
    """Embedding of a dual vertex (hexagon center) in the plane."""
    return complex(-_SQ3 / 2.0, 0.5) + v.m * _E1 + v.n * _E2
