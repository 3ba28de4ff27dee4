import numpy as np

from tgraph.lattice import (
    DualVertex,
    EdgeKind,
    black,
    black_neighbors,
    dual_black_faces,
    dual_position,
    face_dual_vertices,
    white,
    white_neighbors,
)


def test_black_neighbors_origin():
    got = black_neighbors(black(0, 0))
    assert got == [
        (white(0, 0), EdgeKind.VERTICAL),
        (white(0, -1), EdgeKind.NE_SW),
        (white(1, -1), EdgeKind.NW_SE),
    ]


def test_black_neighbors_translated():
    nbrs = [w for w, _ in black_neighbors(black(5, 3))]
    assert nbrs == [white(5, 3), white(5, 2), white(6, 2)]


def test_white_neighbors_origin():
    nbrs = [b for b, _ in white_neighbors(white(0, 0))]
    assert nbrs == [black(0, 0), black(0, 1), black(-1, 1)]


def test_white_neighbors_translated():
    nbrs = [b for b, _ in white_neighbors(white(2, -1))]
    assert nbrs == [black(2, -1), black(2, 0), black(1, 0)]


def test_adjacency_symmetry_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m, n = rng.integers(-50, 50, size=2)
        b = black(int(m), int(n))
        for w, _ in black_neighbors(b):
            assert b in [x for x, _ in white_neighbors(w)]
        w = white(int(m), int(n))
        for b2, _ in white_neighbors(w):
            assert w in [x for x, _ in black_neighbors(b2)]


def test_edge_kinds_agree_from_both_sides():
    for m in range(-10, 11):
        for n in range(-10, 11):
            for w, kind in black_neighbors(black(m, n)):
                kinds = {b2: k for b2, k in white_neighbors(w)}
                assert kinds[black(m, n)] == kind


def _signed_area(pts):
    area = 0.0
    for p, q in zip(pts, pts[1:] + pts[:1]):
        area += (p.conjugate() * q).imag
    return area / 2.0


def test_face_dual_vertices_ccw():
    for x in (white(0, 0), black(0, 0), white(3, -2), black(-4, 1)):
        pts = [dual_position(v) for v in face_dual_vertices(x)]
        assert _signed_area(pts) > 0


def test_adjacent_faces_share_two_duals():
    b = black(0, 0)
    for w, _ in black_neighbors(b):
        shared = set(face_dual_vertices(b)) & set(face_dual_vertices(w))
        assert len(shared) == 2


def test_dual_vertex_in_three_faces_of_each_color():
    # within an interior box every dual vertex is a corner of 3 white and 3
    # black faces
    v = DualVertex(2, -1)
    whites = [x for x in [white(2, -1), white(1, -1), white(2, -2)]]
    blacks = dual_black_faces(v)
    for x in whites + blacks:
        assert v in face_dual_vertices(x)
    count_w = 0
    count_b = 0
    for m in range(-6, 7):
        for n in range(-6, 7):
            if v in face_dual_vertices(white(m, n)):
                count_w += 1
            if v in face_dual_vertices(black(m, n)):
                count_b += 1
    assert count_w == 3 and count_b == 3
