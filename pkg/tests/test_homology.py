"""Homology checks: fixtures with hand-computable answers, dense-matrix
rank and BFS component oracles, identity tests on random complexes, and
a full flat-torus reconstruction."""

import itertools

import numpy as np
import pytest

from betti_thermo.cech import build_cech, build_rips
from betti_thermo.homology import (
    BettiVector,
    HomologyError,
    betti_diff_bound_check,
    betti_numbers,
    boundary_matrix,
    connected_components,
    euler_check,
    rank_gf2,
)
from betti_thermo.pointproc import PointCloud


def hollow_triangle():
    # unit-ish triangle at a radius where edges form but the face does not
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    return build_cech(PointCloud(pts), 1.1, 2)


def filled_triangle():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    return build_cech(PointCloud(pts), 1.2, 2)


def dense_rank_gf2(matrix) -> int:
    """Row-echelon elimination on a dense 0/1 array."""
    dense = np.zeros((matrix.rows, matrix.cols), dtype=np.int64)
    for c, rows in enumerate(matrix.columns):
        for r in rows:
            dense[r, c] = 1
    rank = 0
    row = 0
    for col in range(matrix.cols):
        pivot = None
        for r in range(row, matrix.rows):
            if dense[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        dense[[row, pivot]] = dense[[pivot, row]]
        for r in range(matrix.rows):
            if r != row and dense[r, col]:
                dense[r] = (dense[r] + dense[row]) % 2
        rank += 1
        row += 1
    return rank


def components_oracle(pts: np.ndarray, r: float) -> int:
    """BFS over the brute-force distance graph."""
    n = len(pts)
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v in range(n):
                if not seen[v] and np.linalg.norm(pts[u] - pts[v]) <= r:
                    seen[v] = True
                    stack.append(v)
    return count


class TestBoundaryMatrix:
    def test_hollow_triangle_edges(self):
        bd = boundary_matrix(hollow_triangle(), 1)
        assert (bd.rows, bd.cols) == (3, 3)
        assert all(len(col) == 2 for col in bd.columns)

    def test_filled_triangle_face(self):
        bd = boundary_matrix(filled_triangle(), 2)
        assert (bd.rows, bd.cols) == (3, 1)
        assert len(bd.columns[0]) == 3

    def test_boundary_of_boundary_vanishes(self):
        gen = np.random.default_rng(31)
        for trial in range(20):
            pts = gen.random((14, 2))
            cx = build_cech(PointCloud(pts), float(gen.uniform(0.3, 0.7)), 3)
            for j in range(2, len(cx.simplices)):
                low = boundary_matrix(cx, j - 1)
                high = boundary_matrix(cx, j)
                cols_low = [sum(1 << r for r in col) for col in low.columns]
                for col in high.columns:
                    acc = 0
                    for c in col:
                        acc ^= cols_low[c]
                    assert acc == 0

    def test_out_of_range_rejected(self):
        with pytest.raises(HomologyError):
            boundary_matrix(hollow_triangle(), 0)
        with pytest.raises(HomologyError):
            boundary_matrix(hollow_triangle(), 5)


class TestRank:
    def test_zero_matrix(self):
        from betti_thermo.homology import BoundaryMatrix
        assert rank_gf2(BoundaryMatrix(4, 3, ((), (), ()))) == 0

    def test_identity_pattern(self):
        from betti_thermo.homology import BoundaryMatrix
        assert rank_gf2(BoundaryMatrix(3, 3, ((0,), (1,), (2,)))) == 3

    def test_random_matrices_match_dense_oracle(self):
        from betti_thermo.homology import BoundaryMatrix
        gen = np.random.default_rng(32)
        for trial in range(200):
            rows = int(gen.integers(1, 9))
            cols = int(gen.integers(1, 9))
            dense = gen.integers(0, 2, size=(rows, cols))
            columns = tuple(
                tuple(int(r) for r in np.nonzero(dense[:, c])[0]) for c in range(cols)
            )
            m = BoundaryMatrix(rows, cols, columns)
            assert rank_gf2(m) == dense_rank_gf2(m)

    def test_larger_random_matrices(self):
        from betti_thermo.homology import BoundaryMatrix
        gen = np.random.default_rng(33)
        for trial in range(10):
            dense = gen.integers(0, 2, size=(64, 64))
            columns = tuple(
                tuple(int(r) for r in np.nonzero(dense[:, c])[0]) for c in range(64)
            )
            m = BoundaryMatrix(64, 64, columns)
            assert rank_gf2(m) == dense_rank_gf2(m)


class TestBetti:
    def test_hollow_triangle_is_a_circle(self):
        assert tuple(betti_numbers(hollow_triangle(), 1)) == (1, 1)

    def test_filled_triangle_is_contractible(self):
        assert tuple(betti_numbers(filled_triangle(), 1)) == (1, 0)

    def test_square_corners_forced_cycle(self):
        # side 1 edges only: diagonals sqrt(2) > 1.05; no triangle fits
        # a ball of radius 0.525 (right-triangle circumradius ~0.707)
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        cx = build_cech(PointCloud(pts), 1.05, 2)
        assert tuple(betti_numbers(cx, 1)) == (1, 1)

    def test_shallow_complex_rejected(self):
        pts = np.random.default_rng(1).random((6, 2))
        cx = build_cech(PointCloud(pts), 0.5, 1)
        with pytest.raises(HomologyError):
            betti_numbers(cx, 1)

    def test_beta_zero_matches_component_oracles(self):
        gen = np.random.default_rng(34)
        for trial in range(30):
            n = int(gen.integers(1, 30))
            pts = gen.random((n, 2)) * 2.0
            r = float(gen.uniform(0.1, 0.8))
            cloud = PointCloud(pts)
            cx = build_cech(cloud, r, 1 + 1)
            b0 = betti_numbers(cx, 1)[0]
            assert b0 == components_oracle(cloud.points, r)
            assert b0 == connected_components(cloud, r)

    def test_euler_identity_on_full_complexes(self):
        gen = np.random.default_rng(35)
        for trial in range(25):
            n = int(gen.integers(2, 11))
            d = int(gen.integers(2, 4))
            pts = gen.random((n, d))
            r = float(gen.uniform(0.2, 1.2))
            cx = build_cech(PointCloud(pts), r, n)
            betti = betti_numbers(cx, max(n - 1, 1))
            assert euler_check(cx, betti)

    def test_relabeling_invariance(self):
        gen = np.random.default_rng(36)
        pts = gen.random((15, 2))
        perm = gen.permutation(15)
        a = betti_numbers(build_cech(PointCloud(pts), 0.5, 2), 1)
        b = betti_numbers(build_cech(PointCloud(pts[perm]), 0.5, 2), 1)
        assert tuple(a) == tuple(b)

    def test_rips_torus_beta(self):
        # 12x12 grid with spacing 0.5 on the flat torus [0,6)^2: balls of
        # radius r/2 = 0.5 cover the torus and form a good cover, so the
        # nerve has the torus homology (1, 2, 1)
        xs = np.arange(12) * 0.5
        pts = np.array([[x, y] for x in xs for y in xs])
        cx = build_cech(PointCloud(pts), 1.0, 3, period=6.0)
        betti = betti_numbers(cx, 2)
        assert tuple(betti) == (1, 2, 1)

    def test_torus_components_wrap(self):
        pts = np.array([[0.1, 2.0], [3.9, 2.0]])
        cloud = PointCloud(pts)
        assert connected_components(cloud, 0.5, period=4.0) == 1
        assert connected_components(cloud, 0.5) == 2


class TestDifferenceBound:
    def test_equal_complexes(self):
        cx = filled_triangle()
        assert betti_diff_bound_check(cx, cx, 1)

    def test_hollow_inside_filled(self):
        assert betti_diff_bound_check(hollow_triangle(), filled_triangle(), 1)

    def test_non_nested_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        bigger = build_cech(PointCloud(pts), 1.2, 2)
        smaller = build_cech(PointCloud(pts), 0.5, 2)
        with pytest.raises(HomologyError):
            betti_diff_bound_check(bigger, smaller, 1)

    def test_radius_nesting_random(self):
        gen = np.random.default_rng(37)
        for trial in range(30):
            n = int(gen.integers(4, 25))
            pts = gen.random((n, 2)) * 1.5
            r1 = float(gen.uniform(0.1, 0.5))
            r2 = r1 + float(gen.uniform(0.0, 0.4))
            k1 = build_cech(PointCloud(pts), r1, 2)
            k2 = build_cech(PointCloud(pts), r2, 2)
            assert betti_diff_bound_check(k1, k2, 1)

    def test_point_addition_nesting_random(self):
        gen = np.random.default_rng(38)
        for trial in range(30):
            n = int(gen.integers(4, 20))
            extra = int(gen.integers(1, 6))
            pts = gen.random((n + extra, 2)) * 1.5
            r = float(gen.uniform(0.2, 0.6))
            # indices of the common points must agree, so grow by suffix
            k1 = build_cech(PointCloud(pts[:n]), r, 2)
            k2 = build_cech(PointCloud(pts), r, 2)
            assert betti_diff_bound_check(k1, k2, 1)


class TestBettiVector:
    def test_sequence_protocol(self):
        b = BettiVector(values=(1, 2, 1), max_k=2)
        assert list(b) == [1, 2, 1]
        assert b[1] == 2
        assert len(b) == 3
