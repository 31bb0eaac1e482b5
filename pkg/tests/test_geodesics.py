import math

import numpy as np
import pytest

from conesurf import load_surface
from conesurf.corpus import cone_star_disk, flat_torus, platonic, refined_flat_torus
from conesurf.geodesics import (
    Net,
    SurfacePoint,
    build_net,
    diameter_estimate,
    direction_at_vertex,
    distance_lower_bound,
    edge_graph_distance,
    face_sampler,
    gh_upper_bound,
    shortest_path,
    systole_upper_bound,
    trace_ray,
)

from oracles import exhaustive_unfold_distance


def square_point(x, y):
    """Point of the unit flat torus given in unit-square coordinates (on the
    lower triangle y <= x of the two-face mesh)."""
    b2 = y
    b1 = x - y
    b0 = 1 - b1 - b2
    return SurfacePoint(0, (b0, b1, b2))


@pytest.fixture(scope="module")
def torus():
    return load_surface(flat_torus())


@pytest.fixture(scope="module")
def cube():
    return load_surface(platonic("cube"))


class TestShortestPath:
    def test_flat_translation(self, torus):
        g = shortest_path(torus, square_point(0.3, 0.1), square_point(0.8, 0.1))
        assert g.length == pytest.approx(0.5, abs=1e-12)
        assert g.exact

    def test_wraparound(self, torus):
        g = shortest_path(torus, square_point(0.05, 0.02), square_point(0.97, 0.02))
        assert g.length == pytest.approx(0.08, abs=1e-12)

    def test_zero_length(self, torus):
        p = square_point(0.4, 0.2)
        g = shortest_path(torus, p, p)
        assert g.length == 0.0 and g.exact

    def test_same_point_across_edge(self, torus):
        # the same point seen from both sides of the diagonal edge
        p = SurfacePoint(0, (0.5, 0.0, 0.5))
        q_reps = p.reps(torus)
        assert len(q_reps) == 2
        q = SurfacePoint(q_reps[1][0], q_reps[1][1])
        assert shortest_path(torus, p, q).length == 0.0

    def test_cube_opposite_face_centers(self, cube):
        g = shortest_path(cube, SurfacePoint(0, (0.5, 0.0, 0.5)), SurfacePoint(2, (0.5, 0.0, 0.5)))
        assert g.length == pytest.approx(2.0, abs=1e-9)
        assert g.exact
        assert g.collinearity_residual < 1e-9

    def test_straightness_residual(self, torus):
        g = shortest_path(torus, square_point(0.1, 0.05), square_point(0.6, 0.55))
        assert g.collinearity_residual < 1e-9

    def test_through_saddle(self):
        mix = load_surface(
            cone_star_disk(2 * math.pi - 0.4, 8, 1.5, saddle=(-0.3, 0.4, 0)),
            allow_boundary=True,
        )
        sad = [
            v
            for v in range(mix.n_vertices)
            if v not in mix.boundary_vertices and mix.defect(v) < -0.2
        ]
        assert len(sad) == 1
        v = sad[0]
        total = mix.cone_angle(v)
        ends = []
        for theta in (0.05, 0.05 + total / 2):
            f, c, d, o = direction_at_vertex(mix, v, theta)
            ends.append(trace_ray(mix, (f, o, d), max_length=0.25).end_point)
        g = shortest_path(mix, ends[0], ends[1])
        assert g.length == pytest.approx(0.5, abs=1e-9)
        assert g.via == [v]

    def test_serialization(self, cube):
        g = shortest_path(cube, SurfacePoint(0, (0.5, 0.0, 0.5)), SurfacePoint(2, (0.5, 0.0, 0.5)))
        doc = g.to_doc()
        assert doc["certificate"]["exact"] is True
        assert doc["length"] == pytest.approx(2.0)
        assert len(doc["crossings"]) == len(doc["strip"]) - 1


class TestOracleEquivalence:
    MESHES = [
        ("flat-torus", lambda: flat_torus()),
        ("flat-torus-rect", lambda: flat_torus(0.8, 1.3)),
        ("tetrahedron", lambda: platonic("tetrahedron")),
        ("octahedron", lambda: platonic("octahedron")),
        ("cube", lambda: platonic("cube")),
        ("icosahedron", lambda: platonic("icosahedron")),
        ("refined-torus", lambda: refined_flat_torus(3)),
    ]

    @pytest.mark.parametrize("name,builder", MESHES)
    def test_matches_exhaustive_oracle(self, name, builder):
        surface = load_surface(builder())
        assert surface.n_faces <= 30
        rng = np.random.default_rng(11)
        draw = face_sampler(surface, rng)
        for _ in range(6):
            x, y = draw(), draw()
            got = shortest_path(surface, x, y).length
            want = exhaustive_unfold_distance(surface, x, y, max_faces=8)
            if math.isfinite(want):
                assert got <= want + 1e-9
                # the oracle sees every strip the engine could have used
                assert got >= want - 1e-9 or got < want

    def test_metric_symmetry_and_triangle(self, cube):
        rng = np.random.default_rng(5)
        draw = face_sampler(cube, rng)
        pts = [draw() for _ in range(5)]
        d = {}
        for i in range(5):
            for j in range(5):
                if i != j:
                    d[i, j] = shortest_path(cube, pts[i], pts[j]).length
        for i in range(5):
            for j in range(5):
                if i == j:
                    continue
                assert d[i, j] == pytest.approx(d[j, i], abs=1e-9)
                for k in range(5):
                    if k in (i, j):
                        continue
                    assert d[i, j] <= d[i, k] + d[k, j] + 1e-9

    def test_edge_graph_is_upper_bound(self, cube):
        rng = np.random.default_rng(3)
        draw = face_sampler(cube, rng)
        for _ in range(5):
            x, y = draw(), draw()
            exact = shortest_path(cube, x, y).length
            upper = edge_graph_distance(cube, x, y)
            assert upper >= exact - 1e-9


class TestDiameter:
    def test_flat_torus_interval(self, torus):
        lo, hi = diameter_estimate(torus, 0.05, seed=0)
        true = math.sqrt(2) / 2
        assert lo <= true + 1e-9 <= hi

    def test_degenerate_single_point_net(self, torus):
        lo, hi = diameter_estimate(torus, 10.0, seed=0)
        assert lo == 0.0

    def test_cube_interval_contains_oracle(self, cube):
        lo, hi = diameter_estimate(cube, 0.35, seed=0)
        rng = np.random.default_rng(2)
        draw = face_sampler(cube, rng)
        dense = 0.0
        pts = [draw() for _ in range(12)]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                dense = max(dense, shortest_path(cube, pts[i], pts[j]).length)
        assert lo <= dense + 1e-9
        assert dense <= hi + 1e-9


class TestNets:
    def test_separation_and_cover(self, torus):
        net = build_net(torus, 0.2, seed=7)
        for i in range(len(net)):
            for j in range(i + 1, len(net)):
                d = shortest_path(torus, net.points[i], net.points[j]).length
                assert d >= 2 * 0.2 - 1e-9
        rng = np.random.default_rng(7)
        draw = face_sampler(torus, rng)
        for _ in range(100):
            p = draw()
            dmin = min(
                shortest_path(torus, p, q).length for q in net.points
            )
            assert dmin <= 4 * 0.2 + 1e-9

    def test_huge_radius_single_point(self, torus):
        net = build_net(torus, 5.0, seed=0)
        assert len(net) == 1

    def test_cardinality_scaling(self, torus):
        n_r = len(build_net(torus, 0.25, seed=1))
        n_r2 = len(build_net(torus, 0.125, seed=1))
        assert n_r2 / n_r <= 16.0


class TestSystole:
    def test_unit_torus(self, torus):
        assert systole_upper_bound(torus) == pytest.approx(1.0)

    def test_rect_torus_short_side(self):
        s = load_surface(flat_torus(0.7, 1.3))
        assert systole_upper_bound(s) == pytest.approx(0.7)

    def test_sphere_marker(self, cube):
        assert systole_upper_bound(cube) == math.inf


class TestGromovHausdorff:
    def test_identity_bound(self, torus):
        r = 0.3
        b = gh_upper_bound(torus, torus, r)
        assert b <= 8 * r + 1e-9

    def test_close_tori(self):
        a = load_surface(flat_torus(1.0, 1.0))
        b = load_surface(flat_torus(1.0, 1.05))
        r = 0.3
        got = gh_upper_bound(a, b, r)
        assert got <= 0.05 + 8 * r + 1e-6

    def test_torus_vs_cube_positive(self, torus, cube):
        r = 0.45
        got = gh_upper_bound(torus, cube, r)
        lo_t, hi_t = diameter_estimate(torus, 0.1)
        lo_c, hi_c = diameter_estimate(cube, 0.3)
        # the returned value is an upper bound, so it must dominate the
        # diameter-difference lower bound for d_GH
        assert got >= (lo_c - hi_t) / 2 - 1e-9
        assert got > 0


class TestDistanceCutoff:
    def test_cutoff_semantics(self, torus):
        x, y = square_point(0.1, 0.05), square_point(0.6, 0.05)
        reached, val = distance_lower_bound(torus, x, y, cutoff=0.3)
        assert not reached and val >= 0.3 - 1e-12
        reached, val = distance_lower_bound(torus, x, y, cutoff=0.8)
        assert reached and val == pytest.approx(0.5, abs=1e-9)
