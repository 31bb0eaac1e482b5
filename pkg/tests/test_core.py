import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conesurf import (
    Region,
    SurfaceError,
    corner_angles,
    curvature,
    emit_surface,
    load_surface,
    region_curvature,
)
from conesurf.corpus import (
    cone_star_disk,
    flat_torus,
    platonic,
    random_in_class,
    refined_flat_torus,
)

TWO_PI = 2 * math.pi


class TestLoadSurface:
    def test_flat_torus_counts(self):
        s = load_surface(flat_torus())
        assert (s.n_vertices, s.n_edges, s.n_faces) == (1, 3, 2)
        assert s.chi_computed == 0

    def test_cube_counts(self):
        s = load_surface(platonic("cube"))
        assert (s.n_vertices, s.n_edges, s.n_faces) == (8, 18, 12)
        assert s.chi_computed == 2
        hyp = math.sqrt(2.0)
        assert any(abs(l - hyp) < 1e-12 for f in s.faces for l in f)

    def test_triangle_inequality_rejected(self):
        doc = flat_torus()
        doc["faces"][0] = [1.0, 1.0, 2.5]
        with pytest.raises(SurfaceError) as e:
            load_surface(doc)
        assert e.value.invariant == "triangle-inequality"

    def test_open_surface_rejected_without_flag(self):
        doc = cone_star_disk(TWO_PI, 6)
        with pytest.raises(SurfaceError) as e:
            load_surface(doc)
        assert e.value.invariant == "closed"
        load_surface(doc, allow_boundary=True)

    def test_self_glued_slot_rejected(self):
        doc = flat_torus()
        doc["gluing"][0] = [[0, 2], [0, 2]]
        with pytest.raises(SurfaceError) as e:
            load_surface(doc)
        assert e.value.invariant == "involution"

    def test_length_mismatch_rejected(self):
        doc = flat_torus()
        doc["faces"][1][0] = 1.5  # breaks a glued pair
        with pytest.raises(SurfaceError) as e:
            load_surface(doc)
        assert e.value.invariant in ("length-match", "gauss-bonnet")

    def test_declared_chi_validated(self):
        doc = flat_torus()
        doc["chi"] = 2
        with pytest.raises(SurfaceError) as e:
            load_surface(doc)
        assert e.value.invariant == "euler"

    def test_round_trip(self):
        doc = platonic("tetrahedron")
        s = load_surface(doc)
        s2 = load_surface(emit_surface(s))
        assert s2.faces == s.faces
        assert s2.gluing == s.gluing


class TestCornerAngles:
    def test_equilateral(self):
        for a in corner_angles((1.0, 1.0, 1.0)):
            assert abs(a - math.pi / 3) < 1e-12

    def test_right_triangle(self):
        a0, a1, a2 = corner_angles((3.0, 4.0, 5.0))
        assert abs(a2 - math.pi / 2) < 1e-12  # angle opposite the 5 side

    def test_margin_error(self):
        with pytest.raises(SurfaceError):
            corner_angles((1.0, 1.0, 1.9999), eta_min=1e-2)

    @given(
        a=st.floats(0.2, 3.0),
        b=st.floats(0.2, 3.0),
        c=st.floats(0.2, 3.0),
    )
    def test_angles_sum_to_pi(self, a, b, c):
        m = max(a, b, c)
        if a + b - c < 1e-3 * m or b + c - a < 1e-3 * m or c + a - b < 1e-3 * m:
            return
        assert abs(sum(corner_angles((a, b, c))) - math.pi) < 1e-10


class TestCurvature:
    def test_tetrahedron_defects(self):
        s = load_surface(platonic("tetrahedron"))
        rep = curvature(s)
        assert np.allclose(rep.defects, math.pi)
        assert abs(rep.positive_total - 4 * math.pi) < 1e-10
        assert abs(rep.positive_total - TWO_PI * s.chi_computed) < 1e-10

    def test_cube_defects(self):
        s = load_surface(platonic("cube"))
        rep = curvature(s)
        assert np.allclose(sorted(rep.defects), math.pi / 2)

    def test_flat_torus_defects(self):
        s = load_surface(flat_torus())
        rep = curvature(s)
        assert np.allclose(rep.defects, 0.0, atol=1e-12)
        assert rep.variation < 1e-12

    def test_no_peaks_on_corpus(self):
        for doc in (platonic("cube"), platonic("icosahedron"), flat_torus()):
            assert curvature(load_surface(doc)).peaks == []


class TestGaussBonnet:
    @pytest.mark.parametrize("seed", range(1, 11))
    def test_random_in_class(self, seed):
        s = load_surface(random_in_class(seed))
        assert abs(s.gauss_bonnet_residual()) < s.tol.tol_gb(s.n_faces)

    def test_decomposition(self):
        for doc in (platonic("octahedron"), random_in_class(3), flat_torus(2, 1)):
            s = load_surface(doc)
            rep = curvature(s)
            assert (
                abs(rep.positive_total - rep.negative_total - TWO_PI * s.chi_computed)
                < s.tol.tol_gb(s.n_faces)
            )

    @given(w=st.floats(0.3, 4.0), h=st.floats(0.3, 4.0))
    @settings(max_examples=25)
    def test_scaled_tori(self, w, h):
        s = load_surface(flat_torus(w, h))
        assert abs(s.gauss_bonnet_residual()) < s.tol.tol_gb(s.n_faces)


class TestRegions:
    def _cube_corner_star(self, s):
        # pick a corner whose fan has six triangles (touched by diagonals)
        best = max(range(s.n_vertices), key=lambda v: len(s.corner_slots(v)))
        faces = sorted({f for f, _ in s.corner_slots(best)})
        return best, Region(s, faces)

    def test_cube_corner_star(self):
        s = load_surface(platonic("cube"))
        v, region = self._cube_corner_star(s)
        pos, neg, turns = region_curvature(s, region)
        assert abs(pos - math.pi / 2) < 1e-10
        assert neg == 0.0
        total_turn = sum(t for cyc in turns for _, t in cyc)
        assert abs(total_turn - 3 * math.pi / 2) < 1e-10

    def test_flat_torus_subdisk(self):
        s = load_surface(refined_flat_torus(4))
        v = 0
        faces = sorted({f for f, _ in s.corner_slots(v)})
        region = Region(s, faces)
        pos, neg, turns = region_curvature(s, region)
        assert pos < 1e-12 and neg < 1e-12
        total_turn = sum(t for cyc in turns for _, t in cyc)
        assert abs(total_turn - TWO_PI) < 1e-10

    def test_full_surface_region(self):
        s = load_surface(platonic("octahedron"))
        region = Region(s, range(s.n_faces))
        pos, neg, turns = region_curvature(s, region)
        rep = curvature(s)
        assert abs(pos - rep.positive_total) < 1e-12
        assert abs(neg - rep.negative_total) < 1e-12
        assert turns == []

    def test_disk_identity(self):
        # simply connected region: defect + boundary turn = 2*pi
        for doc in (platonic("icosahedron"), random_in_class(5)):
            s = load_surface(doc)
            v = 0
            faces = sorted({f for f, _ in s.corner_slots(v)})
            region = Region(s, faces)
            assert region.is_disk()
            pos, neg, turns = region_curvature(s, region)
            total_turn = sum(t for cyc in turns for _, t in cyc)
            assert abs((pos - neg) + total_turn - TWO_PI) < 1e-9

    def test_additivity_disjoint_closures(self):
        s = load_surface(refined_flat_torus(5))
        f_a = sorted({f for f, _ in s.corner_slots(0)})
        far = max(
            range(s.n_vertices),
            key=lambda v: 0 if any(f in f_a for f, _ in s.corner_slots(v)) else v,
        )
        f_b = sorted({f for f, _ in s.corner_slots(far)})
        assert not (set(f_a) & set(f_b))
        ra, rb = Region(s, f_a), Region(s, f_b)
        pa, na, _ = region_curvature(s, ra)
        pb, nb, _ = region_curvature(s, rb)
        # union region (may be disconnected, so sum parts directly)
        assert pa + pb == pytest.approx(0.0, abs=1e-12)
        assert na + nb == pytest.approx(0.0, abs=1e-12)

    def test_disconnected_region_rejected(self):
        s = load_surface(platonic("cube"))
        with pytest.raises(SurfaceError):
            Region(s, [0, 9])
