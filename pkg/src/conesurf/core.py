"""Cone-metric surfaces given combinatorially by triangles and a side gluing.

A surface document lists one record per triangular face (its three side
lengths) and a pairing of (face, side) slots.  Side ``s`` of a face is the
side opposite corner ``s``; following the counterclockwise boundary of the
face, side ``s`` runs from corner ``(s+1) % 3`` to corner ``(s+2) % 3``.
Gluing two slots identifies the sides head-to-tail, so every face keeps its
counterclockwise orientation and the glued complex is oriented by
construction.  Vertices are never stored; they are the equivalence classes
of (face, corner) slots induced by the gluing.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class SurfaceError(ValueError):
    """Raised when a surface document violates a structural invariant.

    ``invariant`` names the first violated invariant, so callers (and the
    CLI) can surface it without string matching.
    """

    def __init__(self, invariant, message):
        super().__init__(message)
        self.invariant = invariant


@dataclass(frozen=True)
class Tolerances:
    """Numerical budgets used by validation and the verification suite.

    The metric data is exact in principle; floating point forces explicit
    tolerances.  ``tol_gb`` scales with the face count.
    """

    tol_len: float = 1e-9          # relative, paired side lengths
    tol_gb_per_face: float = 1e-8  # Gauss-Bonnet residual per (F+1)
    eta_min: float = 1e-6          # triangle-inequality margin, relative
    tol_flat: float = 1e-9         # |defect| below this counts as flat
    tol_dist: float = 1e-6         # sampled distortion vs. guaranteed bound

    def tol_gb(self, n_faces):
        return self.tol_gb_per_face * (n_faces + 1)

    @staticmethod
    def from_env():
        """Build tolerances, honoring CONESURF_TOL_* environment overrides."""
        kw = {}
        for name in ("tol_len", "tol_gb_per_face", "eta_min", "tol_flat", "tol_dist"):
            raw = os.environ.get("CONESURF_" + name.upper())
            if raw is not None:
                kw[name] = float(raw)
        return Tolerances(**kw)


DEFAULT_TOL = Tolerances()


def corner_angles(sides, eta_min=DEFAULT_TOL.eta_min):
    """Angles of a triangle with the given side lengths, angle i opposite side i.

    Raises SurfaceError when a side is nonpositive or the triangle inequality
    margin falls below ``eta_min * max(side)``.
    """
    a, b, c = sides
    m = max(a, b, c)
    if min(a, b, c) <= 0.0:
        raise SurfaceError("positive-lengths", f"nonpositive side in {sides!r}")
    margin = eta_min * m
    for i, (p, q, r) in enumerate(((b, c, a), (c, a, b), (a, b, c))):
        if p + q - r < margin:
            raise SurfaceError(
                "triangle-inequality",
                f"sides {sides!r}: {p:g} + {q:g} - {r:g} below margin {margin:g}",
            )
    ca = (b * b + c * c - a * a) / (2.0 * b * c)
    cb = (c * c + a * a - b * b) / (2.0 * c * a)
    cc = (a * a + b * b - c * c) / (2.0 * a * b)
    clip = lambda x: min(1.0, max(-1.0, x))
    return (math.acos(clip(ca)), math.acos(clip(cb)), math.acos(clip(cc)))


def face_chart(sides):
    """Planar coordinates of a face's corners: corner 0 at the origin,
    corner 1 on the +x axis, corner 2 above (counterclockwise)."""
    a, b, c = sides  # side i opposite corner i
    x = (b * b + c * c - a * a) / (2.0 * c)
    y2 = b * b - x * x
    y = math.sqrt(y2) if y2 > 0.0 else 0.0
    return np.array([(0.0, 0.0), (c, 0.0), (x, y)])


def _union_find_vertices(n_faces, gluing):
    """Group (face, corner) slots into vertices via the gluing."""
    parent = list(range(3 * n_faces))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for (f, s), (f2, s2) in gluing.items():
        # head-to-tail identification of the directed sides
        union(3 * f + (s + 1) % 3, 3 * f2 + (s2 + 2) % 3)
        union(3 * f + (s + 2) % 3, 3 * f2 + (s2 + 1) % 3)
    roots = {}
    vertex_of = np.empty(3 * n_faces, dtype=np.int64)
    for i in range(3 * n_faces):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        vertex_of[i] = roots[r]
    return vertex_of, len(roots)


class ConeSurface:
    """Immutable triangulated cone-metric surface.

    Parameters
    ----------
    faces : sequence of (l0, l1, l2)
        Side lengths per face, side i opposite corner i.
    gluing : mapping or iterable of slot pairs
        Pairing of (face, side) slots.  Total on all slots for a closed
        surface; unglued slots form the boundary (allowed only with
        ``allow_boundary=True``, used by intermediate flattening objects).
    chi : int, optional
        Declared Euler characteristic, validated against V - E + F.
    """

    def __init__(self, faces, gluing, chi=None, tol=None, allow_boundary=False):
        self.tol = tol or DEFAULT_TOL
        self.faces = tuple(tuple(float(x) for x in f) for f in faces)
        if any(len(f) != 3 for f in self.faces):
            raise SurfaceError("face-arity", "each face needs exactly 3 side lengths")
        n = len(self.faces)

        pairs = dict(gluing) if isinstance(gluing, dict) else {}
        if not isinstance(gluing, dict):
            for a, b in gluing:
                pairs[tuple(a)] = tuple(b)
                pairs[tuple(b)] = tuple(a)
        self.gluing = {}
        for slot, other in pairs.items():
            f, s = slot
            if not (0 <= f < n and 0 <= s < 3):
                raise SurfaceError("slot-range", f"slot {slot!r} out of range")
            if slot == tuple(other):
                raise SurfaceError("involution", f"slot {slot!r} glued to itself")
            self.gluing[(int(f), int(s))] = (int(other[0]), int(other[1]))
        for slot, other in self.gluing.items():
            back = self.gluing.get(other)
            if back != slot:
                raise SurfaceError(
                    "involution", f"gluing not involutive at {slot!r} -> {other!r}"
                )

        self.boundary_slots = tuple(
            (f, s) for f in range(n) for s in range(3) if (f, s) not in self.gluing
        )
        if self.boundary_slots and not allow_boundary:
            raise SurfaceError(
                "closed", f"{len(self.boundary_slots)} unglued sides on a closed surface"
            )

        # per-face geometry
        self.angles = np.empty((n, 3))
        self.charts = np.empty((n, 3, 2))
        for f, sides in enumerate(self.faces):
            self.angles[f] = corner_angles(sides, self.tol.eta_min)
            self.charts[f] = face_chart(sides)
        u = self.charts[:, 1] - self.charts[:, 0]
        w = self.charts[:, 2] - self.charts[:, 0]
        self.areas = 0.5 * np.abs(u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])

        # paired sides must agree in length
        for (f, s), (f2, s2) in self.gluing.items():
            la, lb = self.faces[f][s], self.faces[f2][s2]
            if abs(la - lb) > self.tol.tol_len * max(la, lb):
                raise SurfaceError(
                    "length-match",
                    f"glued sides ({f},{s}) and ({f2},{s2}) differ: {la!r} vs {lb!r}",
                )

        self.vertex_of, self.n_vertices = _union_find_vertices(n, self.gluing)
        self.n_faces = n
        self.n_edges = len(self.gluing) // 2 + len(self.boundary_slots)
        self.chi_computed = self.n_vertices - self.n_edges + self.n_faces
        if chi is not None and chi != self.chi_computed:
            raise SurfaceError(
                "euler", f"declared chi={chi} but V-E+F={self.chi_computed}"
            )
        self.chi = self.chi_computed

        # angle sum per vertex; boundary vertices tracked separately
        self._vertex_angle = np.zeros(self.n_vertices)
        np.add.at(self._vertex_angle, self.vertex_of, self.angles.reshape(-1))
        bverts = set()
        for f, s in self.boundary_slots:
            bverts.add(int(self.vertex_of[3 * f + (s + 1) % 3]))
            bverts.add(int(self.vertex_of[3 * f + (s + 2) % 3]))
        self.boundary_vertices = frozenset(bverts)

        res = self.gauss_bonnet_residual()
        if abs(res) > self.tol.tol_gb(n):
            raise SurfaceError("gauss-bonnet", f"Gauss-Bonnet residual {res:g}")

    # -- basic queries ---------------------------------------------------

    def vertex(self, f, c):
        """Vertex id of corner c of face f."""
        return int(self.vertex_of[3 * f + c])

    def corner_slots(self, v):
        """All (face, corner) slots of vertex v, in stored order."""
        idx = np.nonzero(self.vertex_of == v)[0]
        return [(int(i) // 3, int(i) % 3) for i in idx]

    def next_corner_ccw(self, f, c):
        """Corner slot after (f, c) going counterclockwise around its vertex,
        or None at a boundary edge."""
        g = self.gluing.get((f, (c + 1) % 3))
        if g is None:
            return None
        f2, s2 = g
        return (f2, (s2 + 1) % 3)

    def prev_corner_ccw(self, f, c):
        g = self.gluing.get((f, (c + 2) % 3))
        if g is None:
            return None
        f2, s2 = g
        return (f2, (s2 + 2) % 3)

    def corner_fan(self, v):
        """Corner slots around v in counterclockwise order.

        For interior vertices this is the full cycle starting at the lowest
        slot; for boundary vertices it starts at the clockwise-most corner.
        """
        slots = self.corner_slots(v)
        start = slots[0]
        if v in self.boundary_vertices:
            seen = 0
            while True:
                p = self.prev_corner_ccw(*start)
                if p is None:
                    break
                start = p
                seen += 1
                if seen > len(slots):
                    raise SurfaceError("fan", f"non-manifold fan at vertex {v}")
        fan = [start]
        while True:
            nxt = self.next_corner_ccw(*fan[-1])
            if nxt is None or nxt == fan[0]:
                break
            fan.append(nxt)
            if len(fan) > len(slots):
                raise SurfaceError("fan", f"non-manifold fan at vertex {v}")
        return fan

    def cone_angle(self, v):
        """Total angle around vertex v (interior) or along it (boundary)."""
        return float(self._vertex_angle[v])

    def defect(self, v):
        """Curvature carried by an interior vertex: 2*pi minus its cone angle."""
        if v in self.boundary_vertices:
            raise SurfaceError("interior", f"vertex {v} lies on the boundary")
        return TWO_PI - float(self._vertex_angle[v])

    def boundary_turn(self, v):
        """Turn of the boundary at v: pi minus the interior angle."""
        if v not in self.boundary_vertices:
            raise SurfaceError("boundary", f"vertex {v} is interior")
        return math.pi - float(self._vertex_angle[v])

    def area(self):
        return float(self.areas.sum())

    def gauss_bonnet_residual(self):
        total = 0.0
        for v in range(self.n_vertices):
            if v in self.boundary_vertices:
                total += math.pi - self._vertex_angle[v]
            else:
                total += TWO_PI - self._vertex_angle[v]
        return total - TWO_PI * self.chi_computed

    def edge_length(self, f, s):
        return self.faces[f][s]

    def side_endpoints(self, f, s):
        """Vertex ids (tail, head) of side s of face f in boundary order."""
        return self.vertex(f, (s + 1) % 3), self.vertex(f, (s + 2) % 3)

    def __repr__(self):
        return (
            f"ConeSurface(F={self.n_faces}, E={self.n_edges}, "
            f"V={self.n_vertices}, chi={self.chi_computed})"
        )


@dataclass
class CurvatureReport:
    """Per-vertex angle defects and their aggregates."""

    defects: np.ndarray            # interior vertices; NaN on boundary vertices
    positive_total: float          # sum of positive defects
    negative_total: float          # sum of |negative defects|
    variation: float               # positive_total + negative_total
    peaks: list                    # vertices with defect >= 2*pi - peak_tol
    boundary_turns: dict
    gauss_bonnet_residual: float

    def defect_of(self, v):
        return float(self.defects[v])


def curvature(surface, peak_tol=1e-6):
    """Curvature measure of a surface: defect per interior vertex, positive
    and negative totals, and any peak points."""
    defects = np.full(surface.n_vertices, np.nan)
    boundary_turns = {}
    pos = neg = 0.0
    peaks = []
    for v in range(surface.n_vertices):
        if v in surface.boundary_vertices:
            boundary_turns[v] = surface.boundary_turn(v)
            continue
        w = surface.defect(v)
        defects[v] = w
        if w > 0:
            pos += w
        else:
            neg += -w
        if w >= TWO_PI - peak_tol:
            peaks.append(v)
    return CurvatureReport(
        defects=defects,
        positive_total=pos,
        negative_total=neg,
        variation=pos + neg,
        peaks=peaks,
        boundary_turns=boundary_turns,
        gauss_bonnet_residual=surface.gauss_bonnet_residual(),
    )


class Region:
    """A connected set of faces with its derived boundary cycles.

    Boundary cycles are traversed with the region on the left; each cycle is
    a list of (face, side) slots.  Per boundary vertex the turn is pi minus
    the angle the region subtends there.
    """

    def __init__(self, surface, faces):
        self.surface = surface
        self.faces = frozenset(int(f) for f in faces)
        if not self.faces:
            raise SurfaceError("region-empty", "region needs at least one face")
        self._check_connected()
        self.boundary_cycles = self._boundary_cycles()

    def _check_connected(self):
        s = self.surface
        seen = {min(self.faces)}
        stack = [min(self.faces)]
        while stack:
            f = stack.pop()
            for side in range(3):
                g = s.gluing.get((f, side))
                if g and g[0] in self.faces and g[0] not in seen:
                    seen.add(g[0])
                    stack.append(g[0])
        if seen != self.faces:
            raise SurfaceError("region-connected", "region is not connected")

    def _is_boundary(self, f, side):
        g = self.surface.gluing.get((f, side))
        return g is None or g[0] not in self.faces

    def _boundary_cycles(self):
        s = self.surface
        todo = {
            (f, side)
            for f in self.faces
            for side in range(3)
            if self._is_boundary(f, side)
        }
        cycles = []
        while todo:
            start = min(todo)
            cycle = []
            cur = start
            while True:
                cycle.append(cur)
                todo.discard(cur)
                f, side = cur
                c = (side + 2) % 3  # head corner of the directed side
                # rotate around the head vertex through region faces
                while True:
                    cand = (f, (c + 2) % 3)
                    if self._is_boundary(*cand):
                        cur = cand
                        break
                    f, s2 = s.gluing[cand]
                    c = (s2 + 2) % 3
                if cur == start:
                    break
            cycles.append(cycle)
        return cycles

    def boundary_vertex_turns(self):
        """Turn per boundary vertex occurrence, cycle by cycle."""
        s = self.surface
        turns = []
        for cycle in self.boundary_cycles:
            cycle_turns = []
            for i, (f, side) in enumerate(cycle):
                # angle the region subtends at the head vertex of this side
                c = (side + 2) % 3
                total = 0.0
                ff, cc = f, c
                while True:
                    total += s.angles[ff, cc]
                    cand = (ff, (cc + 2) % 3)
                    if self._is_boundary(*cand):
                        break
                    ff, s2 = s.gluing[cand]
                    cc = (s2 + 2) % 3
                v = s.vertex(f, c)
                cycle_turns.append((v, math.pi - total))
            turns.append(cycle_turns)
        return turns

    def interior_vertices(self):
        s = self.surface
        out = []
        for v in range(s.n_vertices):
            slots = s.corner_slots(v)
            if all(f in self.faces for f, _ in slots) and v not in s.boundary_vertices:
                out.append(v)
        return out

    def is_disk(self):
        s = self.surface
        verts = {
            s.vertex(f, c) for f in self.faces for c in range(3)
        }
        edges = set()
        for f in self.faces:
            for side in range(3):
                g = s.gluing.get((f, side))
                if g and g[0] in self.faces:
                    edges.add(frozenset(((f, side), g)))
                else:
                    edges.add((f, side))
        chi = len(verts) - len(edges) + len(self.faces)
        return chi == 1 and len(self.boundary_cycles) == 1

    def area(self):
        return float(sum(self.surface.areas[f] for f in self.faces))


def region_curvature(surface, region):
    """Positive part, negative part, and boundary turn sequences of a region.

    Only vertices interior to the region contribute to the curvature parts.
    """
    pos = neg = 0.0
    for v in region.interior_vertices():
        w = surface.defect(v)
        if w > 0:
            pos += w
        else:
            neg += -w
    return pos, neg, region.boundary_vertex_turns()


@dataclass(frozen=True)
class ClassParams:
    """Parameters cutting out a class of closed oriented surfaces: Euler
    number, diameter cap, negative-curvature cap, short-loop length, and the
    defect gap, plus the derived dilatation cap and apex-angle window."""

    chi: int
    D: float
    C: float
    l: float
    eps: float
    paper_faithful: bool = False

    def __post_init__(self):
        if min(self.D, self.C, self.l, self.eps) <= 0:
            raise ValueError("D, C, l, eps must be positive")
        if self.eps >= TWO_PI:
            raise ValueError("eps must be below 2*pi")

    @property
    def max_dilatation(self):
        return 10.0 * max(TWO_PI / (TWO_PI - self.eps), (TWO_PI + self.C) / TWO_PI)

    @property
    def angle_window(self):
        """Apex-angle window (phi0, phi1) for special stars.

        The faithful window scales with eps and forces on the order of 1e6
        star triangles; the desk window keeps instances tractable.
        """
        if self.paper_faithful:
            return (1e-5 * self.eps, 1e-4 * self.eps)
        return (math.pi / 16.0, math.pi / 8.0)


@dataclass
class ClassCheckOptions:
    net_radius: float | None = None   # for the diameter interval
    max_cycle_edges: int = 8
    max_cycles: int = 200000
    seed: int = 0


def _edge_table(surface):
    """Undirected edge list: (vertex a, vertex b, length, slot)."""
    edges = []
    seen = set()
    for (f, s), other in surface.gluing.items():
        if (f, s) in seen:
            continue
        seen.add((f, s))
        seen.add(other)
        a, b = surface.side_endpoints(f, s)
        edges.append((a, b, surface.faces[f][s], (f, s)))
    return edges


def _simple_cycles_shorter_than(surface, max_len, max_edges, max_cycles):
    """Simple edge cycles of length below ``max_len``.

    Returns (cycles, truncated) where each cycle is a tuple of edge indices.
    Vertices are visited at most once; self-loop edges count as cycles.
    """
    edges = _edge_table(surface)
    adj = {}
    for idx, (a, b, ln, _) in enumerate(edges):
        adj.setdefault(a, []).append((idx, b, ln))
        adj.setdefault(b, []).append((idx, a, ln))
    cycles = []
    seen = set()
    truncated = False
    budget = [max_cycles]

    def dfs(start, v, length, used_edges, used_verts):
        nonlocal truncated
        if budget[0] <= 0:
            truncated = True
            return
        for idx, w, ln in adj.get(v, ()):
            if idx in used_edges or length + ln >= max_len:
                continue
            if w == start and len(used_edges) >= 1:
                key = frozenset(used_edges | {idx})
                if key not in seen:
                    seen.add(key)
                    cycles.append(tuple(sorted(used_edges | {idx})))
                    budget[0] -= 1
                continue
            if w in used_verts or w < start:
                continue
            if len(used_edges) + 1 >= max_edges:
                truncated = True
                continue
            used_edges.add(idx)
            used_verts.add(w)
            dfs(start, w, length + ln, used_edges, used_verts)
            used_edges.discard(idx)
            used_verts.discard(w)

    for start in range(surface.n_vertices):
        # single-edge loops at this vertex
        for idx, w, ln in adj.get(start, ()):
            if w == start and ln < max_len:
                key = frozenset((idx,))
                if key not in seen:
                    seen.add(key)
                    cycles.append((idx,))
        dfs(start, start, 0.0, set(), {start})
    return cycles, truncated, edges


def _cycle_bounds_small_disk(surface, cycle_edge_ids, edges, eps):
    """Does the edge cycle bound a disk whose positive curvature stays
    at or below 2*pi - eps?  Returns (bounds_disk, best_positive_part)."""
    blocked = set()
    for idx in cycle_edge_ids:
        _, _, _, slot = edges[idx]
        blocked.add(slot)
        blocked.add(surface.gluing[slot])
    # split faces into components without crossing the cycle
    comp = [-1] * surface.n_faces
    n_comp = 0
    for f0 in range(surface.n_faces):
        if comp[f0] != -1:
            continue
        stack = [f0]
        comp[f0] = n_comp
        while stack:
            f = stack.pop()
            for s in range(3):
                if (f, s) in blocked:
                    continue
                g = surface.gluing.get((f, s))
                if g and comp[g[0]] == -1:
                    comp[g[0]] = n_comp
                    stack.append(g[0])
        n_comp += 1
    if n_comp != 2:
        return False, None
    cycle_verts = set()
    for idx in cycle_edge_ids:
        a, b, _, _ = edges[idx]
        cycle_verts.update((a, b))
    best = None
    for side in range(2):
        faces = [f for f in range(surface.n_faces) if comp[f] == side]
        region = Region(surface, faces)
        if not region.is_disk():
            continue
        pos = 0.0
        for v in region.interior_vertices():
            if v in cycle_verts:
                continue
            w = surface.defect(v)
            if w > 0:
                pos += w
        if best is None or pos < best:
            best = pos
    if best is None:
        return False, None
    return best <= TWO_PI - eps, best


@dataclass
class ClassMembershipReport:
    verdicts: dict
    details: dict

    @property
    def passed(self):
        return all(v == "pass" for v in self.verdicts.values())

    @property
    def conclusive(self):
        return all(v in ("pass", "fail") for v in self.verdicts.values())


def check_class(surface, params, opts=None):
    """Check membership of a closed surface in the class cut out by
    ``params``.  The short-loop condition is checked over enumerated simple
    edge cycles only, so its verdict may be incomplete; that is reported,
    not errored."""
    from . import geodesics  # local import: geodesics depends on core

    opts = opts or ClassCheckOptions()
    if surface.boundary_slots:
        raise SurfaceError("closed", "class membership applies to closed surfaces")
    verdicts = {}
    details = {}

    if surface.chi_computed != params.chi:
        verdicts["euler"] = "fail"
    else:
        verdicts["euler"] = "pass"
    details["chi"] = surface.chi_computed

    r = opts.net_radius if opts.net_radius is not None else params.D / 8.0
    lo, hi = geodesics.diameter_estimate(surface, r, seed=opts.seed)
    details["diameter_interval"] = (lo, hi)
    if hi <= params.D:
        verdicts["diameter"] = "pass"
    elif lo > params.D:
        verdicts["diameter"] = "fail"
    else:
        verdicts["diameter"] = "inconclusive"

    rep = curvature(surface)
    details["negative_total"] = rep.negative_total
    verdicts["negative-curvature"] = "pass" if rep.negative_total <= params.C else "fail"

    max_defect = float(np.nanmax(rep.defects)) if surface.n_vertices else 0.0
    details["max_defect"] = max_defect
    verdicts["peak-free"] = "pass" if max_defect <= TWO_PI - params.eps else "fail"

    cycles, truncated, edges = _simple_cycles_shorter_than(
        surface, params.l, opts.max_cycle_edges, opts.max_cycles
    )
    details["cycles_checked"] = len(cycles)
    details["cycle_enumeration_truncated"] = truncated
    bad = []
    for cyc in cycles:
        ok, pos = _cycle_bounds_small_disk(surface, cyc, edges, params.eps)
        if not ok:
            bad.append({"edges": list(cyc), "positive_part": pos})
    details["short_loop_violations"] = bad
    if bad:
        verdicts["short-loops"] = "fail"
    elif truncated:
        verdicts["short-loops"] = "inconclusive"
    else:
        verdicts["short-loops"] = "pass"

    return ClassMembershipReport(verdicts=verdicts, details=details)


def load_surface(doc, tol=None, allow_boundary=False):
    """Build a validated ConeSurface from a surface document (a dict with
    "faces", "gluing", and optional "chi")."""
    if not isinstance(doc, dict):
        raise SurfaceError("document", "surface document must be a JSON object")
    try:
        faces = [tuple(float(x) for x in f) for f in doc["faces"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SurfaceError("document", f"bad faces array: {exc}") from exc
    gluing = []
    for pair in doc.get("gluing", ()):
        try:
            (f, s), (f2, s2) = pair
            gluing.append(((int(f), int(s)), (int(f2), int(s2))))
        except (TypeError, ValueError) as exc:
            raise SurfaceError("document", f"bad gluing entry {pair!r}") from exc
    chi = doc.get("chi")
    return ConeSurface(
        faces, gluing, chi=chi, tol=tol, allow_boundary=allow_boundary
    )


def emit_surface(surface):
    """Surface document for a ConeSurface; inverse of load_surface."""
    seen = set()
    pairs = []
    for slot in sorted(surface.gluing):
        other = surface.gluing[slot]
        if slot in seen:
            continue
        seen.add(slot)
        seen.add(other)
        pairs.append([list(slot), list(other)])
    return {
        "faces": [list(f) for f in surface.faces],
        "gluing": pairs,
        "chi": surface.chi_computed,
    }
