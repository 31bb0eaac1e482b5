"""Special stars around cone vertices and angle-bounded partitions.

A star is a fan of isoceles geodesic triangles carved around a vertex and
re-meshed as a standalone disk; partitions cover a surface with generalized
triangles whose sides are geodesic edge chains of the (refined) mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TWO_PI, ConeSurface, Region, SurfaceError, curvature, face_chart
from .geodesics import (
    SurfacePoint,
    direction_at_vertex,
    shortest_path,
    trace_ray,
)
from .refine import EditableSurface


@dataclass
class Star:
    """Fan of isoceles geodesic triangles around a center vertex, extracted
    as its own disk surface.

    Wedge i is spanned by rim vertices i and i+1 (mod m); ``wedge_faces``
    lists the extracted faces of each wedge (one face, or three when an
    interior cone point lives inside it).
    """

    surface: ConeSurface
    center: int
    rim: list
    apex_angles: list
    radius: float
    base_lengths: list
    wedge_faces: list
    interior_cones: list  # (vertex id, defect, wedge index, distance from center)

    @property
    def m(self):
        return len(self.rim)

    def base_slots(self):
        """Boundary slot of each wedge's base edge, wedge by wedge."""
        out = []
        for faces in self.wedge_faces:
            f = faces[0]
            out.append((f, 0))
        return out

    def to_doc(self):
        from .core import emit_surface

        return {
            "surface": emit_surface(self.surface),
            "center": self.center,
            "rim": [int(v) for v in self.rim],
            "apex_angles": [float(a) for a in self.apex_angles],
            "radius": float(self.radius),
            "base_lengths": [float(b) for b in self.base_lengths],
            "wedge_faces": [[int(f) for f in w] for w in self.wedge_faces],
            "interior_cones": [
                [int(v), float(w), int(k), float(d)] for v, w, k, d in self.interior_cones
            ],
        }

    @staticmethod
    def from_doc(doc, tol=None):
        from .core import load_surface

        return Star(
            surface=load_surface(doc["surface"], tol=tol, allow_boundary=True),
            center=int(doc["center"]),
            rim=[int(v) for v in doc["rim"]],
            apex_angles=[float(a) for a in doc["apex_angles"]],
            radius=float(doc["radius"]),
            base_lengths=[float(b) for b in doc["base_lengths"]],
            wedge_faces=[[int(f) for f in w] for w in doc["wedge_faces"]],
            interior_cones=[
                (int(v), float(w), int(k), float(d))
                for v, w, k, d in doc["interior_cones"]
            ],
        )


def feasible_edge_count(cone_angle, phi0, phi1):
    """Smallest m with uniform apex angles cone_angle/m strictly inside
    (phi0, phi1)."""
    if not (0 < phi0 < phi1):
        raise SurfaceError("star", "need 0 < phi0 < phi1")
    m = max(1, int(math.ceil(cone_angle / phi1)))
    while cone_angle / m >= phi1 * (1.0 - 1e-12):
        m += 1
    if m * phi0 >= cone_angle:
        raise SurfaceError(
            "star-window",
            f"cone angle {cone_angle:g} admits no partition into ({phi0:g}, {phi1:g})",
        )
    return m


def build_star(surface, v, radius, phi0, phi1, offset=0.0, tol_match=1e-8):
    """Carve the star of vertex v at the given radius with apex angles in
    (phi0, phi1) and re-mesh it as a standalone disk.

    Requires the disk around v to be embedded (every spoke realizes the
    distance to its endpoint) and at most one cone point per wedge.
    """
    if v in surface.boundary_vertices:
        raise SurfaceError("star", "star center must be an interior vertex")
    theta = surface.cone_angle(v)
    m = feasible_edge_count(theta, phi0, phi1)
    psi = theta / m

    for attempt in range(8):
        rot = offset + attempt * 0.137 * psi
        try:
            return _build_star_at(surface, v, radius, m, psi, rot, tol_match)
        except SurfaceError as e:
            if e.invariant in ("star-ray", "star-side") and attempt < 7:
                continue
            raise
    raise SurfaceError("star-ray", "no spoke offset avoided the vertices")


def _build_star_at(surface, v, radius, m, psi, rot, tol_match):
    rim_points = []
    for i in range(m):
        f, c, d, o = direction_at_vertex(surface, v, rot + i * psi)
        ray = trace_ray(surface, (f, o, d), max_length=radius)
        if ray.end_reason != "length":
            raise SurfaceError(
                "star-ray", f"spoke {i} hit a {ray.end_reason} before radius"
            )
        rim_points.append(ray.end_point)

    center_pt = SurfacePoint.vertex_point(surface, v)
    for i, p in enumerate(rim_points):
        g = shortest_path(surface, center_pt, p)
        if abs(g.length - radius) > tol_match * max(1.0, radius):
            raise SurfaceError(
                "star-radius",
                f"disk not embedded: spoke {i} has d(B, A_i) = {g.length:g} < {radius:g}",
            )

    base = []
    for i in range(m):
        g = shortest_path(surface, rim_points[i], rim_points[(i + 1) % m])
        if g.via:
            raise SurfaceError("star-side", f"side {i} bends at a vertex")
        base.append(g.length)

    # interior cone points and their wedge assignment
    cones = []
    for w in range(surface.n_vertices):
        if w == v or w in surface.boundary_vertices:
            continue
        if abs(surface.defect(w)) <= surface.tol.tol_flat:
            continue
        wp = SurfacePoint.vertex_point(surface, w)
        g = shortest_path(surface, center_pt, wp)
        if g.length >= radius:
            continue
        ang = _initial_angle_at(surface, v, g)
        k = int(((ang - rot) % TWO_PI) // psi)
        if k >= m:
            k = m - 1
        d_i = shortest_path(surface, wp, rim_points[k]).length
        d_j = shortest_path(surface, wp, rim_points[(k + 1) % m]).length
        cones.append((w, surface.defect(w), k, g.length, d_i, d_j))
    by_wedge = {}
    for entry in cones:
        by_wedge.setdefault(entry[2], []).append(entry)
    for k, entries in by_wedge.items():
        if len(entries) > 1:
            raise SurfaceError(
                "star-extraction", f"wedge {k} holds {len(entries)} cone points"
            )

    # assemble the extracted disk: labels 0 = center, 1..m = rim
    e = EditableSurface(tol=surface.tol)
    e.n_labels = m + 1
    wedge_faces = []
    cone_records = []
    for i in range(m):
        a_lbl, b_lbl = i + 1, (i + 1) % m + 1
        entry = by_wedge.get(i, [None])[0]
        if entry is None:
            f = e.add_face((base[i], radius, radius), (0, a_lbl, b_lbl))
            wedge_faces.append([f])
        else:
            w, defect, _, r_w, d_i, d_j = entry
            x_lbl = e.new_label()
            f0 = e.add_face((base[i], d_j, d_i), (x_lbl, a_lbl, b_lbl))
            f1 = e.add_face((radius, r_w, d_j), (x_lbl, b_lbl, 0))
            f2 = e.add_face((radius, d_i, r_w), (x_lbl, 0, a_lbl))
            e.glue((f0, 1), (f1, 2))
            e.glue((f1, 1), (f2, 2))
            e.glue((f2, 1), (f0, 2))
            wedge_faces.append([f0, f1, f2])
            cone_records.append((x_lbl, defect, i, r_w))
    for i in range(m):
        # spoke between wedge i and wedge i+1
        fa = wedge_faces[i][1] if len(wedge_faces[i]) > 1 else wedge_faces[i][0]
        sa = 1
        fb = wedge_faces[(i + 1) % m][2] if len(wedge_faces[(i + 1) % m]) > 1 else wedge_faces[(i + 1) % m][0]
        sb = 2
        e.glue((fa, sa), (fb, sb))
    view = e.freeze(allow_boundary=True)
    disk = view.surface

    center_id = view.label_map[0]
    rim_ids = [view.label_map[i + 1] for i in range(m)]
    # closure checks: the extraction must reproduce the carved metric
    got_theta = disk.cone_angle(center_id)
    if abs(got_theta - m * psi) > 1e-7 * (m + 1):
        raise SurfaceError(
            "star-extraction",
            f"center angle closure failed: {got_theta:g} vs {m * psi:g}",
        )
    interior = []
    for x_lbl, defect, widx, r_w in cone_records:
        vid = view.label_map[x_lbl]
        got = disk.defect(vid)
        if abs(got - defect) > 1e-7:
            raise SurfaceError(
                "star-extraction",
                f"cone point closure failed: defect {got:g} vs {defect:g}",
            )
        interior.append((vid, defect, widx, r_w))

    return Star(
        surface=disk,
        center=center_id,
        rim=rim_ids,
        apex_angles=[psi] * m,
        radius=radius,
        base_lengths=base,
        wedge_faces=[[view.face_map[f] for f in w] for w in wedge_faces],
        interior_cones=interior,
    )


def _initial_angle_at(surface, v, geodesic):
    """Fan angle at v of a geodesic leaving it."""
    from .geodesics import angle_at_vertex

    f0 = geodesic.faces[0]
    start = geodesic.start.position(surface)
    if geodesic.crossings:
        (fc, sc), t = geodesic.crossings[0]
        ch = surface.charts[fc]
        p = (1 - t) * ch[(sc + 1) % 3] + t * ch[(sc + 2) % 3]
        tgt = (float(p[0]), float(p[1]))
    else:
        tgt = geodesic.end.position(surface)
    d = (tgt[0] - start[0], tgt[1] - start[1])
    n = math.hypot(*d)
    return angle_at_vertex(surface, v, f0, (d[0] / n, d[1] / n))


# -- triangle regions ---------------------------------------------------------


@dataclass
class TriangleRegion:
    """A disk region bounded by three geodesic edge chains with marked
    corners.  ``total_curvature`` adds the interior defect variation and the
    turn variation along the open sides."""

    surface: ConeSurface
    faces: frozenset
    corners: tuple
    sides: list            # three vertex-id chains, side i opposite corner i
    side_lengths: tuple
    total_curvature: float
    min_angle: float
    diameter: float

    @staticmethod
    def build(surface, faces, corners):
        region = Region(surface, faces)
        if not region.is_disk():
            raise SurfaceError("triangle-region", "region is not a disk")
        chains, angles, sigma = _split_boundary_at_corners(surface, region, corners)
        interior = sum(
            abs(surface.defect(v)) for v in region.interior_vertices()
        )
        lengths = tuple(_chain_length(surface, region, c) for c in chains)
        for i in range(3):
            others = lengths[(i + 1) % 3] + lengths[(i + 2) % 3]
            if others <= lengths[i]:
                raise SurfaceError(
                    "triangle-region", f"side lengths {lengths} violate the strict triangle inequality"
                )
        return TriangleRegion(
            surface=surface,
            faces=region.faces,
            corners=tuple(corners),
            sides=chains,
            side_lengths=lengths,
            total_curvature=interior + sigma,
            min_angle=min(angles),
            diameter=max(lengths),
        )


def _split_boundary_at_corners(surface, region, corners):
    """Boundary chains between the marked corners, interior angles at the
    corners, and the turn variation along the open sides.

    Side i (opposite corner i) is returned as the vertex chain between the
    other two corners, following the boundary with the region on the left.
    """
    cycles = region.boundary_cycles
    if len(cycles) != 1:
        raise SurfaceError("triangle-region", "expected a single boundary cycle")
    turns = region.boundary_vertex_turns()[0]
    path = [surface.vertex(f, (s + 2) % 3) for f, s in cycles[0]]
    n = len(path)
    pos = {}
    for i, vtx in enumerate(path):
        pos.setdefault(vtx, []).append(i)
    starts = []
    for c in corners:
        hits = pos.get(c, ())
        if len(hits) != 1:
            raise SurfaceError(
                "triangle-region", f"corner {c} appears {len(hits)} times on the boundary"
            )
        starts.append(hits[0])
    angles = [math.pi - turns[starts[k]][1] for k in range(3)]
    order = sorted(range(3), key=lambda k: starts[k])
    sides = [None, None, None]
    sigma = 0.0
    for a in range(3):
        k0, k1 = order[a], order[(a + 1) % 3]
        i0, i1 = starts[k0], starts[k1]
        seq = [corners[k0]]
        j = i0
        while j != i1:
            j = (j + 1) % n
            seq.append(path[j])
            if len(seq) > n + 2:
                raise SurfaceError("triangle-region", "boundary walk ran away")
            if j != i1:
                sigma += abs(turns[j][1])
        sides[3 - k0 - k1] = seq
    return sides, angles, sigma


def _chain_length(surface, region, chain):
    total = 0.0
    for u, w in zip(chain, chain[1:]):
        total += _edge_length_between(surface, region, u, w)
    return total


def _edge_length_between(surface, region, u, w):
    for f in region.faces:
        for s in range(3):
            a, b = surface.side_endpoints(f, s)
            if {a, b} == {u, w}:
                g = surface.gluing.get((f, s))
                if g is None or g[0] not in region.faces:
                    return surface.faces[f][s]
    raise SurfaceError("triangle-region", f"no boundary edge between {u} and {w}")


# -- refinement workspace -------------------------------------------------------


def _pos_on_face(surface, pt, face):
    """Chart position of a point in the chart of a specific face among its
    representations."""
    for f, b in pt.reps(surface):
        if f == face:
            return SurfacePoint(f, b).position(surface)
    raise SurfaceError("cut", f"point has no representation on face {face}")


def _geodesic_segments(surface, g):
    """(face, entry_xy, exit_xy) steps of a vertex-free geodesic, one per
    visited face, for cutting."""
    if g.via:
        raise SurfaceError("cut", "cannot cut along a geodesic that bends at a vertex")
    if len(g.faces) == 1:
        return [
            (
                g.faces[0],
                _pos_on_face(surface, g.start, g.faces[0]),
                _pos_on_face(surface, g.end, g.faces[0]),
            )
        ]
    steps = []
    entry = _pos_on_face(surface, g.start, g.faces[0])
    for k, ((f, s), t) in enumerate(g.crossings):
        ch = surface.charts[f]
        p = (1 - t) * ch[(s + 1) % 3] + t * ch[(s + 2) % 3]
        steps.append((g.faces[k], entry, (float(p[0]), float(p[1]))))
        f2, s2 = surface.gluing[(f, s)]
        ch2 = surface.charts[f2]
        t2 = 1.0 - t
        q = (1 - t2) * ch2[(s2 + 1) % 3] + t2 * ch2[(s2 + 2) % 3]
        entry = (float(q[0]), float(q[1]))
    steps.append((g.faces[-1], entry, _pos_on_face(surface, g.end, g.faces[-1])))
    return steps


def _live_faces(e, faces):
    out = set()
    stack = list(faces)
    while stack:
        f = stack.pop()
        if f in e.alive:
            out.add(f)
            continue
        kids = e.descent.get(f)
        if kids is None:
            raise SurfaceError("partition", f"face {f} disappeared without descent")
        stack.extend(k for k, _ in kids)
    return out


def _flood(e, faces, barriers, seed):
    seen = {seed}
    stack = [seed]
    while stack:
        f = stack.pop()
        for s in range(3):
            if (f, s) in barriers:
                continue
            g = e.gluing.get((f, s))
            if g is None or g in barriers:
                continue
            if g[0] in faces and g[0] not in seen:
                seen.add(g[0])
                stack.append(g[0])
    return seen


def _edges_between_labels(e, faces, a_lbl, b_lbl):
    """Slots (with partners) of live edges joining two vertex labels."""
    out = set()
    for f in faces:
        for s in range(3):
            u = e.corner_vertex[(f, (s + 1) % 3)]
            w = e.corner_vertex[(f, (s + 2) % 3)]
            if {u, w} == {a_lbl, b_lbl}:
                out.add((f, s))
                g = e.gluing.get((f, s))
                if g is not None:
                    out.add(g)
    return out


class _Workspace:
    """Editable surface plus the evolving region records of a partition.

    A region record holds a face-id set (lazily renormalized to live ids)
    and its three corner vertex labels.
    """

    def __init__(self, surface):
        from .flatten import _pipeline_tol

        self.e = EditableSurface.from_surface(surface)
        self.e.tol = _pipeline_tol(surface.tol)
        self._separate_repeated_corners()
        self.regions = {}
        self._next = 0
        for f in sorted(self.e.alive):
            self._add_region(
                {f}, tuple(self.e.corner_vertex[(f, c)] for c in range(3))
            )
        self._cut_seq = 0
        # chain-vertex reuse threshold for side split points: the public
        # subdivision keeps it tight for exact tangent lengths; the partition
        # loop snaps coarsely so repeated subdivision cannot pile up slivers
        self.side_snap = 1e-6

    def _separate_repeated_corners(self):
        """Tight meshes (a one-vertex torus, say) have faces whose corners
        coincide as surface vertices; midpoint splits give every face three
        distinct corners so regions are honest disks."""
        e = self.e
        for _round in range(100):
            bad = None
            for f in sorted(e.alive):
                labels = [e.corner_vertex[(f, c)] for c in range(3)]
                if len(set(labels)) < 3:
                    # split a side whose endpoints share a label if possible
                    side = 0
                    for s in range(3):
                        if labels[(s + 1) % 3] == labels[(s + 2) % 3]:
                            side = s
                            break
                    bad = (f, side)
                    break
            if bad is None:
                return
            e.split_edge(bad[0], bad[1], 0.5)
        raise SurfaceError("partition", "could not separate repeated corners")

    def _add_region(self, faces, corners):
        self.regions[self._next] = {"faces": set(faces), "corners": tuple(corners)}
        self._next += 1
        return self._next - 1

    def live(self, rid):
        region = self.regions[rid]
        region["faces"] = _live_faces(self.e, region["faces"])
        return region["faces"]

    def region_of_face(self, live_face):
        for rid in self.regions:
            if live_face in self.live(rid):
                return rid
        return None

    def snapshot(self):
        return self.e.freeze(allow_boundary=True)

    def triangle(self, view, rid):
        region = self.regions[rid]
        faces = frozenset(view.face_map[f] for f in self.live(rid))
        corners = tuple(view.label_map[c] for c in region["corners"])
        return TriangleRegion.build(view.surface, faces, corners)

    # -- vertex insertion ------------------------------------------------------

    def insert_point(self, face, bary):
        """Make a point of the original surface a partition vertex."""
        e = self.e
        ch0 = face_chart(e.faces[face]) if e.faces[face] is not None else None
        if ch0 is None:
            raise SurfaceError("partition", "insertion face was retired")
        xy = bary[0] * ch0[0] + bary[1] * ch0[1] + bary[2] * ch0[2]
        live, xy = e.locate(face, (float(xy[0]), float(xy[1])))
        b = e.bary_in(live, xy)
        zeros = [c for c in range(3) if b[c] <= 1e-9]
        if len(zeros) >= 2:
            c = next(c for c in range(3) if b[c] > 1e-9)
            return e.corner_vertex[(live, c)]
        if len(zeros) == 1:
            s = zeros[0]
            t = b[(s + 2) % 3] / (b[(s + 1) % 3] + b[(s + 2) % 3])
            u_lbl = e.corner_vertex[(live, (s + 1) % 3)]
            w_lbl = e.corner_vertex[(live, (s + 2) % 3)]
            rid = self.region_of_face(live)
            partner = e.gluing.get((live, s))
            rid2 = self.region_of_face(partner[0]) if partner else None
            label, _ = e.split_edge(live, s, t)
            self._split_region_at_side_vertex(rid, label, u_lbl, w_lbl)
            if rid2 is not None and rid2 != rid:
                self._split_region_at_side_vertex(rid2, label, u_lbl, w_lbl)
            return label
        rid = self.region_of_face(live)
        faces_before = set(self.live(rid))
        corners = self.regions[rid]["corners"]
        label, kids = e.split_face(live, b)
        barriers = set()
        for kid in kids:
            for s in (1, 2):
                barriers.add((kid, s))
        all_faces = _live_faces(e, faces_before)
        del self.regions[rid]
        for c in range(3):
            part = _flood(e, all_faces, barriers, kids[c])
            self._add_region(
                part,
                (label, e.corner_vertex[(kids[c], 1)], e.corner_vertex[(kids[c], 2)]),
            )
        return label

    def _split_region_at_side_vertex(self, rid, label, u_lbl, w_lbl):
        """A region side was split at ``label``; cut the region in two along
        the new edge from label to the opposite corner."""
        e = self.e
        region = self.regions[rid]
        corners = region["corners"]
        opp = [c for c in corners if c not in (u_lbl, w_lbl)]
        if len(opp) != 1:
            raise SurfaceError("partition", "split side does not belong to this region")
        opp = opp[0]
        faces = self.live(rid)
        barriers = _edges_between_labels(e, faces, label, opp)
        if not barriers:
            raise SurfaceError("partition", "no connecting edge after edge split")
        seed_u = seed_w = None
        for f in faces:
            cs = {e.corner_vertex[(f, c)] for c in range(3)}
            if u_lbl in cs and label in cs and seed_u is None:
                seed_u = f
            if w_lbl in cs and label in cs and seed_w is None:
                seed_w = f
        part_u = _flood(e, faces, barriers, seed_u)
        part_w = _flood(e, faces, barriers, seed_w)
        del self.regions[rid]
        self._add_region(part_u, (opp, u_lbl, label))
        self._add_region(part_w, (opp, label, w_lbl))

    # -- subdivision ------------------------------------------------------------

    def _split_point_on_side(self, view, tri, side_idx, arc, label_hint=None):
        """Create (or reuse) a partition vertex on a side at the given arc
        length from the chain start; returns its label."""
        e = self.e
        frozen = view.surface
        chain = tri.sides[side_idx]
        inv = view.inverse_face_map
        vid_to_label = {v: k for k, v in view.label_map.items()}
        region_frozen = tri.faces
        acc = 0.0
        for u, w in zip(chain, chain[1:]):
            slot, length = _boundary_slot_between(frozen, region_frozen, u, w)
            nxt = acc + length
            if arc <= nxt + 1e-12:
                t_local = (arc - acc) / length
                if t_local < self.side_snap:
                    return vid_to_label[u]
                if t_local > 1 - self.side_snap:
                    return vid_to_label[w]
                f, s = slot
                a, b = frozen.side_endpoints(f, s)
                t_dir = t_local if (a, b) == (u, w) else 1.0 - t_local
                label, _ = e.split_edge(inv[f], s, t_dir, label=label_hint)
                return label
            acc = nxt
        raise SurfaceError("partition", "arc length beyond the side")

    def gromov_subdivide_region(self, rid):
        """Inscribed-tangent subdivision of one region into four; returns the
        new region ids or None when the tangent construction degenerates."""
        e = self.e
        view = self.snapshot()
        tri = self.triangle(view, rid)
        a, b, c = tri.side_lengths
        tangents = ((b + c - a) / 2, (c + a - b) / 2, (a + b - c) / 2)
        scale = max(a, b, c)
        if min(tangents) <= 1e-6 * scale:
            return None
        # point on side i at tangent length from corner (i+1)
        labels = []
        for i in range(3):
            view = self.snapshot()
            tri_now = self.triangle(view, rid)
            chain = tri_now.sides[i]
            start_corner = chain[0]
            cor = view.label_map[tri.corners[(i + 1) % 3]]
            arc = tangents[(i + 1) % 3] if start_corner == cor else tri.side_lengths[i] - tangents[(i + 1) % 3]
            labels.append(self._split_point_on_side(view, tri_now, i, arc))
        corners_now = set(self.regions[rid]["corners"])
        if len(set(labels)) < 3 or corners_now & set(labels):
            return None  # a tangent point snapped onto a corner: bisect instead
        # connect the two points flanking each corner
        cut_tags = []
        for j in range(3):
            la, lb = labels[(j + 1) % 3], labels[(j + 2) % 3]
            tag = ("gromov", self._cut_seq)
            self._cut_seq += 1
            self._cut_between_labels(rid, la, lb, tag)
            cut_tags.append(tag)
        return self._assemble_parts(rid, labels, cut_tags)

    def bisect_region(self, rid):
        """Split the region's longest side at its midpoint and cut to the
        opposite corner."""
        view = self.snapshot()
        tri = self.triangle(view, rid)
        corners = self.regions[rid]["corners"]
        label = None
        for i in np.argsort(tri.side_lengths)[::-1]:
            i = int(i)
            cand = self._split_point_on_side(view, tri, i, tri.side_lengths[i] / 2)
            if cand not in corners:
                label = cand
                break
        if label is None:
            raise SurfaceError("partition", "no side admits a midpoint split")
        opp = corners[i]
        u_lbl = corners[(i + 1) % 3]
        w_lbl = corners[(i + 2) % 3]
        faces = self.live(rid)
        barriers = _edges_between_labels(self.e, faces, label, opp)
        if not barriers:
            tag = ("bisect", self._cut_seq)
            self._cut_seq += 1
            slots = self._cut_between_labels(rid, label, opp, tag)
            barriers = set()
            for slot in slots:
                barriers.add(slot)
                g = self.e.gluing.get(slot)
                if g is not None:
                    barriers.add(g)
        faces = self.live(rid)
        seed_u = seed_w = None
        for f in faces:
            cs = {self.e.corner_vertex[(f, c)] for c in range(3)}
            if u_lbl in cs and seed_u is None:
                seed_u = f
            if w_lbl in cs and seed_w is None:
                seed_w = f
        if seed_u is None or seed_w is None:
            raise SurfaceError("partition", "bisection lost its seeds")
        part_u = _flood(self.e, faces, barriers, seed_u)
        part_w = _flood(self.e, faces, barriers, seed_w)
        if part_u & part_w:
            raise SurfaceError("partition", "bisection parts overlap")
        del self.regions[rid]
        self._add_region(part_u, (opp, u_lbl, label))
        self._add_region(part_w, (opp, label, w_lbl))

    def _cut_between_labels(self, rid, la, lb, tag):
        """Cut the region along the shortest curve of its induced metric
        between two of its vertices.  The curve may run along the boundary
        or bend at straight/reflex side vertices; such vertices enter the
        search as waypoints and the cut goes leg by leg."""
        e = self.e
        view = self.snapshot()
        frozen = view.surface
        restrict = frozenset(view.face_map[f] for f in self.live(rid))
        region = Region(frozen, restrict)
        waypoints = set()
        for v in region.interior_vertices():
            if frozen.defect(v) < -frozen.tol.tol_flat:
                waypoints.add(v)
        for cycle in region.boundary_vertex_turns():
            for v, turn in cycle:
                if turn <= 1e-9:
                    waypoints.add(v)
        va, vb = view.label_map[la], view.label_map[lb]
        waypoints -= {va, vb}
        pa = SurfacePoint.vertex_point(frozen, va)
        pb = SurfacePoint.vertex_point(frozen, vb)
        g = shortest_path(frozen, pa, pb, restrict=restrict, waypoints=sorted(waypoints))
        vid_to_label = {v: k for k, v in view.label_map.items()}
        node_labels = [la] + [vid_to_label[v] for v in g.via] + [lb]
        slots = []
        queue = list(zip(node_labels, node_labels[1:]))
        guard = 0
        while queue:
            guard += 1
            if guard > 200:
                raise SurfaceError("cut", "leg resolution ran away")
            l0, l1 = queue.pop(0)
            direct = _edges_between_labels(e, self.live(rid), l0, l1)
            if direct:
                slot = min(direct)
                e._mark(slot, tag)
                slots.append(slot)
                continue
            # every leg is traced and cut against its own fresh snapshot
            view = self.snapshot()
            frozen = view.surface
            restrict = frozenset(view.face_map[f] for f in self.live(rid))
            inv = view.inverse_face_map
            vid_to_label = {v: k for k, v in view.label_map.items()}
            resolved = _resolve_leg(
                frozen, restrict, view.label_map[l0], view.label_map[l1]
            )
            if len(resolved) > 1:
                sub = [
                    (vid_to_label[w0], vid_to_label[w1]) for w0, w1, _ in resolved
                ]
                queue = sub + queue
                continue
            leg = resolved[0][2]
            steps = [
                (inv[f], p, q) for f, p, q in _geodesic_segments(frozen, leg)
            ]
            leg_slots, end = e.cut_chain(steps, l0, tag, end_label=l1, snap_rel=1e-3)
            slots.extend(leg_slots)
            if end != l1:
                raise SurfaceError("cut", "cut did not arrive at its target vertex")
        return slots

    def _assemble_parts(self, rid, labels, cut_tags):
        e = self.e
        region = self.regions[rid]
        corners = region["corners"]
        faces = self.live(rid)
        wanted = set(cut_tags)
        barriers = {
            slot for slot, tags in e.edge_tags.items() if tags & wanted
        }
        new_ids = []
        claimed = set()
        for j in range(3):
            seed = None
            for f in faces:
                cs = {e.corner_vertex[(f, c)] for c in range(3)}
                if corners[j] in cs and f not in claimed:
                    seed = f
                    break
            if seed is None:
                raise SurfaceError("partition", "corner part lost its seed")
            part = _flood(e, faces, barriers, seed)
            if claimed & part:
                raise SurfaceError("partition", "gromov cuts crossed each other")
            claimed |= part
            new_ids.append(
                self._add_region(
                    part, (corners[j], labels[(j + 1) % 3], labels[(j + 2) % 3])
                )
            )
        middle = faces - claimed
        if not middle:
            raise SurfaceError("partition", "gromov middle part vanished")
        new_ids.append(self._add_region(middle, tuple(labels)))
        del self.regions[rid]
        return new_ids


def _resolve_leg(frozen, restrict, v0, v1, depth=0):
    """Vertex-free geodesic legs from v0 to v1 in the restricted region,
    recursively stopping at any vertex the path grazes: cutting along a
    polyline that passes within noise of a vertex is hopeless, so the graze
    becomes an explicit stop (the detour is of the same noise order)."""
    leg = shortest_path(
        frozen,
        SurfacePoint.vertex_point(frozen, v0),
        SurfacePoint.vertex_point(frozen, v1),
        restrict=restrict,
        waypoints=[],
    )
    graze = None
    graze_dist = 1e-3 * max(leg.length, 1e-12)
    for (f, s), t in leg.crossings:
        edge_len = frozen.faces[f][s]
        for tt, corner in ((t, (s + 1) % 3), (1.0 - t, (s + 2) % 3)):
            if tt * edge_len <= graze_dist:
                w = frozen.vertex(f, corner)
                if w not in (v0, v1):
                    graze = w
                    break
        if graze is not None:
            break
    if graze is not None and depth < 8:
        return _resolve_leg(frozen, restrict, v0, graze, depth + 1) + _resolve_leg(
            frozen, restrict, graze, v1, depth + 1
        )
    return [(v0, v1, leg)]


def _boundary_slot_between(surface, region_faces, u, w):
    for f in region_faces:
        for s in range(3):
            a, b = surface.side_endpoints(f, s)
            if {a, b} == {u, w}:
                g = surface.gluing.get((f, s))
                if g is None or g[0] not in region_faces:
                    return (f, s), surface.faces[f][s]
    raise SurfaceError("partition", f"no boundary edge between {u} and {w}")


# -- public operations -----------------------------------------------------------


def gromov_subdivide(surface, tri):
    """Subdivide a triangle region at its inscribed-tangent points; returns
    (refined surface, [four TriangleRegions])."""
    ws = _Workspace(surface)
    target = None
    for rid in list(ws.regions):
        ws.regions[rid]["faces"] = set()
    ws.regions.clear()
    target = ws._add_region(set(tri.faces), tri.corners)
    # regions must cover the whole surface for bookkeeping; add the rest
    rest = set(range(surface.n_faces)) - set(tri.faces)
    comps = []
    while rest:
        f0 = rest.pop()
        comp = _flood(ws.e, rest | {f0}, set(), f0)
        rest -= comp
        comps.append(comp)
    holders = [ws._add_region(comp, (-1, -1, -1)) for comp in comps]
    new_ids = ws.gromov_subdivide_region(target)
    if new_ids is None:
        raise SurfaceError("gromov", "degenerate tangent construction (zero side split)")
    view = ws.snapshot()
    parts = [ws.triangle(view, rid) for rid in new_ids]
    return view.surface, parts


@dataclass
class PartitionResult:
    surface: ConeSurface
    triangles: list
    alpha: float           # achieved minimum angle
    theta: float           # defect headroom min(2*pi - positive defect)
    max_total_curvature: float
    report: dict


def refine_partition(surface, nu, d, required_vertices=(), max_rounds=40):
    """Partition the surface into triangle regions with total curvature
    below nu, diameter below d, and all required vertices among the
    partition vertices.  Peak points are rejected.

    All cone points are mesh vertices, hence partition vertices from the
    start; subdivision then only chases the diameter bound, preferring the
    tangent-point split (it preserves the angle bound on flat pieces) and
    falling back to longest-side bisection when that degenerates.
    """
    rep = curvature(surface)
    for v in range(surface.n_vertices):
        if v in surface.boundary_vertices:
            continue
        if surface.defect(v) >= TWO_PI - 1e-6:
            raise SurfaceError("peak", f"vertex {v} is a peak point")
    ws = _Workspace(surface)
    ws.side_snap = 2e-3
    for p in required_vertices:
        ws.insert_point(p.face, p.bary)

    for round_idx in range(max_rounds):
        view = ws.snapshot()
        oversized = []
        for rid in list(ws.regions):
            tri = ws.triangle(view, rid)
            if tri.diameter >= d:
                oversized.append((tri.diameter, rid))
        if not oversized:
            break
        oversized.sort(reverse=True)
        for _, rid in oversized:
            if rid not in ws.regions:
                continue
            # longest-side bisection is conforming across neighbors (shared
            # midpoints coincide exactly), so repeated refinement stays
            # numerically clean; the tangent-point subdivision remains the
            # public operation for single regions
            ws.bisect_region(rid)
    else:
        view = ws.snapshot()
        worst = max(ws.triangle(view, rid).diameter for rid in ws.regions)
        raise SurfaceError(
            "partition-depth",
            f"diameter {worst:g} still above {d:g} after {max_rounds} rounds",
        )

    view = ws.snapshot()
    triangles = [ws.triangle(view, rid) for rid in sorted(ws.regions)]
    alpha = min(t.min_angle for t in triangles)
    worst_curv = max(t.total_curvature for t in triangles)
    if worst_curv >= nu:
        raise SurfaceError(
            "partition-curvature",
            f"a region kept total curvature {worst_curv:g} >= {nu:g}",
        )
    area_sum = sum(
        float(sum(view.surface.areas[f] for f in t.faces)) for t in triangles
    )
    report = {
        "triangle_count": len(triangles),
        "alpha": alpha,
        "max_total_curvature": worst_curv,
        "area_residual": abs(area_sum - view.surface.area())
        / max(view.surface.area(), 1e-300),
        "required_vertices": len(tuple(required_vertices)),
    }
    theta = TWO_PI - max(
        (max(0.0, surface.defect(v)) for v in range(surface.n_vertices)
         if v not in surface.boundary_vertices),
        default=0.0,
    )
    return PartitionResult(
        surface=view.surface,
        triangles=triangles,
        alpha=alpha,
        theta=theta,
        max_total_curvature=worst_curv,
        report=report,
    )


def star_from_disk(surface, center=None, radius=None, tol_match=1e-8):
    """Interpret a star-shaped disk surface as a Star record.

    The rim is the boundary cycle; every rim vertex must realize the same
    distance ``radius`` from the center (measured, not assumed).
    """
    interior = [v for v in range(surface.n_vertices) if v not in surface.boundary_vertices]
    if center is None:
        center = max(interior, key=lambda v: abs(surface.defect(v)))
    region = Region(surface, range(surface.n_faces))
    if len(region.boundary_cycles) != 1:
        raise SurfaceError("star", "not a disk")
    rim = [surface.vertex(f, (s + 2) % 3) for f, s in region.boundary_cycles[0]]
    cpt = SurfacePoint.vertex_point(surface, center)
    dists = []
    for v in rim:
        g = shortest_path(surface, cpt, SurfacePoint.vertex_point(surface, v))
        dists.append(g.length)
    if radius is None:
        radius = sum(dists) / len(dists)
    for v, dv in zip(rim, dists):
        if abs(dv - radius) > tol_match * max(1.0, radius):
            raise SurfaceError(
                "star", f"rim vertex {v} at distance {dv:g}, expected {radius:g}"
            )
    m = len(rim)
    theta = surface.cone_angle(center)
    cones = [
        (v, surface.defect(v), -1, shortest_path(surface, cpt, SurfacePoint.vertex_point(surface, v)).length)
        for v in interior
        if v != center and abs(surface.defect(v)) > surface.tol.tol_flat
    ]
    base = []
    for i in range(m):
        base.append(_rim_edge_length(surface, rim[i], rim[(i + 1) % m]))
    return Star(
        surface=surface,
        center=center,
        rim=rim,
        apex_angles=[theta / m] * m,
        radius=radius,
        base_lengths=base,
        wedge_faces=[],
        interior_cones=cones,
    )


def _rim_edge_length(surface, u, w):
    for (f, s) in surface.boundary_slots:
        a, b = surface.side_endpoints(f, s)
        if {a, b} == {u, w}:
            return surface.faces[f][s]
    # rim vertices joined through intermediate boundary vertices: sum later
    return math.nan
