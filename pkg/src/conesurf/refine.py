"""Mutable triangulated surface supporting conforming splits and cuts.

All refinement used by partitioning and flattening goes through this class:
edge splits propagate across the gluing (no T-junctions), cuts along traced
straight polylines become tagged mesh edges, and vertices carry stable labels
so callers can track points through the edits.  Retired faces keep a descent
record (child corners in the parent chart), so points located in an old
snapshot can be pushed down to the current mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConeSurface, SurfaceError, face_chart


def _rigid_between(src_pts, dst_pts):
    """Direct isometry taking src_pts[i] -> dst_pts[i] (two anchors)."""
    (a, b), (a2, b2) = dst_pts, src_pts
    ux, uy = b[0] - a[0], b[1] - a[1]
    vx, vy = b2[0] - a2[0], b2[1] - a2[1]
    nu, nv = math.hypot(ux, uy), math.hypot(vx, vy)
    ux, uy, vx, vy = ux / nu, uy / nu, vx / nv, vy / nv
    c = vx * ux + vy * uy
    s = vx * uy - vy * ux

    def apply(p):
        x, y = p[0] - a2[0], p[1] - a2[1]
        return (a[0] + c * x - s * y, a[1] + s * x + c * y)

    return apply


def _outside_score(tri, xy):
    """0 when xy is inside the triangle (list of three xy), else the worst
    negative barycentric coordinate."""
    (x0, y0), (x1, y1), (x2, y2) = tri
    den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    b0 = ((y1 - y2) * (xy[0] - x2) + (x2 - x1) * (xy[1] - y2)) / den
    b1 = ((y2 - y0) * (xy[0] - x2) + (x0 - x2) * (xy[1] - y2)) / den
    b2 = 1.0 - b0 - b1
    return max(0.0, -min(b0, b1, b2))


class EditableSurface:
    """Work-in-progress surface; freeze() yields a validated ConeSurface.

    Face ids are append-only: splitting retires the parent id and appends
    children, so traces taken on a snapshot stay aligned with live ids.
    """

    def __init__(self, tol=None):
        self.faces = []          # side-length triples; None when retired
        self.gluing = {}
        self.corner_vertex = {}  # (face, corner) -> vertex label
        self.n_labels = 0
        self.alive = set()
        self.edge_tags = {}      # slot -> tag for marked (cut) edges
        self.descent = {}        # retired face -> [(child, corners in my chart)]
        self._charts = {}
        self.tol = tol

    @staticmethod
    def from_surface(surface):
        e = EditableSurface(tol=surface.tol)
        for f in range(surface.n_faces):
            e.faces.append(tuple(surface.faces[f]))
            e.alive.add(f)
            for c in range(3):
                e.corner_vertex[(f, c)] = surface.vertex(f, c)
        e.gluing = dict(surface.gluing)
        e.n_labels = surface.n_vertices
        return e

    # -- low-level assembly -------------------------------------------------

    def new_label(self):
        self.n_labels += 1
        return self.n_labels - 1

    def add_face(self, lengths, labels):
        fid = len(self.faces)
        self.faces.append(tuple(float(x) for x in lengths))
        self.alive.add(fid)
        for c in range(3):
            self.corner_vertex[(fid, c)] = labels[c]
        return fid

    def glue(self, a, b):
        self.gluing[a] = b
        self.gluing[b] = a

    def unglue(self, a):
        b = self.gluing.pop(a, None)
        if b is not None:
            self.gluing.pop(b, None)
        return b

    def chart(self, f):
        ch = self._charts.get(f)
        if ch is None:
            ch = face_chart(self.faces[f])
            self._charts[f] = ch
        return ch

    def vertex_label(self, f, c):
        return self.corner_vertex[(f, c)]

    def corner_of(self, f, label):
        for c in range(3):
            if self.corner_vertex[(f, c)] == label:
                return c
        return None

    def faces_with_vertex(self, label):
        return sorted(
            f
            for f in self.alive
            if any(self.corner_vertex[(f, c)] == label for c in range(3))
        )

    def _retire(self, f, children):
        self.alive.discard(f)
        self.descent[f] = children
        self.faces[f] = self.faces[f]  # lengths kept for chart lookups

    # -- splits ---------------------------------------------------------------

    def split_edge(self, f, s, t, label=None, tag_inherit=True):
        """Split side s of face f (and its glued partner) at parameter t along
        the directed side (corner s+1 towards corner s+2).  Returns
        (vertex label, info) with info mapping (face, side) roles to slots."""
        if not (1e-12 < t < 1 - 1e-12):
            raise SurfaceError("split", f"degenerate split parameter {t}")
        partner = self.gluing.get((f, s))
        tags = set(self.edge_tags.pop((f, s), ()))
        if partner is not None:
            tags |= set(self.edge_tags.pop(partner, ()))
        label = self.new_label() if label is None else label
        info = {}
        a_piece, b_piece = self._split_one(f, s, t, label, info)
        if partner is not None:
            f2, s2 = partner
            a2_piece, b2_piece = self._split_one(f2, s2, 1.0 - t, label, info)
            self.unglue((f, s))
            self.glue(a_piece, b2_piece)
            self.glue(b_piece, a2_piece)
        if tags and tag_inherit:
            for slot in (a_piece, b_piece):
                self.edge_tags.setdefault(slot, set()).update(tags)
                other = self.gluing.get(slot)
                if other is not None:
                    self.edge_tags.setdefault(other, set()).update(tags)
        return label, info

    def _split_one(self, f, s, t, label, info):
        sides = self.faces[f]
        ch = self.chart(f)
        v_c, a_c, b_c = s, (s + 1) % 3, (s + 2) % 3
        V, A, B = (self.corner_vertex[(f, c)] for c in (v_c, a_c, b_c))
        m_xy = (1.0 - t) * ch[a_c] + t * ch[b_c]
        d = float(np.hypot(*(ch[v_c] - m_xy)))
        L = sides[s]
        fa = self.add_face((t * L, d, sides[b_c]), (V, A, label))
        fb = self.add_face(((1.0 - t) * L, sides[a_c], d), (V, label, B))
        for old_slot, new_slot in (((f, b_c), (fa, 2)), ((f, a_c), (fb, 1))):
            tags = set(self.edge_tags.pop(old_slot, ()))
            other = self.unglue(old_slot)
            if other is not None:
                self.glue(new_slot, other)
            if tags:
                self.edge_tags.setdefault(new_slot, set()).update(tags)
                if other is not None:
                    self.edge_tags.setdefault(other, set()).update(tags)
        self.glue((fa, 1), (fb, 2))
        mt = (float(m_xy[0]), float(m_xy[1]))
        pv = (float(ch[v_c][0]), float(ch[v_c][1]))
        pa = (float(ch[a_c][0]), float(ch[a_c][1]))
        pb = (float(ch[b_c][0]), float(ch[b_c][1]))
        self._retire(f, [(fa, (pv, pa, mt)), (fb, (pv, mt, pb))])
        info[(f, s, "faces")] = (fa, fb)
        info[(f, s, "new_vertex")] = label
        return (fa, 0), (fb, 0)

    def split_face(self, f, bary):
        """Insert an interior vertex; the face becomes three."""
        sides = self.faces[f]
        ch = self.chart(f)
        m_xy = bary[0] * ch[0] + bary[1] * ch[1] + bary[2] * ch[2]
        d = [float(np.hypot(*(ch[c] - m_xy))) for c in range(3)]
        label = self.new_label()
        labels = [self.corner_vertex[(f, c)] for c in range(3)]
        kids = []
        children = []
        mt = (float(m_xy[0]), float(m_xy[1]))
        for c in range(3):
            c1, c2 = (c + 1) % 3, (c + 2) % 3
            kid = self.add_face(
                (sides[c], d[c2], d[c1]), (label, labels[c1], labels[c2])
            )
            kids.append(kid)
            children.append(
                (
                    kid,
                    (
                        mt,
                        (float(ch[c1][0]), float(ch[c1][1])),
                        (float(ch[c2][0]), float(ch[c2][1])),
                    ),
                )
            )
            tags = set(self.edge_tags.pop((f, c), ()))
            other = self.unglue((f, c))
            if other is not None:
                self.glue((kid, 0), other)
            if tags:
                self.edge_tags.setdefault((kid, 0), set()).update(tags)
                if other is not None:
                    self.edge_tags.setdefault(other, set()).update(tags)
        for c in range(3):
            self.glue((kids[c], 1), (kids[(c + 1) % 3], 2))
        self._retire(f, children)
        return label, kids

    # -- point pushdown ----------------------------------------------------------

    def locate(self, face, xy, tol=1e-9):
        """Push a point given in the chart of ``face`` (possibly retired)
        down to (live_face, xy in its chart)."""
        xy = (float(xy[0]), float(xy[1]))
        guard = 0
        while face not in self.alive:
            kids = self.descent.get(face)
            if kids is None:
                raise SurfaceError("locate", f"face {face} has no descent record")
            best, best_score = None, math.inf
            for child, tri in kids:
                score = _outside_score(tri, xy)
                if score < best_score:
                    best, best_score = (child, tri), score
            if best is None or best_score > tol:
                raise SurfaceError("locate", "point escaped its face's children")
            child, tri = best
            ch = self.chart(child)
            move = _rigid_between(
                (tri[0], tri[1]),
                ((float(ch[0][0]), float(ch[0][1])), (float(ch[1][0]), float(ch[1][1]))),
            )
            xy = move(xy)
            face = child
            guard += 1
            if guard > 10000:
                raise SurfaceError("locate", "descent loop")
        return face, xy

    def bary_in(self, face, xy):
        (x0, y0), (x1, y1), (x2, y2) = self.chart(face)
        den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        b0 = ((y1 - y2) * (xy[0] - x2) + (x2 - x1) * (xy[1] - y2)) / den
        b1 = ((y2 - y0) * (xy[0] - x2) + (x0 - x2) * (xy[1] - y2)) / den
        b0 = min(1.0, max(0.0, b0))
        b1 = min(1.0, max(0.0, min(b1, 1.0 - b0)))
        return (b0, b1, max(0.0, 1.0 - b0 - b1))

    # -- cuts ----------------------------------------------------------------------

    def cut_chain(self, segments, start_label, tag, end_label=None, births=None,
                  snap_rel=1e-9):
        """Insert a traced straight polyline as tagged edges.

        ``segments``: list of (face, entry_xy, exit_xy) in the charts of a
        snapshot aligned with this surface's ids; the polyline starts at the
        existing vertex ``start_label``.  New vertices are recorded in
        ``births`` as label -> (edge tail label, head label, parameter).
        Returns (slots, end label)."""
        cut_slots = []
        current = start_label
        n = len(segments)
        for i, (f, p_in, p_out) in enumerate(segments):
            last = i == n - 1
            scale = max(self.faces[f]) if self.faces[f] else 1.0
            if math.hypot(p_out[0] - p_in[0], p_out[1] - p_in[1]) <= 1e-12 * scale:
                continue  # degenerate hop (grazing reconstruction artifact)
            live, exit_xy = self.locate(f, p_out)
            c = self.corner_of(live, current)
            if c is None:
                # the point pushdown may land in the sibling across the exit
                # edge; look for a live face holding both anchor and target
                live = self._face_with_anchor_near(current, f, p_out)
                _, exit_xy = self.locate_within(live, f, p_out)
                c = self.corner_of(live, current)
            if c is None:
                raise SurfaceError("cut", f"lost the cut anchor {current}")
            ch = self.chart(live)
            # exits landing on a corner of the live face follow the edge
            hit_corner = None
            for cc in range(3):
                d2 = math.hypot(ch[cc][0] - exit_xy[0], ch[cc][1] - exit_xy[1])
                if d2 <= snap_rel * max(self.faces[live]):
                    hit_corner = cc
                    break
            if hit_corner is not None:
                nxt = self.corner_vertex[(live, hit_corner)]
                if nxt != current:
                    slot = (live, 3 - c - hit_corner)
                    self._mark(slot, tag)
                    cut_slots.append(slot)
                    current = nxt
                continue
            a_c, b_c = (c + 1) % 3, (c + 2) % 3
            t = self._edge_param(ch[a_c], ch[b_c], exit_xy)
            L = self.faces[live][c]
            snap = snap_rel
            if t < snap or t > 1.0 - snap:
                corner = a_c if t < snap else b_c
                nxt = self.corner_vertex[(live, corner)]
                slot = (live, b_c if corner == a_c else a_c)
                self._mark(slot, tag)
                cut_slots.append(slot)
                current = nxt
            else:
                u_lbl = self.corner_vertex[(live, a_c)]
                w_lbl = self.corner_vertex[(live, b_c)]
                label, info = self.split_edge(live, c, t)
                if births is not None:
                    births[label] = (u_lbl, w_lbl, t)
                fa, fb = info[(live, c, "faces")]
                slot = (fa, 1)
                self._mark(slot, tag)
                cut_slots.append(slot)
                current = label
        return cut_slots, current

    def _face_with_anchor_near(self, label, face_hint, xy):
        best, best_score = None, math.inf
        for f in self.faces_with_vertex(label):
            try:
                _, local = self.locate_within(f, face_hint, xy)
            except SurfaceError:
                continue
            score = _outside_score(
                [tuple(p) for p in self.chart(f)], local
            )
            if score < best_score:
                best, best_score = f, score
        if best is None or best_score > 1e-7:
            raise SurfaceError("cut", "cut segment left the expected face")
        return best

    def locate_within(self, live_face, orig_face, xy):
        """Coordinates of ``xy`` (chart of orig_face) in live_face's chart,
        assuming live_face descends from orig_face."""
        # walk down, but force the path towards live_face
        path = []
        f = live_face
        seen = {live_face}
        parents = {}
        for parent, kids in self.descent.items():
            for child, tri in kids:
                parents[child] = (parent, tri)
        while f != orig_face:
            if f not in parents:
                raise SurfaceError("locate", "not a descendant")
            parent, tri = parents[f]
            path.append((f, tri))
            f = parent
            if f in seen or len(path) > 10000:
                raise SurfaceError("locate", "descent cycle")
            seen.add(f)
        for child, tri in reversed(path):
            ch = self.chart(child)
            move = _rigid_between(
                (tri[0], tri[1]),
                ((float(ch[0][0]), float(ch[0][1])), (float(ch[1][0]), float(ch[1][1]))),
            )
            xy = move(xy)
        return live_face, (float(xy[0]), float(xy[1]))

    def _mark(self, slot, tag):
        self.edge_tags.setdefault(slot, set()).add(tag)
        other = self.gluing.get(slot)
        if other is not None:
            self.edge_tags.setdefault(other, set()).add(tag)

    @staticmethod
    def _edge_param(a, b, p):
        ux, uy = b[0] - a[0], b[1] - a[1]
        den = ux * ux + uy * uy
        return ((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / den

    # -- freezing ---------------------------------------------------------------

    def freeze(self, allow_boundary=True, chi=None):
        """Validated ConeSurface plus id maps for live faces, vertex labels,
        and tagged edges."""
        order = sorted(self.alive)
        fmap = {f: i for i, f in enumerate(order)}
        faces = [self.faces[f] for f in order]
        gluing = {}
        for (f, s), (f2, s2) in self.gluing.items():
            if f in fmap and f2 in fmap:
                gluing[(fmap[f], s)] = (fmap[f2], s2)
        frozen = ConeSurface(
            faces, gluing, chi=chi, tol=self.tol, allow_boundary=allow_boundary
        )
        label_to_vid = {}
        for f, i in fmap.items():
            for c in range(3):
                lbl = self.corner_vertex[(f, c)]
                vid = frozen.vertex(i, c)
                prev = label_to_vid.get(lbl)
                if prev is not None and prev != vid:
                    raise SurfaceError(
                        "freeze", f"vertex label {lbl} split into {prev} and {vid}"
                    )
                label_to_vid[lbl] = vid
        tags = {}
        for (f, s), tagset in self.edge_tags.items():
            if f in fmap and tagset:
                tags[(fmap[f], s)] = set(tagset)
        return FrozenView(frozen, fmap, label_to_vid, tags)


@dataclass
class FrozenView:
    surface: ConeSurface
    face_map: dict      # editable live face id -> frozen face id
    label_map: dict     # vertex label -> frozen vertex id
    edge_tags: dict     # frozen slot -> tag

    @property
    def inverse_face_map(self):
        return {v: k for k, v in self.face_map.items()}
