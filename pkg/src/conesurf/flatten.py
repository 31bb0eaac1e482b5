"""Flattening of stars by flat-sector surgery.

The pipeline attaches a flat collar outside a star, removes positive
curvature by widening a system of flat sectors (polar maps (r, phi) ->
(r, a*phi) with a > 1), removes negative curvature by narrowing a second
system (a < 1), and develops the now-flat disk into the plane.  Every stage
keeps an exact piecewise description: isometric cells plus polar cells with
singular values {1, a}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TWO_PI, ConeSurface, Region, SurfaceError, curvature, face_chart
from .geodesics import (
    SurfacePoint,
    _apply,
    _apply_vec,
    _compose,
    _invert,
    _ID,
    angle_at_vertex,
    direction_at_vertex,
    shortest_path,
    trace_ray,
    unfold_transforms,
)
from .partition import Star
from .refine import EditableSurface


def _pipeline_tol(tol):
    """Sector surgery legitimately produces thin sliver triangles near the
    seams; relax only the triangle-margin guard for pipeline intermediates."""
    from dataclasses import replace

    base = tol or __import__("conesurf.core", fromlist=["DEFAULT_TOL"]).DEFAULT_TOL
    if base.eta_min <= 1e-12:
        return base
    return replace(base, eta_min=1e-12)


@dataclass(frozen=True)
class FlattenParams:
    """Scale choices for the flattening: star radius R0, concentration radii
    R and r, curvature smallness budget delta, and collar truncation Rmax.

    The invariants 10 * kappa * R < delta * R0 and r <= R / 10 keep the
    concentration region negligible next to the star.
    """

    R0: float
    R: float
    r: float
    delta: float
    Rmax: float
    kappa: float

    def __post_init__(self):
        if not (10.0 * self.kappa * self.R < self.delta * self.R0):
            raise SurfaceError(
                "flatten-params",
                f"10*kappa*R = {10 * self.kappa * self.R:g} must stay below "
                f"delta*R0 = {self.delta * self.R0:g}",
            )
        if self.r > self.R / 10.0 + 1e-15:
            raise SurfaceError("flatten-params", "need r <= R/10")
        if self.Rmax <= self.R0:
            raise SurfaceError("flatten-params", "need Rmax > R0")

    @staticmethod
    def for_class(cls_params, R0, delta=0.2, Rmax=None):
        kappa = cls_params.max_dilatation
        R = 0.9 * delta * R0 / (10.0 * kappa)
        return FlattenParams(
            R0=R0,
            R=R,
            r=R / 10.0,
            delta=delta,
            Rmax=Rmax if Rmax is not None else 1.5 * R0,
            kappa=kappa,
        )


@dataclass
class FlatSector:
    """A flat wedge at a cone point, described in the apex's fan coordinates."""

    apex: int            # vertex id on the stage surface
    theta0: float
    theta1: float
    base_crossings: int = 0

    @property
    def width(self):
        return self.theta1 - self.theta0


# -- collar attachment ---------------------------------------------------------


@dataclass
class AttachedStar:
    """Star with its flat collar: the disk the sector phases operate on.

    Star faces keep their ids; collar faces are appended.  ``rim`` are the
    old boundary vertices (flat after attachment), ``outer`` the new boundary
    vertices at the truncation.
    """

    surface: ConeSurface
    star: Star
    center: int
    rim: list
    outer: list
    star_faces: frozenset
    collar_faces: frozenset


def attach_flat_collar(star, Rmax):
    """Attach a flat strip outside every boundary edge, splitting each old
    boundary angle evenly between the two rays at its vertex, and truncate
    at ray length Rmax - R0.  Every old boundary vertex becomes flat."""
    surface = star.surface
    t_ray = Rmax - star.radius
    if t_ray <= 0:
        raise SurfaceError("collar", "Rmax must exceed the star radius")
    region = Region(surface, range(surface.n_faces))
    cycles = region.boundary_cycles
    if len(cycles) != 1:
        raise SurfaceError("collar", "star surface must be a disk")
    cycle = cycles[0]

    e = EditableSurface.from_surface(surface)
    e.tol = _pipeline_tol(surface.tol)
    # interior angle at each boundary vertex
    alpha = {v: surface.cone_angle(v) for v in surface.boundary_vertices}
    for v, a in alpha.items():
        if a >= TWO_PI - 1e-12:
            raise SurfaceError("collar", f"boundary vertex {v} is reflex beyond 2*pi")

    strips = []
    for f, s in cycle:
        u = surface.vertex(f, (s + 1) % 3)
        w = surface.vertex(f, (s + 2) % 3)
        L = surface.faces[f][s]
        rho_u = math.pi - alpha[u] / 2.0
        rho_w = math.pi - alpha[w] / 2.0
        if rho_u <= 0 or rho_w <= 0:
            raise SurfaceError("collar", f"base angle at least pi at edge ({f},{s})")
        du = (math.cos(rho_u), -math.sin(rho_u))
        dw = (-math.cos(rho_w), -math.sin(rho_w))
        # rays collide before truncation when u + tu*du = w + tw*dw has a
        # positive solution below the ray length
        denom = du[0] * dw[1] - du[1] * dw[0]
        if abs(denom) > 1e-14:
            tu = L * dw[1] / denom
            tw = L * du[1] / denom
            if tu > 0 and tw > 0 and min(tu, tw) < t_ray:
                raise SurfaceError(
                    "collar", f"strip rays collide before Rmax at edge ({f},{s})"
                )
        tip_u = (t_ray * du[0], t_ray * du[1])
        tip_w = (L + t_ray * dw[0], t_ray * dw[1])
        d_diag = math.hypot(tip_w[0], tip_w[1])
        d_outer = math.hypot(tip_w[0] - tip_u[0], tip_w[1] - tip_u[1])
        lbl_tip_u = e.new_label()
        lbl_tip_w = e.new_label()
        # f1 = (u, tip_u, tip_w), f2 = (u, tip_w, w)
        f1 = e.add_face((d_outer, d_diag, t_ray), (u, lbl_tip_u, lbl_tip_w))
        f2 = e.add_face((t_ray, L, d_diag), (u, lbl_tip_w, w))
        e.glue((f1, 1), (f2, 2))
        e.glue((f2, 1), (f, s))
        strips.append(((f, s), u, w, f1, f2, lbl_tip_u, lbl_tip_w))
    # glue consecutive strips along their shared vertex rays
    head_ray = {}
    tail_ray = {}
    for (slot, u, w, f1, f2, lu, lw) in strips:
        tail_ray[u] = (f1, 2, lu)
        head_ray[w] = (f2, 0, lw)
    tip_alias = {}
    for v in alpha:
        if v not in head_ray or v not in tail_ray:
            raise SurfaceError("collar", f"boundary vertex {v} missed a strip")
        fh, sh, lbl_h = head_ray[v]
        ft, st_, lbl_t = tail_ray[v]
        e.glue((fh, sh), (ft, st_))
        tip_alias[lbl_t] = lbl_h
    # unify tip labels shared by glued rays
    for (slot, u, w, f1, f2, lu, lw) in strips:
        for face in (f1, f2):
            for c in range(3):
                lbl = e.corner_vertex[(face, c)]
                while lbl in tip_alias:
                    lbl = tip_alias[lbl]
                e.corner_vertex[(face, c)] = lbl

    view = e.freeze(allow_boundary=True)
    out = view.surface
    center = view.label_map[star.center]
    rim = [view.label_map[v] for v in star.rim]
    tips = set()
    for (_, _, _, _, _, lu, lw) in strips:
        lbl = lu
        while lbl in tip_alias:
            lbl = tip_alias[lbl]
        tips.add(view.label_map[lbl])
        tips.add(view.label_map[lw])
    outer = sorted(tips)
    star_faces = frozenset(view.face_map[f] for f in range(surface.n_faces))
    collar_faces = frozenset(
        view.face_map[f] for f in view.face_map if f >= surface.n_faces
    )
    # old boundary vertices must now be flat
    for v in rim:
        if v in out.boundary_vertices:
            raise SurfaceError("collar", "rim vertex still on the boundary")
        if abs(out.defect(v)) > 1e-9:
            raise SurfaceError("collar", f"rim vertex {v} kept defect {out.defect(v):g}")
    return AttachedStar(
        surface=out,
        star=star,
        center=center,
        rim=rim,
        outer=outer,
        star_faces=star_faces,
        collar_faces=collar_faces,
    )


# -- sector carving -------------------------------------------------------------


def _hug_trace(frozen, apex_vid, theta, side):
    """Trace the boundary ray of a wedge from its apex: straight across flat
    territory, and through any cone point keeping an angle of exactly pi on
    the wedge side ('left' for the wedge's start ray, 'right' for its end).

    Returns (segments, end_kind) where segments are (face, entry, exit) in
    face charts and end_kind is "boundary" or "boundary-vertex".
    """
    from .geodesics import trace_from_vertex

    segments = []
    v, ang = apex_vid, theta
    for _hop in range(200):
        ray = trace_from_vertex(frozen, v, ang)
        segments.extend(ray.segments)
        if ray.end_reason == "boundary":
            return segments, "boundary"
        if ray.end_reason != "vertex":
            raise SurfaceError("sector", "ray ended inside the surface")
        v2 = ray.end_vertex
        if v2 in frozen.boundary_vertices:
            return segments, "boundary-vertex"
        beta = ray.end_direction_angle
        theta2 = frozen.cone_angle(v2)
        if side == "left":
            ang = (beta - math.pi) % theta2
        else:
            ang = (beta + math.pi) % theta2
        v = v2
    raise SurfaceError("sector", "hug trace exceeded the hop limit")


@dataclass
class _CarvedSector:
    sector: FlatSector
    faces: set                 # live editable face ids of the wedge
    dev: dict                  # live face id -> chart->wedge-plane transform
    ray_chains: list           # two lists of (label, radius from apex)
    outer_chain: list          # [(label_u, label_w, live slot)] in ccw order
    width: float
    base_tags: set


class _Carve:
    """Cut a surface along the rays of a sector system and develop each
    wedge.  The editable surface doubles as the point-pushdown structure for
    the stage map."""

    def __init__(self, surface, sectors, base_edges=None, protected=()):
        self.input = surface
        self.e = EditableSurface.from_surface(surface)
        self.e.tol = _pipeline_tol(surface.tol)
        self.births = {}
        if base_edges:
            for i, slot in enumerate(base_edges):
                self.e._mark(slot, ("base", i))
        self.protected = set(protected)
        self.carved = []
        self.failure = None
        claimed = {}
        for sid, sec in enumerate(sectors):
            try:
                carved = self._carve_one(sid, sec)
            except SurfaceError as err:
                self.failure = (sid, err)
                return
            for f in carved.faces:
                if f in claimed:
                    self.failure = (
                        sid,
                        SurfaceError("sector-overlap", "wedges claim a shared face"),
                    )
                    return
                claimed[f] = sid
            self.carved.append(carved)
        self.claimed = claimed

    def _carve_one(self, sid, sec):
        e = self.e
        view = e.freeze(allow_boundary=True)
        frozen = view.surface
        inv = view.inverse_face_map
        apex_vid = view.label_map[sec.apex]
        chains = []
        for j, (theta, side) in enumerate(
            ((sec.theta0, "left"), (sec.theta1, "right"))
        ):
            # refresh the snapshot after the first cut
            if j == 1:
                view = e.freeze(allow_boundary=True)
                frozen = view.surface
                inv = view.inverse_face_map
                apex_vid = view.label_map[sec.apex]
            segments, _ = _hug_trace(frozen, apex_vid, theta, side)
            steps = [(inv[f], p, q) for f, p, q in segments]
            slots, end = e.cut_chain(steps, sec.apex, (sid, j), births=self.births)
            chain = self._chain_of(slots, sec.apex)
            chains.append(chain)
        faces, width = self._collect_wedge(sid, sec)
        dev = self._develop(sid, sec, faces)
        outer = self._outer_chain(sid, faces, chains)
        base_tags = set()
        for f in faces:
            for s in range(3):
                for tag in e.edge_tags.get((f, s), ()):
                    if isinstance(tag, tuple) and tag[0] == "base":
                        base_tags.add(tag)
        # a flat wedge must contain no cone point or protected vertex strictly
        # inside; interior labels are those not on the wedge boundary
        self._check_flat_interior(sid, sec, faces)
        return _CarvedSector(
            sector=sec,
            faces=faces,
            dev=dev,
            ray_chains=chains,
            outer_chain=outer,
            width=width,
            base_tags=base_tags,
        )

    def _chain_of(self, slots, start_label):
        e = self.e
        chain = [(start_label, 0.0)]
        cur = start_label
        acc = 0.0
        for f, s in slots:
            u = e.corner_vertex[(f, (s + 1) % 3)]
            w = e.corner_vertex[(f, (s + 2) % 3)]
            nxt = w if u == cur else u
            acc += e.faces[f][s]
            chain.append((nxt, acc))
            cur = nxt
        return chain

    def _collect_wedge(self, sid, sec):
        e = self.e
        # find the corner slots of the apex between the two tagged rays
        start = None
        for f in e.faces_with_vertex(sec.apex):
            c = e.corner_of(f, sec.apex)
            if (sid, 0) in e.edge_tags.get((f, (c + 2) % 3), ()):
                start = (f, c)
                break
        if start is None:
            raise SurfaceError("sector", "start ray edge not found at the apex")
        seeds = []
        width = 0.0
        f, c = start
        guard = 0
        while True:
            seeds.append(f)
            ang = _corner_angle(e, f, c)
            width += ang
            cross = (f, (c + 1) % 3)
            if (sid, 1) in e.edge_tags.get(cross, ()):
                break
            g = e.gluing.get(cross)
            if g is None:
                raise SurfaceError("sector", "wedge fan reached the boundary")
            f2, s2 = g
            f, c = f2, (s2 + 1) % 3
            guard += 1
            if guard > 10000:
                raise SurfaceError("sector", "wedge fan walk ran away")
        if abs(width - sec.width) > 1e-7:
            raise SurfaceError(
                "sector", f"carved width {width:g} differs from requested {sec.width:g}"
            )
        barriers = set()
        for slot, tags in e.edge_tags.items():
            if (sid, 0) in tags or (sid, 1) in tags:
                barriers.add(slot)
        faces = set()
        from .partition import _flood

        for seed in seeds:
            if seed not in faces:
                faces |= _flood(e, e.alive, barriers, seed)
        return faces, width

    def _develop(self, sid, sec, faces):
        e = self.e
        # anchor: apex at origin, the start-ray edge along the +x axis
        start = None
        for f in faces:
            c = e.corner_of(f, sec.apex)
            if c is None:
                continue
            if (sid, 0) in e.edge_tags.get((f, (c + 2) % 3), ()):
                start = (f, c)
                break
        if start is None:
            raise SurfaceError("sector", "development anchor not found")
        f0, c0 = start
        ch = e.chart(f0)
        apex_xy = (float(ch[c0][0]), float(ch[c0][1]))
        nxt = (float(ch[(c0 + 1) % 3][0]), float(ch[(c0 + 1) % 3][1]))
        ux, uy = nxt[0] - apex_xy[0], nxt[1] - apex_xy[1]
        n = math.hypot(ux, uy)
        cth, sth = ux / n, uy / n
        # T maps chart -> plane with apex at 0 and that edge along +x
        rot = (cth, -sth)
        T0 = (
            rot[0],
            rot[1],
            -(rot[0] * apex_xy[0] - rot[1] * apex_xy[1]),
            -(rot[1] * apex_xy[0] + rot[0] * apex_xy[1]),
        )
        dev = {f0: T0}
        stack = [f0]
        while stack:
            f = stack.pop()
            T = dev[f]
            for s in range(3):
                g = e.gluing.get((f, s))
                if g is None or g[0] not in faces or g[0] in dev:
                    continue
                M = _unfold_editable(e, f, s)
                dev[g[0]] = _compose(T, M)
                stack.append(g[0])
        if set(dev) != set(faces):
            raise SurfaceError("sector", "wedge development is disconnected")
        return dev

    def _outer_chain(self, sid, faces, chains):
        e = self.e
        boundary = []
        for f in faces:
            for s in range(3):
                if e.gluing.get((f, s)) is None:
                    boundary.append((f, s))
        # order the outer boundary from the far end of ray 0 to ray 1
        start_lbl = chains[0][-1][0]
        end_lbl = chains[1][-1][0]
        by_tail = {}
        for f, s in boundary:
            u = e.corner_vertex[(f, (s + 1) % 3)]
            by_tail[u] = (f, s)
        out = []
        cur = start_lbl
        guard = 0
        while cur != end_lbl:
            slot = by_tail.get(cur)
            if slot is None:
                raise SurfaceError("sector", "outer boundary chain broke")
            f, s = slot
            w = e.corner_vertex[(f, (s + 2) % 3)]
            out.append((cur, w, slot))
            cur = w
            guard += 1
            if guard > 100000:
                raise SurfaceError("sector", "outer boundary walk ran away")
        return out

    def _check_flat_interior(self, sid, sec, faces):
        e = self.e
        boundary_labels = set()
        for f in faces:
            for s in range(3):
                g = e.gluing.get((f, s))
                if g is None or g[0] not in faces:
                    boundary_labels.add(e.corner_vertex[(f, (s + 1) % 3)])
                    boundary_labels.add(e.corner_vertex[(f, (s + 2) % 3)])
        interior = {
            e.corner_vertex[(f, c)] for f in faces for c in range(3)
        } - boundary_labels
        if not interior:
            return
        view = e.freeze(allow_boundary=True)
        for lbl in interior:
            vid = view.label_map[lbl]
            if vid in view.surface.boundary_vertices:
                continue
            if abs(view.surface.defect(vid)) > 1e-9:
                raise SurfaceError(
                    "sector-flat", f"wedge of sector {sid} swallows cone point {lbl}"
                )
            if lbl in self.protected:
                raise SurfaceError(
                    "sector-flat", f"wedge of sector {sid} contains protected vertex {lbl}"
                )


def _corner_angle(e, f, c):
    from .core import corner_angles

    eta = e.tol.eta_min if e.tol is not None else 1e-12
    return corner_angles(e.faces[f], eta)[c]


def _unfold_editable(e, f, s):
    """Transform placing the neighbor of (f, s) across that side, in the
    editable surface's charts."""
    f2, s2 = e.gluing[(f, s)]
    ch = e.chart(f)
    ch2 = e.chart(f2)
    a = ch[(s + 1) % 3]
    b = ch[(s + 2) % 3]
    a2 = ch2[(s2 + 2) % 3]
    b2 = ch2[(s2 + 1) % 3]
    u = (b[0] - a[0], b[1] - a[1])
    u2 = (b2[0] - a2[0], b2[1] - a2[1])
    nu, nu2 = math.hypot(*u), math.hypot(*u2)
    ux, uy = u[0] / nu, u[1] / nu
    vx, vy = u2[0] / nu2, u2[1] / nu2
    c = vx * ux + vy * uy
    sn = vx * uy - vy * ux
    return (c, sn, a[0] - (c * a2[0] - sn * a2[1]), a[1] - (sn * a2[0] + c * a2[1]))


# -- sector selection ------------------------------------------------------------


def _interior_cones(surface):
    out = []
    for v in range(surface.n_vertices):
        if v in surface.boundary_vertices:
            continue
        w = surface.defect(v)
        if abs(w) > surface.tol.tol_flat:
            out.append((v, w))
    return out


def sector_budgets(surface, sign):
    """Per-apex total sector width prescribed for curvature removal: widening
    by 2*pi/(2*pi - w+) needs (2*pi - w+)/w+ * defect(O) of flat angle at O;
    narrowing mirrors it with 2*pi + w-."""
    cones = _interior_cones(surface)
    if sign == "positive":
        apexes = [(v, w) for v, w in cones if w > 0]
        total = sum(w for _, w in apexes)
        if total >= TWO_PI:
            raise SurfaceError("sector-budget", "positive curvature at least 2*pi")
        return {v: (TWO_PI - total) / total * w for v, w in apexes}, total
    apexes = [(v, -w) for v, w in cones if w < 0]
    total = sum(w for _, w in apexes)
    return {v: (TWO_PI + total) / total * w for v, w in apexes}, total


def select_flat_sectors(
    surface,
    sign,
    params=None,
    center=None,
    base_edges=None,
    boundary_marks=(),
    max_splits=12,
    width_cap=math.pi / 4,
):
    """Choose a system of flat sectors whose widths at each apex sum to the
    curvature-removal budget.

    Full-budget apexes get the complete fan split at their incident edges;
    partial budgets place wedges centered in the incident corners.  The
    system is validated by carving (flat interiors, disjointness, at most
    one base crossing each); failures halve the widths and retry.
    """
    budgets, total = sector_budgets(surface, sign)
    if not budgets:
        return []
    protected = {center} if center is not None else set()
    halvings = 0
    splits = 1
    while True:
        sectors = []
        for apex, budget in sorted(budgets.items()):
            theta = surface.cone_angle(apex)
            if budget > theta + 1e-9:
                raise SurfaceError(
                    "sector-budget",
                    f"budget {budget:g} exceeds cone angle {theta:g} at vertex {apex}",
                )
            fan = surface.corner_fan(apex)
            slices = []
            acc = 0.0
            for f, c in fan:
                a = float(surface.angles[f, c])
                slices.append((acc, a))
                acc += a
            if budget >= theta - 1e-9:
                sectors.extend(
                    _full_fan_sectors(
                        surface, apex, fan, protected | set(boundary_marks),
                        width_cap / splits,
                    )
                )
            else:
                remaining = budget
                cap = width_cap / splits
                guard = 0
                while remaining > 1e-12:
                    placed = False
                    for start, width in slices:
                        margin = 0.05 * width
                        room = width - 2 * margin
                        if room <= 1e-9:
                            continue
                        w_here = min(cap, room, remaining)
                        mid = start + width / 2.0
                        sectors.append(
                            FlatSector(apex, mid - w_here / 2.0, mid + w_here / 2.0)
                        )
                        remaining -= w_here
                        placed = True
                        if remaining <= 1e-12:
                            break
                    guard += 1
                    if not placed or guard > 64:
                        raise SurfaceError(
                            "sector-budget",
                            f"could not place width {remaining:g} at vertex {apex}",
                        )
                # merge-avoid: overlapping wedges in one slice are illegal;
                # re-spread evenly when several landed in the same slice
                sectors = _respread(sectors, apex, slices, budget, cap)
        carve = _Carve(surface, sectors, base_edges=base_edges, protected=protected)
        if carve.failure is None:
            bad = [c for c in carve.carved if len(c.base_tags) > 1]
            if not bad:
                return sectors
        halvings += 1
        splits *= 2
        if halvings > max_splits:
            sid, err = carve.failure if carve.failure else (None, None)
            raise SurfaceError(
                "sector-splits",
                f"no valid sector system after {max_splits} halvings: {err}",
            )


def _full_fan_sectors(surface, apex, fan, protected, cap):
    """Partition the whole fan at an apex into sectors: boundaries are forced
    at edges pointing to cone points or protected vertices, micro corner
    slivers merge into their neighbors, and widths stay within the cap."""
    n = len(fan)
    widths = [float(surface.angles[f, c]) for f, c in fan]
    mandatory = []
    for k, (f, c) in enumerate(fan):
        u = surface.vertex(f, (c + 1) % 3)
        bad = u in protected
        if not bad and u not in surface.boundary_vertices:
            bad = abs(surface.defect(u)) > surface.tol.tol_flat
        mandatory.append(bad)
    start = next((k for k in range(n) if mandatory[k]), 0)
    order = [(start + i) % n for i in range(n)]
    w_min = 1e-4
    cap = max(cap, 4 * w_min)
    groups = []
    cur = []
    curw = 0.0
    for idx in order:
        boundary_here = mandatory[idx] and cur
        if boundary_here or (cur and curw + widths[idx] > cap):
            groups.append((cur, curw, bool(mandatory[cur[0]])))
            cur, curw = [], 0.0
        cur.append(idx)
        curw += widths[idx]
    groups.append((cur, curw, bool(mandatory[cur[0]])))
    # merge micro groups into a neighbor not separated by a mandatory edge
    merged = []
    for grp in groups:
        if merged and grp[1] < w_min and not grp[2]:
            prev = merged.pop()
            merged.append((prev[0] + grp[0], prev[1] + grp[1], prev[2]))
        else:
            merged.append(grp)
    if len(merged) > 1 and merged[0][1] < w_min:
        first = merged.pop(0)
        if not merged[0][2]:
            nxt = merged.pop(0)
            merged.insert(0, (first[0] + nxt[0], first[1] + nxt[1], first[2]))
        else:
            merged.insert(0, first)
    cum = [0.0]
    for w in widths:
        cum.append(cum[-1] + w)
    out = []
    for idxs, w, _m in merged:
        if w < 1e-9:
            raise SurfaceError(
                "sector", f"unmergeable zero-width fan group at vertex {apex}"
            )
        theta0 = cum[_fan_pos(order, idxs[0])] if False else None
        # group indices are contiguous in fan order starting at idxs[0]
        k0 = idxs[0]
        theta0 = cum[k0]
        out.append(FlatSector(apex, theta0, theta0 + w))
    return out


def _fan_pos(order, idx):
    return order.index(idx)


def _respread(sectors, apex, slices, budget, cap):
    """Rebuild this apex's wedges so that each slice holds at most one, with
    widths proportional to slice room, summing exactly to the budget."""
    others = [s for s in sectors if s.apex != apex]
    rooms = []
    for start, width in slices:
        margin = 0.05 * width
        rooms.append(max(0.0, min(width - 2 * margin, cap)))
    room_total = sum(rooms)
    if room_total < budget - 1e-9:
        raise SurfaceError(
            "sector-budget", f"apex {apex}: available width {room_total:g} below budget"
        )
    scale = budget / room_total
    out = []
    used = 0.0
    for (start, width), room in zip(slices, rooms):
        if room <= 0:
            continue
        w_here = room * scale
        mid = start + width / 2.0
        out.append(FlatSector(apex, mid - w_here / 2.0, mid + w_here / 2.0))
        used += w_here
    # absorb rounding into the widest wedge
    if out:
        diff = budget - used
        widest = max(range(len(out)), key=lambda i: out[i].width)
        s = out[widest]
        out[widest] = FlatSector(s.apex, s.theta0 - diff / 2, s.theta1 + diff / 2)
    return others + out


# -- the stretch -----------------------------------------------------------------


@dataclass
class StageMap:
    """Piecewise map of one stretch stage: isometric on the complement,
    polar (r, phi) -> (r, a*phi) on each sector wedge."""

    source: ConeSurface
    target: ConeSurface
    a: float
    carve: object
    complement_map: dict
    wedge_sector: dict
    sector_fans: list       # per sector: [(target face, chart->plane transform)]
    sector_meta: list       # per sector: dict with apex label, width, budget share
    births: dict = field(default_factory=dict)
    label_of_vid: dict = field(default_factory=dict)

    def boundary_arc(self, vid, resolver):
        """Resolve a target boundary vertex to {side: arc} candidates through
        this stage: new vertices interpolate their parents, old ones defer to
        the previous stage's resolver."""
        label = self.label_of_vid[vid]

        def rec(lbl):
            if lbl in self.births:
                u, w, t = self.births[lbl]
                au = rec(u)
                aw = rec(w)
                common = set(au) & set(aw)
                if not common:
                    raise SurfaceError("boundary-arc", "parents on different sides")
                return {s: au[s] + t * (aw[s] - au[s]) for s in common}
            return resolver(lbl)

        return rec(label)

    def push(self, pt):
        """Image of a source point; None when it lands in the trimmed fringe."""
        e = self.carve.e
        xy = pt.position(self.source)
        live, xy2 = e.locate(pt.face, xy)
        if live in self.complement_map:
            tf = self.complement_map[live]
            b = e.bary_in(live, xy2)
            return SurfacePoint(tf, b)
        sid = self.wedge_sector.get(live)
        if sid is None:
            return None
        T = self.carve.carved[sid].dev[live]
        w = _apply(T, xy2)
        r = math.hypot(w[0], w[1])
        phi = math.atan2(w[1], w[0]) % TWO_PI
        sp = (r * math.cos(self.a * phi), r * math.sin(self.a * phi))
        best, best_score = None, math.inf
        for tf, Tf in self.sector_fans[sid]:
            local = _apply(_invert(Tf), sp)
            b = _bary_clip(self.target.charts[tf], local)
            score = b[3]
            if score < best_score:
                best, best_score = (tf, b[:3]), score
        if best is None or best_score > 1e-7:
            return None
        return SurfacePoint(best[0], best[1])

    def jacobian(self, pt):
        """Exact differential at a source point in its cell's orthonormal
        frames; None in the fringe."""
        e = self.carve.e
        xy = pt.position(self.source)
        live, xy2 = e.locate(pt.face, xy)
        if live in self.complement_map:
            return np.eye(2)
        sid = self.wedge_sector.get(live)
        if sid is None:
            return None
        T = self.carve.carved[sid].dev[live]
        w = _apply(T, xy2)
        phi = math.atan2(w[1], w[0])
        a = self.a
        rot_out = np.array(
            [
                [math.cos(a * phi), -math.sin(a * phi)],
                [math.sin(a * phi), math.cos(a * phi)],
            ]
        )
        rot_in = np.array(
            [
                [math.cos(phi), math.sin(phi)],
                [-math.sin(phi), math.cos(phi)],
            ]
        )
        return rot_out @ np.diag([1.0, a]) @ rot_in

    def cells(self):
        out = []
        for live, tf in sorted(self.complement_map.items()):
            out.append({"type": "affine", "face": int(tf), "singular_values": [1.0, 1.0]})
        for sid, fan in enumerate(self.sector_fans):
            meta = self.sector_meta[sid]
            out.append(
                {
                    "type": "polar",
                    "apex": int(meta["apex"]),
                    "factor": float(self.a),
                    "width": float(meta["width"]),
                    "faces": [int(tf) for tf, _ in fan],
                    "singular_values": sorted([1.0, float(self.a)]),
                }
            )
        return out

    @property
    def max_stretch(self):
        return max(1.0, self.a)

    @property
    def max_contract(self):
        return max(1.0, 1.0 / self.a)


def _bary_clip(chart, p):
    (x0, y0), (x1, y1), (x2, y2) = chart
    den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    b0 = ((y1 - y2) * (p[0] - x2) + (x2 - x1) * (p[1] - y2)) / den
    b1 = ((y2 - y0) * (p[0] - x2) + (x0 - x2) * (p[1] - y2)) / den
    b2 = 1.0 - b0 - b1
    score = max(0.0, -min(b0, b1, b2))
    b0c = min(1.0, max(0.0, b0))
    b1c = min(1.0, max(0.0, min(b1, 1.0 - b0c)))
    return (b0c, b1c, max(0.0, 1.0 - b0c - b1c), score)


def stretch_sectors(surface, sectors, a, base_edges=None, protected=(), samples_per_edge=24):
    """Pull every sector through (r, phi) -> (r, a*phi) and re-mesh.

    Complement faces are copied unchanged; each wedge is replaced by a fan
    over a sampled image of its outer boundary (the image of a straight chord
    under the angular stretch is curved, so the far fringe is approximated at
    ``samples_per_edge`` resolution; all interior geometry is exact).
    Returns (surface, StageMap).
    """
    if a <= 0:
        raise SurfaceError("stretch", "stretch factor must be positive")
    carve = _Carve(surface, sectors, base_edges=base_edges, protected=protected)
    if carve.failure is not None:
        raise carve.failure[1]
    e = carve.e
    out = EditableSurface(tol=_pipeline_tol(surface.tol))
    out.n_labels = e.n_labels

    wedge_sector = {}
    for sid, c in enumerate(carve.carved):
        for f in c.faces:
            wedge_sector[f] = sid

    complement_map = {}
    for f in sorted(e.alive):
        if f in wedge_sector:
            continue
        nf = out.add_face(e.faces[f], [e.corner_vertex[(f, c)] for c in range(3)])
        complement_map[f] = nf
    for f, nf in complement_map.items():
        for s in range(3):
            g = e.gluing.get((f, s))
            if g is None:
                continue
            if g[0] in complement_map and (nf, s) not in out.gluing:
                out.glue((nf, s), (complement_map[g[0]], g[1]))

    seam = {}

    def register(slot, u, w):
        seam.setdefault(frozenset((u, w)), []).append(slot)

    # complement copies of ray-cut edges stay open until the seams close them
    for f, nf in complement_map.items():
        for s in range(3):
            tags = e.edge_tags.get((f, s), ())
            if not any(isinstance(t, tuple) and isinstance(t[0], int) for t in tags):
                continue
            if (nf, s) in out.gluing:
                continue
            u = e.corner_vertex[(f, (s + 1) % 3)]
            w = e.corner_vertex[(f, (s + 2) % 3)]
            register((nf, s), u, w)

    sector_fans = []
    sector_meta = []
    births = dict(carve.births)
    for sid, c in enumerate(carve.carved):
        fan_faces = _build_stretched_fan(out, e, c, a, samples_per_edge, births=births)
        sector_fans.append(fan_faces)
        sector_meta.append(
            {"apex": c.sector.apex, "width": c.width, "theta0": c.sector.theta0}
        )
        for j, chain in enumerate(c.ray_chains):
            for slot, u, w in _split_fan_seam(out, c, j, chain, fan_faces):
                register(slot, u, w)

    for key, slots in sorted(seam.items(), key=lambda kv: sorted(kv[0])):
        if len(slots) != 2:
            raise SurfaceError(
                "stretch", f"seam between {sorted(key)} has {len(slots)} sides"
            )
        out.glue(slots[0], slots[1])

    view = out.freeze(allow_boundary=True)
    target = view.surface
    fans_frozen = []
    for fan in sector_fans:
        expanded = []
        for tf, T in fan:
            expanded.extend(_expand_to_live(out, tf, T))
        fans_frozen.append([(view.face_map[tf], T) for tf, T in expanded])
    comp_frozen = {f: view.face_map[nf] for f, nf in complement_map.items()}
    stage = StageMap(
        source=surface,
        target=target,
        a=a,
        carve=carve,
        complement_map=comp_frozen,
        wedge_sector=wedge_sector,
        sector_fans=fans_frozen,
        sector_meta=sector_meta,
        births=births,
        label_of_vid={vid: lbl for lbl, vid in view.label_map.items()},
    )
    return target, stage


def _build_stretched_fan(out, e, carved, a, samples_per_edge, births=None):
    """Fan triangulation of the stretched wedge; returns [(face id in ``out``,
    chart -> stretched-plane transform)].

    Sample vertices interpolating an outer edge (lu, lw) at parameter t are
    recorded in ``births`` for boundary bookkeeping.
    """
    apex = carved.sector.apex
    chain_pts = []
    for (lu, lw, slot) in carved.outer_chain:
        f, s = slot
        T = carved.dev[f]
        ch = e.chart(f)
        p = _apply(T, ch[(s + 1) % 3])
        q = _apply(T, ch[(s + 2) % 3])
        chain_pts.append((lu, lw, p, q))
    named = []
    for idx, (lu, lw, p, q) in enumerate(chain_pts):
        if idx == 0:
            named.append((lu, _stretch_pt(p, a)))
        # resolution follows the angular span: the image of a chord bends by
        # O(span^2), so short-span pieces need no extra samples
        span = abs(math.atan2(q[1], q[0]) - math.atan2(p[1], p[0]))
        k_here = min(samples_per_edge, max(1, int(math.ceil(span / 0.02))))
        for k in range(1, k_here):
            t = k / k_here
            x = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            lbl = out.new_label()
            if births is not None:
                births[lbl] = (lu, lw, t)
            named.append((lbl, _stretch_pt(x, a)))
        named.append((lw, _stretch_pt(q, a)))
    fan = []
    for (l0, p0), (l1, p1) in zip(named, named[1:]):
        r0 = math.hypot(*p0)
        r1 = math.hypot(*p1)
        base = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
        fid = out.add_face((base, r1, r0), (apex, l0, l1))
        ch = out.chart(fid)
        T = _anchor_transform(
            ((float(ch[0][0]), float(ch[0][1])), (float(ch[1][0]), float(ch[1][1]))),
            ((0.0, 0.0), p0),
        )
        fan.append((fid, T))
    for (fa, _), (fb, _) in zip(fan, fan[1:]):
        out.glue((fa, 1), (fb, 2))
    return fan


def _stretch_pt(p, a):
    r = math.hypot(*p)
    phi = math.atan2(p[1], p[0])
    if phi < 0.0:
        if phi < -1e-6:
            raise SurfaceError("stretch", "wedge development left the upper sheet")
        phi = 0.0
    return (r * math.cos(a * phi), r * math.sin(a * phi))


def _anchor_transform(src, dst):
    (a, b), (a2, b2) = src, dst
    ux, uy = b2[0] - a2[0], b2[1] - a2[1]
    vx, vy = b[0] - a[0], b[1] - a[1]
    nu, nv = math.hypot(ux, uy), math.hypot(vx, vy)
    ux, uy, vx, vy = ux / nu, uy / nu, vx / nv, vy / nv
    c = vx * ux + vy * uy
    s = vx * uy - vy * ux
    return (c, s, a2[0] - (c * a[0] - s * a[1]), a2[1] - (s * a[0] + c * a[1]))


def _split_fan_seam(out, carved, j, chain, fan_faces):
    """Split the fan's extreme radial side at the ray chain's interior radii;
    returns [(open slot, label u, label w)] ready for seam gluing."""
    apex = carved.sector.apex
    if j == 0:
        cur = (fan_faces[0][0], 2)   # apex -> first sample
        order = chain[1:-1]
    else:
        cur = (fan_faces[-1][0], 1)  # last sample -> apex
        order = list(reversed(chain[1:-1]))
    pieces = []
    for lbl, r in order:
        f, s = cur
        u = out.corner_vertex[(f, (s + 1) % 3)]
        w = out.corner_vertex[(f, (s + 2) % 3)]
        pu = _radius_of_label(chain, u, apex)
        pw = _radius_of_label(chain, w, apex)
        if pu is None or pw is None:
            raise SurfaceError("stretch", "seam split lost its radius anchors")
        t = (r - pu) / (pw - pu)
        _, info = out.split_edge(f, s, t, label=lbl)
        fa, fb = info[(f, s, "faces")]
        pieces.append((fa, 0))
        cur = (fb, 0)
    pieces.append(cur)
    result = []
    for f, s in pieces:
        u = out.corner_vertex[(f, (s + 1) % 3)]
        w = out.corner_vertex[(f, (s + 2) % 3)]
        result.append(((f, s), u, w))
    return result


def _radius_of_label(chain, lbl, apex):
    if lbl == apex:
        return 0.0
    for l, r in chain:
        if l == lbl:
            return r
    return None


def _expand_to_live(out, f, T):
    """Replace a possibly-retired fan face by its live descendants, composing
    each child's chart-to-parent placement onto the plane transform."""
    if f in out.alive:
        return [(f, T)]
    result = []
    for child, tri in out.descent[f]:
        ch = out.chart(child)
        Mc = _anchor_transform(
            ((float(ch[0][0]), float(ch[0][1])), (float(ch[1][0]), float(ch[1][1]))),
            (tri[0], tri[1]),
        )
        result.extend(_expand_to_live(out, child, _compose(T, Mc)))
    return result


# -- planar development -----------------------------------------------------------


@dataclass
class Development:
    """Isometric layout of a flat disk surface in the plane."""

    surface: ConeSurface
    transforms: dict
    closure_residual: float

    def position(self, pt):
        T = self.transforms[pt.face]
        return _apply(T, pt.position(self.surface))

    def face_polygon(self, f):
        T = self.transforms[f]
        return [tuple(_apply(T, self.surface.charts[f][c])) for c in range(3)]

    def bounds(self):
        xs, ys = [], []
        for f in range(self.surface.n_faces):
            for x, y in self.face_polygon(f):
                xs.append(x)
                ys.append(y)
        return min(xs), min(ys), max(xs), max(ys)


def develop_surface(surface, seed=0):
    """Lay a flat disk out in the plane; the closure residual reports the
    worst mismatch across non-tree edges."""
    table = unfold_transforms(surface)
    transforms = {seed: _ID}
    order = [seed]
    stack = [seed]
    while stack:
        f = stack.pop()
        T = transforms[f]
        for s in range(3):
            entry = table.get((f, s))
            if entry is None:
                continue
            (f2, _s2), M = entry
            if f2 in transforms:
                continue
            transforms[f2] = _compose(T, M)
            stack.append(f2)
    if len(transforms) != surface.n_faces:
        raise SurfaceError("develop", "surface is not connected")
    residual = 0.0
    for (f, s), (f2, s2) in surface.gluing.items():
        if f > f2:
            continue
        pa = _apply(transforms[f], surface.charts[f][(s + 1) % 3])
        pb = _apply(transforms[f2], surface.charts[f2][(s2 + 2) % 3])
        residual = max(residual, math.hypot(pa[0] - pb[0], pa[1] - pb[1]))
    return Development(surface, transforms, residual)


# -- composed piecewise maps --------------------------------------------------------


@dataclass
class PLMap:
    """Composition of stretch stages followed by a planar development.

    ``evaluate`` returns plane coordinates (None for points trimmed at the
    sampled fringe); ``jacobian`` the exact differential through the stage
    chain.  The guaranteed bounds multiply the stagewise singular values.
    """

    source: ConeSurface
    stages: list
    development: Development

    def push_to_final(self, pt):
        cur = pt
        for st in self.stages:
            cur = st.push(cur)
            if cur is None:
                return None
        return cur

    def evaluate(self, pt):
        cur = self.push_to_final(pt)
        if cur is None:
            return None
        return self.development.position(cur)

    def jacobian(self, pt):
        J = np.eye(2)
        cur = pt
        for st in self.stages:
            Jst = st.jacobian(cur)
            if Jst is None:
                return None
            J = Jst @ J
            cur = st.push(cur)
            if cur is None:
                return None
        return J

    @property
    def guaranteed_expansion(self):
        out = 1.0
        for st in self.stages:
            out *= st.max_stretch
        return out

    @property
    def guaranteed_contraction(self):
        out = 1.0
        for st in self.stages:
            out *= st.max_contract
        return out

    @property
    def guaranteed_bound(self):
        return self.guaranteed_expansion * self.guaranteed_contraction

    def cells(self):
        return [st.cells() for st in self.stages]

    def to_doc(self):
        return {
            "stages": [
                {
                    "factor": float(st.a),
                    "cells": st.cells(),
                }
                for st in self.stages
            ],
            "guaranteed_expansion": float(self.guaranteed_expansion),
            "guaranteed_contraction": float(self.guaranteed_contraction),
            "guaranteed_bound": float(self.guaranteed_bound),
        }


# -- the full star pipeline -----------------------------------------------------------


@dataclass
class FlattenResult:
    star: Star
    attached: AttachedStar
    params: FlattenParams
    surface: ConeSurface        # final flat disk
    development: Development
    plmap: PLMap
    report: dict


def flatten_star(star, params, cls=None, samples_per_edge=24):
    """Flatten a star: attach the collar, widen sectors at positive cone
    points, narrow sectors at negative ones, and develop the flat result.

    Requires the star's curvature away from the center to sit inside the
    concentration disk D(center, r)."""
    stray = 0.0
    for v, defect, _w, dist in star.interior_cones:
        if dist > params.r:
            stray += abs(defect)
    if stray >= params.delta:
        raise SurfaceError(
            "concentration",
            f"curvature {stray:g} outside D(center, r) exceeds delta {params.delta:g}",
        )
    att = attach_flat_collar(star, params.Rmax)
    base_edges = [
        (f, s)
        for f in att.star_faces
        for s in range(3)
        if att.surface.gluing.get((f, s), (None,))[0] in att.collar_faces
    ]

    stages = []
    current = att.surface
    center = att.center
    rim_cur = list(att.rim)
    report = {"phases": []}
    for sign in ("positive", "negative"):
        budgets, total = sector_budgets(current, sign)
        if not budgets:
            report["phases"].append({"sign": sign, "skipped": True})
            continue
        if sign == "positive":
            a = TWO_PI / (TWO_PI - total)
        else:
            a = TWO_PI / (TWO_PI + total)
        secs = select_flat_sectors(
            current,
            sign,
            center=center,
            base_edges=base_edges if not stages else None,
            boundary_marks=rim_cur,
        )
        current, stage = stretch_sectors(
            current,
            secs,
            a,
            base_edges=base_edges if not stages else None,
            protected=[center],
            samples_per_edge=samples_per_edge,
        )
        stages.append(stage)
        report["phases"].append(
            {
                "sign": sign,
                "removed": float(total),
                "factor": float(a),
                "sectors": len(secs),
            }
        )
        center_pt = stage.push(SurfacePoint.vertex_point(stage.source, center))
        if center_pt is None:
            raise SurfaceError("flatten", "lost the center through a stage")
        center = _vertex_id_of(current, center_pt)
        rim_new = []
        for v in rim_cur:
            pt = stage.push(SurfacePoint.vertex_point(stage.source, v))
            if pt is not None:
                rim_new.append(_vertex_id_of(current, pt))
        rim_cur = rim_new

    rep = curvature(current)
    residual = 0.0
    worst = 0.0
    for v in range(current.n_vertices):
        if v in current.boundary_vertices:
            continue
        d = abs(current.defect(v))
        residual += d
        worst = max(worst, d)
    if worst >= 1e-8:
        raise SurfaceError("flatten", f"residual defect {worst:g} at some vertex")
    dev = develop_surface(current)
    plmap = PLMap(source=att.surface, stages=stages, development=dev)
    report.update(
        {
            "residual_total": float(residual),
            "residual_worst": float(worst),
            "development_closure": float(dev.closure_residual),
            "guaranteed_expansion": float(plmap.guaranteed_expansion),
            "guaranteed_contraction": float(plmap.guaranteed_contraction),
            "guaranteed_bound": float(plmap.guaranteed_bound),
        }
    )
    if cls is not None:
        report["paper_sqrt_target"] = float(
            math.sqrt((TWO_PI + cls.C) / cls.eps)
        )
    return FlattenResult(
        star=star,
        attached=att,
        params=params,
        surface=current,
        development=dev,
        plmap=plmap,
        report=report,
    )


def _vertex_id_of(surface, pt):
    corner = max(range(3), key=lambda c: pt.bary[c])
    return surface.vertex(pt.face, corner)


# -- comparison triangles --------------------------------------------------------------


def comparison_triangle(a, b, c, eta_min=1e-9):
    """Planar triangle with the given side lengths: vertices at the origin,
    (c, 0), and above the x-axis."""
    m = max(a, b, c)
    if min(a, b, c) <= 0 or a + b - c < eta_min * m or b + c - a < eta_min * m or c + a - b < eta_min * m:
        raise SurfaceError("comparison", f"degenerate side lengths ({a:g}, {b:g}, {c:g})")
    x = (b * b + c * c - a * a) / (2.0 * c)
    y = math.sqrt(max(0.0, b * b - x * x))
    return ((0.0, 0.0), (c, 0.0), (x, y))


def extract_triangle(tri):
    """Standalone disk copy of a triangle region: (surface, face map,
    corner ids, side chains, arc resolver base)."""
    parent = tri.surface
    faces = sorted(tri.faces)
    fmap = {f: i for i, f in enumerate(faces)}
    doc_faces = [parent.faces[f] for f in faces]
    gluing = {}
    for f in faces:
        for s in range(3):
            g = parent.gluing.get((f, s))
            if g is not None and g[0] in tri.faces:
                gluing[(fmap[f], s)] = (fmap[g[0]], g[1])
    sub = ConeSurface(doc_faces, gluing, tol=_pipeline_tol(parent.tol), allow_boundary=True)
    vmap = {}
    for f in faces:
        for c in range(3):
            vmap[parent.vertex(f, c)] = sub.vertex(fmap[f], c)
    corners = tuple(vmap[v] for v in tri.corners)
    sides = [[vmap[v] for v in chain] for chain in tri.sides]
    return sub, fmap, corners, sides


def map_to_comparison(surface, tri, cls=None, alpha_min=math.pi / 6, delta_budget=0.05,
                      samples_per_edge=24):
    """Constructive map of a triangle region onto its comparison triangle.

    The region is cut out, its interior cone points are removed by sector
    stretches confined to the region, the flat result is developed, and a
    fan map carries it onto the comparison triangle of the original side
    lengths; the boundary goes side by side linearly in original arc length.
    """
    if tri.min_angle < alpha_min - 1e-12:
        raise SurfaceError(
            "comparison-angle", f"min angle {tri.min_angle:g} below {alpha_min:g}"
        )
    if tri.total_curvature >= delta_budget:
        raise SurfaceError(
            "comparison-curvature",
            f"total curvature {tri.total_curvature:g} at or above {delta_budget:g}",
        )
    sub, fmap, corners, sides = extract_triangle(tri)

    # original arc positions along each side
    base_arc = {}
    for i, chain in enumerate(sides):
        acc = 0.0
        base_arc[(i, chain[0])] = 0.0
        for u, w in zip(chain, chain[1:]):
            acc += _boundary_edge_length(sub, u, w)
            base_arc[(i, w)] = acc
    side_of_vertex = {}
    for i, chain in enumerate(sides):
        for v in chain[1:-1]:
            side_of_vertex[v] = i

    stages = []
    current = sub
    for sign in ("positive", "negative"):
        budgets, total = sector_budgets(current, sign)
        if not budgets:
            continue
        a = TWO_PI / (TWO_PI - total) if sign == "positive" else TWO_PI / (TWO_PI + total)
        secs = select_flat_sectors(current, sign)
        current, stage = stretch_sectors(
            current, secs, a, samples_per_edge=samples_per_edge
        )
        stages.append(stage)

    dev = develop_surface(current)

    # resolve every final boundary vertex to (side, original arc)
    corner_final = list(corners)
    for st in stages:
        corner_final = [
            _vertex_id_of(st.target, st.push(SurfacePoint.vertex_point(st.source, v)))
            for v in corner_final
        ]

    def base_resolver(vid):
        out = {i: base_arc[(i, vid)] for i in range(3) if (i, vid) in base_arc}
        if not out:
            raise SurfaceError("boundary-arc", f"vertex {vid} not on the boundary")
        return out

    resolver = base_resolver
    for st in stages:
        resolver = _stack_resolver(st, resolver)

    fan_map = _ComparisonFan(current, dev, tri, corner_final, resolver)
    cmap = ComparisonMap(
        source=sub,
        stages=stages,
        development=dev,
        fan=fan_map,
        tri=tri,
        sides=sides,
        base_arc=base_arc,
    )
    report = {
        "stage_factors": [float(st.a) for st in stages],
        "guaranteed_stage_bound": float(
            np.prod([st.max_stretch * st.max_contract for st in stages])
        )
        if stages
        else 1.0,
        "fan_bound": float(fan_map.max_singular_ratio),
        "development_closure": float(dev.closure_residual),
        "target": 1.1,
    }
    return cmap, report


def _stack_resolver(stage, prev):
    def top(vid):
        return stage.boundary_arc(vid, prev)

    return top


def _boundary_edge_length(surface, u, w):
    for (f, s) in surface.boundary_slots:
        a, b = surface.side_endpoints(f, s)
        if {a, b} == {u, w}:
            return surface.faces[f][s]
    raise SurfaceError("boundary-arc", f"no boundary edge {u}-{w}")


class _ComparisonFan:
    """Piecewise-affine map from a developed flat triangle-ish disk onto the
    comparison triangle, linear in original arc length along each side."""

    def __init__(self, surface, dev, tri, corner_final, resolver):
        self.surface = surface
        self.dev = dev
        a, b, c = tri.side_lengths
        self.target_corners = comparison_triangle(a, b, c)
        self.side_lengths = tri.side_lengths
        region = Region(surface, range(surface.n_faces))
        cycles = region.boundary_cycles
        if len(cycles) != 1:
            raise SurfaceError("comparison", "flattened region is not a disk")
        path = [surface.vertex(f, (s + 2) % 3) for f, s in cycles[0]]
        # comparison side i runs between target corners (i+1)%3 and (i+2)%3
        t_corners = self.target_corners
        boundary_pts = []
        boundary_src = []
        for vid in path:
            if vid in corner_final:
                k = corner_final.index(vid)
                boundary_pts.append(t_corners[k])
            else:
                cands = resolver(vid)
                if len(cands) != 1:
                    raise SurfaceError("comparison", f"ambiguous side for vertex {vid}")
                side, arc = next(iter(cands.items()))
                frac = arc / self.side_lengths[side]
                p0 = t_corners[(side + 1) % 3]
                p1 = t_corners[(side + 2) % 3]
                boundary_pts.append(
                    (p0[0] + frac * (p1[0] - p0[0]), p0[1] + frac * (p1[1] - p0[1]))
                )
            boundary_src.append(dev.position(SurfacePoint.vertex_point(surface, vid)))
        # interior anchor: average of the corner positions, mapped to the
        # same average of the target corners
        src_corners = [
            dev.position(SurfacePoint.vertex_point(surface, v)) for v in corner_final
        ]
        self.G = (
            sum(p[0] for p in src_corners) / 3.0,
            sum(p[1] for p in src_corners) / 3.0,
        )
        self.G2 = (
            sum(p[0] for p in t_corners) / 3.0,
            sum(p[1] for p in t_corners) / 3.0,
        )
        self.cells = []
        n = len(path)
        for k in range(n):
            p0, p1 = boundary_src[k], boundary_src[(k + 1) % n]
            q0, q1 = boundary_pts[k], boundary_pts[(k + 1) % n]
            A = np.array([[p0[0] - self.G[0], p1[0] - self.G[0]],
                          [p0[1] - self.G[1], p1[1] - self.G[1]]])
            B = np.array([[q0[0] - self.G2[0], q1[0] - self.G2[0]],
                          [q0[1] - self.G2[1], q1[1] - self.G2[1]]])
            det = np.linalg.det(A)
            if abs(det) < 1e-18:
                raise SurfaceError("comparison", "degenerate fan cell")
            J = B @ np.linalg.inv(A)
            self.cells.append((p0, p1, J))
        svals = []
        for _p0, _p1, J in self.cells:
            s = np.linalg.svd(J, compute_uv=False)
            svals.append((float(s[0]), float(s[1])))
        self.singular_values = svals
        self.max_singular_ratio = max(
            max(s0, 1.0 / s1 if s1 > 0 else math.inf) for s0, s1 in svals
        )

    def _locate(self, xy):
        best, best_score = None, math.inf
        for k, (p0, p1, J) in enumerate(self.cells):
            score = _tri_outside(self.G, p0, p1, xy)
            if score < best_score:
                best, best_score = k, score
        if best_score > 1e-7:
            return None
        return best

    def evaluate(self, xy):
        k = self._locate(xy)
        if k is None:
            return None
        _p0, _p1, J = self.cells[k]
        v = np.array([xy[0] - self.G[0], xy[1] - self.G[1]])
        w = J @ v
        return (float(w[0] + self.G2[0]), float(w[1] + self.G2[1]))

    def jacobian(self, xy):
        k = self._locate(xy)
        if k is None:
            return None
        return self.cells[k][2]


def _tri_outside(a, b, c, p):
    (x0, y0), (x1, y1), (x2, y2) = a, b, c
    den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    if abs(den) < 1e-300:
        return math.inf
    b0 = ((y1 - y2) * (p[0] - x2) + (x2 - x1) * (p[1] - y2)) / den
    b1 = ((y2 - y0) * (p[0] - x2) + (x0 - x2) * (p[1] - y2)) / den
    return max(0.0, -min(b0, b1, 1.0 - b0 - b1))


@dataclass
class ComparisonMap:
    """Composed map from a triangle region onto its comparison triangle."""

    source: ConeSurface
    stages: list
    development: Development
    fan: _ComparisonFan
    tri: object
    sides: list
    base_arc: dict

    def evaluate(self, pt):
        cur = pt
        for st in self.stages:
            cur = st.push(cur)
            if cur is None:
                return None
        return self.fan.evaluate(self.development.position(cur))

    def evaluate_boundary(self, side, arc):
        """Exact boundary rule: side i at original arc length maps linearly
        onto comparison side i."""
        frac = arc / self.fan.side_lengths[side]
        p0 = self.fan.target_corners[(side + 1) % 3]
        p1 = self.fan.target_corners[(side + 2) % 3]
        return (p0[0] + frac * (p1[0] - p0[0]), p0[1] + frac * (p1[1] - p0[1]))

    def jacobian(self, pt):
        J = np.eye(2)
        cur = pt
        for st in self.stages:
            Jst = st.jacobian(cur)
            if Jst is None:
                return None
            J = Jst @ J
            cur = st.push(cur)
            if cur is None:
                return None
        Jf = self.fan.jacobian(self.development.position(cur))
        if Jf is None:
            return None
        return Jf @ J

    @property
    def guaranteed_bound(self):
        out = self.fan.max_singular_ratio
        for st in self.stages:
            out *= st.max_stretch * st.max_contract
        return out
