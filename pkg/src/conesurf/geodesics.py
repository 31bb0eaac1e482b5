"""Exact shortest paths on cone surfaces by triangle-strip unfolding.

The engine unfolds face strips into the plane with a best-first search keyed
by an admissible lower bound (distance from the source to the strip's entry
window, clipped by the visibility funnel).  A straight feasible segment in an
unfolded strip is a genuine surface path; exhausting every strip whose bound
stays below the best candidate certifies optimality among vertex-free paths.
Paths through vertices of negative curvature are recovered by a Dijkstra pass
over saddle waypoints.  A refined-edge-graph path supplies an independent
upper bound when the strip budget runs out.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .core import TWO_PI, SurfaceError

# -- rigid motions as (cos, sin, tx, ty) tuples --------------------------


def _apply(T, p):
    c, s, tx, ty = T
    x, y = p
    return (c * x - s * y + tx, s * x + c * y + ty)


def _apply_vec(T, v):
    c, s, _, _ = T
    x, y = v
    return (c * x - s * y, s * x + c * y)


def _invert(T):
    c, s, tx, ty = T
    return (c, -s, -(c * tx + s * ty), -(-s * tx + c * ty))


def _compose(T, U):
    """T after U: (T o U)(p) = T(U(p))."""
    c1, s1, t1x, t1y = T
    c2, s2, t2x, t2y = U
    return (
        c1 * c2 - s1 * s2,
        s1 * c2 + c1 * s2,
        c1 * t2x - s1 * t2y + t1x,
        s1 * t2x + c1 * t2y + t1y,
    )


_ID = (1.0, 0.0, 0.0, 0.0)


def unfold_transforms(surface):
    """For every glued slot (f, s): the rigid motion placing the neighbor
    face's chart across side s of face f's chart.  Cached per surface."""
    cache = surface.__dict__.get("_unfold_table")
    if cache is not None:
        return cache
    table = {}
    ch = surface.charts
    for (f, s), (f2, s2) in surface.gluing.items():
        a = ch[f][(s + 1) % 3]
        b = ch[f][(s + 2) % 3]
        a2 = ch[f2][(s2 + 2) % 3]  # identified with a
        b2 = ch[f2][(s2 + 1) % 3]  # identified with b
        u = b - a
        u2 = b2 - a2
        nu = math.hypot(*u)
        nu2 = math.hypot(*u2)
        ux, uy = u[0] / nu, u[1] / nu
        vx, vy = u2[0] / nu2, u2[1] / nu2
        c = vx * ux + vy * uy
        sn = vx * uy - vy * ux
        tx = a[0] - (c * a2[0] - sn * a2[1])
        ty = a[1] - (sn * a2[0] + c * a2[1])
        table[(f, s)] = ((f2, s2), (c, sn, tx, ty))
    surface.__dict__["_unfold_table"] = table
    return table


# -- surface points -------------------------------------------------------

_BARY_TOL = 1e-12


@dataclass(frozen=True)
class SurfacePoint:
    """A point on a surface: a face id plus barycentric coordinates."""

    face: int
    bary: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.bary)
        if abs(sum(b) - 1.0) > 1e-10 or min(b) < -1e-12:
            raise SurfaceError("surface-point", f"bad barycentric coords {b!r}")
        object.__setattr__(self, "bary", b)

    def position(self, surface):
        ch = surface.charts[self.face]
        b = self.bary
        return (
            b[0] * ch[0][0] + b[1] * ch[1][0] + b[2] * ch[2][0],
            b[0] * ch[0][1] + b[1] * ch[1][1] + b[2] * ch[2][1],
        )

    def reps(self, surface):
        """All (face, bary) representations of this point (several when it
        lies on a shared edge or at a vertex)."""
        zeros = [c for c in range(3) if self.bary[c] <= _BARY_TOL]
        if not zeros:
            return [(self.face, self.bary)]
        if len(zeros) == 1:
            s = zeros[0]
            out = [(self.face, self.bary)]
            g = surface.gluing.get((self.face, s))
            if g is not None:
                f2, s2 = g
                t = self.bary[(s + 2) % 3]
                b2 = [0.0, 0.0, 0.0]
                b2[s2] = 0.0
                b2[(s2 + 1) % 3] = t
                b2[(s2 + 2) % 3] = 1.0 - t
                out.append((f2, tuple(b2)))
            return out
        # vertex
        c = [c for c in range(3) if self.bary[c] > _BARY_TOL]
        corner = c[0] if c else 0
        v = surface.vertex(self.face, corner)
        out = []
        for f, cc in surface.corner_slots(v):
            b = [0.0, 0.0, 0.0]
            b[cc] = 1.0
            out.append((f, tuple(b)))
        return out

    def canonical_key(self, surface, digits=9):
        reps = self.reps(surface)
        if len(reps) > 2:  # vertex
            corner = max(range(3), key=lambda c: self.bary[c])
            return ("v", surface.vertex(self.face, corner))
        keys = []
        for f, b in reps:
            keys.append((f, tuple(round(x, digits) for x in b)))
        return ("p", min(keys))

    @staticmethod
    def vertex_point(surface, v):
        f, c = surface.corner_slots(v)[0]
        b = [0.0, 0.0, 0.0]
        b[c] = 1.0
        return SurfacePoint(f, tuple(b))

    @staticmethod
    def edge_point(surface, f, s, t):
        b = [0.0, 0.0, 0.0]
        b[(s + 1) % 3] = 1.0 - t
        b[(s + 2) % 3] = t
        return SurfacePoint(f, tuple(b))

    def is_vertex(self, surface):
        return len([c for c in range(3) if self.bary[c] > _BARY_TOL]) == 1


def face_sampler(surface, rng, faces=None):
    """Draw area-weighted uniform SurfacePoints."""
    faces = list(range(surface.n_faces)) if faces is None else list(faces)
    weights = np.array([surface.areas[f] for f in faces], dtype=float)
    weights = weights / weights.sum()

    def draw():
        f = faces[int(rng.choice(len(faces), p=weights))]
        r1, r2 = rng.random(), rng.random()
        sq = math.sqrt(r1)
        b = (1.0 - sq, sq * (1.0 - r2), sq * r2)
        return SurfacePoint(f, b)

    return draw


# -- the strip-search engine ----------------------------------------------


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


class _SearchResult:
    __slots__ = (
        "best",
        "lower",
        "exact",
        "expansions",
        "chain",
        "origin",
        "target",
        "parents",
    )

    def __init__(self):
        self.best = math.inf
        self.lower = 0.0
        self.exact = False
        self.expansions = 0
        self.chain = None
        self.origin = None
        self.target = None
        self.parents = []


def _strip_search(
    surface,
    x_reps,
    y_reps,
    budget=50000,
    cutoff=math.inf,
    upper_init=math.inf,
    restrict=None,
    blocked=None,
):
    """Vertex-free shortest distance between point representations.

    Returns a _SearchResult; ``chain`` reconstructs the winning strip.
    """
    table = unfold_transforms(surface)
    ch = surface.charts
    y_faces = {}
    for f, b in y_reps:
        if restrict is not None and f not in restrict:
            continue
        pos = (
            b[0] * ch[f][0][0] + b[1] * ch[f][1][0] + b[2] * ch[f][2][0],
            b[0] * ch[f][0][1] + b[1] * ch[f][1][1] + b[2] * ch[f][2][1],
        )
        y_faces.setdefault(f, []).append(pos)

    res = _SearchResult()
    res.best = upper_init
    heap = []
    # parents: (parent_index, face, T, slot_crossed, full edge endpoints)
    parents = res.parents
    counter = 0

    for fx, bx in x_reps:
        if restrict is not None and fx not in restrict:
            continue
        X = (
            bx[0] * ch[fx][0][0] + bx[1] * ch[fx][1][0] + bx[2] * ch[fx][2][0],
            bx[0] * ch[fx][0][1] + bx[1] * ch[fx][1][1] + bx[2] * ch[fx][2][1],
        )
        # same-face candidates
        for pos in y_faces.get(fx, ()):
            d = math.hypot(pos[0] - X[0], pos[1] - X[1])
            if d < res.best:
                res.best = d
                res.chain = ("direct", fx)
                res.origin = X
                res.target = pos
        on_side = [c for c in range(3) if bx[c] <= _BARY_TOL]
        is_vertex = len(on_side) == 2
        corner = None
        if is_vertex:
            corner = next(c for c in range(3) if bx[c] > _BARY_TOL)
        for s in range(3):
            if s in on_side and not is_vertex:
                continue  # the edge rep on the other side covers this
            if is_vertex and s != corner:
                continue  # only the opposite side subtends a proper cone
            entry = table.get((fx, s))
            if entry is None:
                continue
            if blocked and ((fx, s) in blocked):
                continue
            (f2, s2), M = entry
            if restrict is not None and f2 not in restrict:
                continue
            p = tuple(ch[fx][(s + 1) % 3])
            q = tuple(ch[fx][(s + 2) % 3])
            dmin = _seg_dist(X, p, q)
            parents.append((-1, f2, M, (fx, s), (p, q)))
            counter += 1
            heapq.heappush(
                heap, (dmin, counter, f2, M, p, q, s2, len(parents) - 1, X)
            )

    eps_rel = 1e-11
    while heap:
        dmin, _, f, T, wa, wb, s_in, pidx, X = heapq.heappop(heap)
        if dmin >= res.best - 1e-15 or dmin >= cutoff:
            res.lower = min(res.best, dmin)
            res.exact = res.best <= dmin + max(1e-15, eps_rel * res.best)
            return res
        res.expansions += 1
        if res.expansions > budget:
            res.lower = min(res.best, dmin)
            res.exact = False
            return res
        rax, ray = wa[0] - X[0], wa[1] - X[1]
        lbx, lby = wb[0] - X[0], wb[1] - X[1]
        # candidate completions in this face
        for pos in y_faces.get(f, ()):
            pu = _apply(T, pos)
            px, py = pu[0] - X[0], pu[1] - X[1]
            n = math.hypot(px, py)
            if n < dmin - 1e-12:
                continue  # cannot be reached through the entry window
            tol = eps_rel * max(n, 1.0) * max(math.hypot(rax, ray), math.hypot(lbx, lby))
            if _cross(rax, ray, px, py) >= -tol and _cross(px, py, lbx, lby) >= -tol:
                # the segment must cross the window line, not stay short of it
                ex, ey = wb[0] - wa[0], wb[1] - wa[1]
                side_x = _cross(ex, ey, X[0] - wa[0], X[1] - wa[1])
                side_p = _cross(ex, ey, pu[0] - wa[0], pu[1] - wa[1])
                wtol = eps_rel * (abs(side_x) + abs(side_p) + 1e-300)
                if side_x * side_p > wtol:
                    continue
                if n < res.best:
                    res.best = n
                    res.chain = pidx
                    res.origin = X
                    res.target = pu
        # expand across other sides
        for s in range(3):
            if s == s_in:
                continue
            entry = table.get((f, s))
            slot_blocked = blocked and (f, s) in blocked
            p = _apply(T, ch[f][(s + 1) % 3])
            q = _apply(T, ch[f][(s + 2) % 3])
            # clip [p, q] by the funnel cone
            fr0 = _cross(rax, ray, p[0] - X[0], p[1] - X[1])
            fr1 = _cross(rax, ray, q[0] - X[0], q[1] - X[1])
            fl0 = _cross(p[0] - X[0], p[1] - X[1], lbx, lby)
            fl1 = _cross(q[0] - X[0], q[1] - X[1], lbx, lby)
            scale = eps_rel * (
                max(abs(fr0), abs(fr1), abs(fl0), abs(fl1)) + 1e-300
            )
            t0, t1 = 0.0, 1.0
            ok = True
            for g0, g1 in ((fr0, fr1), (fl0, fl1)):
                if g0 < -scale and g1 < -scale:
                    ok = False
                    break
                if g0 < -scale or g1 < -scale:
                    tcut = g0 / (g0 - g1)
                    if g0 < 0:
                        t0 = max(t0, tcut)
                    else:
                        t1 = min(t1, tcut)
            if not ok or t0 > t1 + 1e-12:
                continue
            na = (p[0] + t0 * (q[0] - p[0]), p[1] + t0 * (q[1] - p[1]))
            nb = (p[0] + t1 * (q[0] - p[0]), p[1] + t1 * (q[1] - p[1]))
            if (
                _cross(na[0] - X[0], na[1] - X[1], nb[0] - X[0], nb[1] - X[1])
                < 0.0
            ):
                na, nb = nb, na
            d2 = _seg_dist(X, na, nb)
            if d2 >= res.best - 1e-15 or d2 >= cutoff:
                continue
            # windows of negligible angular width carry no geodesic that a
            # sibling strip (with the window touching the pinch point) does
            # not already carry; dropping them stops vertex-fan cycling
            width = math.hypot(nb[0] - na[0], nb[1] - na[1])
            if width <= 1e-11 * d2:
                continue
            if entry is None or slot_blocked:
                continue  # boundary: the strip stops here
            (f2, s2), M = entry
            if restrict is not None and f2 not in restrict:
                continue
            T2 = _compose(T, M)
            parents.append((pidx, f2, T2, (f, s), (p, q)))
            counter += 1
            heapq.heappush(
                heap, (d2, counter, f2, T2, na, nb, s2, len(parents) - 1, X)
            )

    res.lower = res.best
    res.exact = math.isfinite(res.best)
    return res


def _seg_dist(X, a, b):
    ax, ay = a[0] - X[0], a[1] - X[1]
    bx, by = b[0] - X[0], b[1] - X[1]
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den <= 0.0:
        return math.hypot(ax, ay)
    t = -(ax * dx + ay * dy) / den
    t = min(1.0, max(0.0, t))
    return math.hypot(ax + t * dx, ay + t * dy)


def _reconstruct(surface, res):
    """Faces crossed and per-edge crossing parameters of the winning strip."""
    if res.chain is None:
        return [], [], 0.0
    if isinstance(res.chain, tuple):  # same-face candidate
        return [res.chain[1]], [], 0.0
    chain = []
    idx = res.chain
    while idx != -1:
        chain.append(res.parents[idx])
        idx = res.parents[idx][0]
    chain.reverse()
    X, Y = res.origin, res.target
    dx, dy = Y[0] - X[0], Y[1] - X[1]
    faces = []
    crossings = []
    residual = 0.0
    if chain:
        faces.append(chain[0][3][0])
    for _, f2, _, slot, (p, q) in chain:
        ex, ey = q[0] - p[0], q[1] - p[1]
        den = _cross(dx, dy, ex, ey)
        if abs(den) < 1e-300:
            t = 0.5
        else:
            t = _cross(p[0] - X[0], p[1] - X[1], dx, dy) / den
        t = min(1.0, max(0.0, t))
        cx = p[0] + t * ex - X[0]
        cy = p[1] + t * ey - X[1]
        # collinearity residual: crossing point's offset from the chord
        n = math.hypot(dx, dy)
        if n > 0:
            residual = max(residual, abs(_cross(dx / n, dy / n, cx, cy)))
        crossings.append((slot, t))
        faces.append(f2)
    return faces, crossings, residual


@dataclass
class Geodesic:
    """A shortest path with its certificate.

    ``length`` is the realized path length; the true distance lies in
    [lower, upper].  ``exact`` means the strip search exhausted every
    alternative below ``length``; paths through saddle vertices are recorded
    in ``via``.
    """

    start: SurfacePoint
    end: SurfacePoint
    length: float
    lower: float
    upper: float
    exact: bool
    faces: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    via: list = field(default_factory=list)
    collinearity_residual: float = 0.0
    expansions: int = 0

    def to_doc(self):
        return {
            "strip": [int(f) for f in self.faces],
            "crossings": [
                {"face": int(f), "side": int(s), "t": float(t)}
                for (f, s), t in self.crossings
            ],
            "length": float(self.length),
            "certificate": {
                "lower": float(self.lower),
                "upper": float(self.upper),
                "exact": bool(self.exact),
            },
            "via_vertices": [int(v) for v in self.via],
        }


def _saddle_vertices(surface, restrict=None):
    out = []
    for v in range(surface.n_vertices):
        if v in surface.boundary_vertices:
            if surface.cone_angle(v) > math.pi + surface.tol.tol_flat:
                out.append(v)
            continue
        if surface.defect(v) < -surface.tol.tol_flat:
            out.append(v)
    if restrict is not None:
        keep = []
        for v in out:
            if all(f in restrict for f, _ in surface.corner_slots(v)):
                keep.append(v)
        out = keep
    return out


def shortest_path(
    surface,
    x,
    y,
    budget=50000,
    rel_tol=1e-9,
    restrict=None,
    blocked=None,
    waypoints=None,
):
    """Shortest path between two surface points.

    The result is exact (certificate gap zero) unless the strip budget runs
    out, in which case the best found path is returned flagged inexact with
    an honest [lower, upper] interval.  ``restrict``/``blocked`` confine the
    search to a face subset (the region's induced metric); ``waypoints``
    overrides the saddle-vertex list.
    """
    if x.canonical_key(surface) == y.canonical_key(surface):
        return Geodesic(x, y, 0.0, 0.0, 0.0, True, faces=[x.face])
    if waypoints is None:
        waypoints = _saddle_vertices(surface, restrict)
    x_reps = x.reps(surface)
    y_reps = y.reps(surface)

    direct = _strip_search(
        surface, x_reps, y_reps, budget=budget, restrict=restrict, blocked=blocked
    )
    best_len = direct.best
    best_legs = [(direct, x, y)]
    exact = direct.exact
    expansions = direct.expansions
    via = []

    if waypoints:
        nodes = [x, y] + [SurfacePoint.vertex_point(surface, v) for v in waypoints]
        n = len(nodes)
        dist = np.full((n, n), math.inf)
        results = {}
        all_exact = True
        for i in range(n):
            for j in range(i + 1, n):
                if i == 0 and j == 1:
                    r = direct
                else:
                    r = _strip_search(
                        surface,
                        nodes[i].reps(surface),
                        nodes[j].reps(surface),
                        budget=budget,
                        restrict=restrict,
                        blocked=blocked,
                        upper_init=best_len,
                    )
                    expansions += r.expansions
                results[(i, j)] = r
                dist[i, j] = dist[j, i] = r.best
                all_exact = all_exact and (r.exact or not math.isfinite(r.best))
        # Dijkstra from node 0 to node 1 through waypoint nodes
        dd = [math.inf] * n
        prev = [-1] * n
        dd[0] = 0.0
        todo = set(range(n))
        while todo:
            u = min(todo, key=lambda k: dd[k])
            todo.discard(u)
            if dd[u] == math.inf:
                break
            for w in list(todo):
                nd = dd[u] + dist[u, w]
                if nd < dd[w] - 1e-15:
                    dd[w] = nd
                    prev[w] = u
        if dd[1] < best_len - 1e-15:
            best_len = dd[1]
            path_nodes = []
            k = 1
            while k != -1:
                path_nodes.append(k)
                k = prev[k]
            path_nodes.reverse()
            best_legs = []
            via = [waypoints[k - 2] for k in path_nodes[1:-1]]
            for a, b in zip(path_nodes, path_nodes[1:]):
                i, j = min(a, b), max(a, b)
                best_legs.append((results[(i, j)], nodes[a], nodes[b]))
        exact = all_exact

    if not math.isfinite(best_len):
        raise SurfaceError(
            "geodesic", "no path found (disconnected restriction or budget 0)"
        )

    faces = []
    crossings = []
    residual = 0.0
    for leg, a, b in best_legs:
        fs, cs, rs = _reconstruct(surface, leg)
        faces.extend(fs)
        crossings.extend(cs)
        residual = max(residual, rs)
    lower = best_len if exact else min(best_len, direct.lower)
    return Geodesic(
        x,
        y,
        best_len,
        lower,
        best_len,
        exact,
        faces=faces,
        crossings=crossings,
        via=via,
        collinearity_residual=residual,
        expansions=expansions,
    )


def distance(surface, x, y, **kw):
    return shortest_path(surface, x, y, **kw).length


def distance_lower_bound(surface, x, y, cutoff, budget=20000, restrict=None, blocked=None):
    """Cheap test: returns (reached, value).  ``reached`` True means the exact
    distance is ``value`` (< cutoff); False means distance >= value."""
    if x.canonical_key(surface) == y.canonical_key(surface):
        return True, 0.0
    waypoints = _saddle_vertices(surface, restrict)
    if not waypoints:
        r = _strip_search(
            surface,
            x.reps(surface),
            y.reps(surface),
            budget=budget,
            cutoff=cutoff,
            restrict=restrict,
            blocked=blocked,
        )
        if math.isfinite(r.best) and r.best < cutoff:
            return True, r.best
        return False, min(cutoff, r.lower)
    g = shortest_path(surface, x, y, budget=budget, restrict=restrict, blocked=blocked)
    if g.length < cutoff:
        return True, g.length
    return False, min(cutoff, g.lower)


# -- straight-ray tracing --------------------------------------------------


@dataclass
class TracedRay:
    """A straight geodesic ray traced across faces.

    ``segments`` holds (face, entry_chart_xy, exit_chart_xy) per visited
    face; ``crossings`` the crossed slot and edge parameter per hop.
    ``end_reason`` is one of "length", "boundary", "vertex".
    """

    segments: list
    crossings: list
    length: float
    end_reason: str
    end_point: SurfacePoint | None
    end_vertex: int | None = None
    end_direction_angle: float | None = None  # incoming angle at end_vertex


def direction_at_vertex(surface, v, theta):
    """Chart direction for the ray leaving vertex v at cumulative angle theta
    (counterclockwise from the fan start).  Returns (face, corner, unit dir,
    corner chart position)."""
    fan = surface.corner_fan(v)
    total = surface.cone_angle(v)
    if v not in surface.boundary_vertices:
        theta = theta % total
    elif not (0.0 <= theta <= total + 1e-12):
        raise SurfaceError("ray", f"angle {theta} outside boundary fan of vertex {v}")
    acc = 0.0
    for f, c in fan:
        a = float(surface.angles[f, c])
        if theta <= acc + a or (f, c) == fan[-1]:
            local = max(0.0, min(a, theta - acc))
            ch = surface.charts[f]
            origin = ch[c]
            u0 = ch[(c + 1) % 3] - origin
            u0 = u0 / math.hypot(*u0)
            cs, sn = math.cos(local), math.sin(local)
            d = (cs * u0[0] - sn * u0[1], sn * u0[0] + cs * u0[1])
            return f, c, d, (float(origin[0]), float(origin[1]))
        acc += a
    raise SurfaceError("ray", f"angle {theta} not found in fan of vertex {v}")


def angle_at_vertex(surface, v, face, direction):
    """Cumulative fan angle at v of a chart ``direction`` inside ``face``.

    Among the face's corner slots at v, picks the one whose angular interval
    the direction violates least (needle charts carry a little noise)."""
    fan = surface.corner_fan(v)
    acc = 0.0
    best = None
    for f, c in fan:
        width = float(surface.angles[f, c])
        if f == face:
            ch = surface.charts[f]
            u0 = ch[(c + 1) % 3] - ch[c]
            u0 = u0 / math.hypot(*u0)
            local = math.atan2(
                _cross(u0[0], u0[1], direction[0], direction[1]),
                u0[0] * direction[0] + u0[1] * direction[1],
            )
            violation = max(0.0, -local) + max(0.0, local - width)
            value = acc + min(width, max(0.0, local))
            if best is None or violation < best[0]:
                best = (violation, value)
        acc += width
    if best is None or best[0] > 1e-6:
        raise SurfaceError("ray", f"face {face} not in fan of vertex {v}")
    return best[1]


_VERTEX_SNAP = 1e-9


def trace_ray(
    surface,
    start,
    max_length=math.inf,
    blocked=None,
    vertex_snap=_VERTEX_SNAP,
):
    """Trace a straight ray until it runs out of length, exits through an
    unglued or blocked side, or hits a vertex.

    ``start`` is (face, chart_point, unit_direction); use
    ``direction_at_vertex`` to launch from a vertex.
    """
    table = unfold_transforms(surface)
    ch = surface.charts
    f, o, d = start
    o = (float(o[0]), float(o[1]))
    T = _ID  # current face chart -> tracing plane
    Ti = _ID
    plane_o = o
    segments = []
    crossings = []
    traveled = 0.0
    entry_local = o
    entry_side = None
    for _hop in range(100000):
        # intersect ray with the face's sides (in the tracing plane)
        best = None
        for s in range(3):
            if s == entry_side:
                continue
            p = _apply(T, ch[f][(s + 1) % 3])
            q = _apply(T, ch[f][(s + 2) % 3])
            ex, ey = q[0] - p[0], q[1] - p[1]
            den = _cross(d[0], d[1], ex, ey)
            if abs(den) < 1e-300:
                continue
            t_ray = _cross(p[0] - plane_o[0], p[1] - plane_o[1], ex, ey) / den
            u = _cross(p[0] - plane_o[0], p[1] - plane_o[1], d[0], d[1]) / den
            edge_len = math.hypot(ex, ey)
            if t_ray <= 1e-12 or u < -vertex_snap / edge_len or u > 1 + vertex_snap / edge_len:
                continue
            if best is None or t_ray < best[0]:
                best = (t_ray, s, u, p, q, edge_len)
        if best is None:
            # needle faces can defeat the side intersections; if the ray sits
            # on a corner, treat it as a vertex hit and let the caller go on
            ch3 = ch[f]
            scale = max(surface.faces[f])
            for c in range(3):
                pc = _apply(T, ch3[c])
                if math.hypot(pc[0] - plane_o[0], pc[1] - plane_o[1]) <= 1e-7 * scale:
                    v = surface.vertex(f, c)
                    dir_local = _apply_vec(Ti, d)
                    ang = angle_at_vertex(
                        surface, v, f, (-dir_local[0], -dir_local[1])
                    )
                    vp = SurfacePoint.vertex_point(surface, v)
                    return TracedRay(
                        segments, crossings, traveled, "vertex", vp, v, ang
                    )
            raise SurfaceError("ray", "ray failed to exit a face (degenerate data)")
        t_ray, s, u, p, q, edge_len = best
        if traveled + t_ray >= max_length - 1e-15:
            # ends inside this face
            t_end = max_length - traveled
            hit = (plane_o[0] + t_end * d[0], plane_o[1] + t_end * d[1])
            local = _apply(Ti, hit)
            segments.append((f, entry_local, local))
            bary = _bary_of(ch[f], local)
            return TracedRay(
                segments,
                crossings,
                max_length,
                "length",
                SurfacePoint(f, bary),
            )
        hit = (plane_o[0] + t_ray * d[0], plane_o[1] + t_ray * d[1])
        local = _apply(Ti, hit)
        segments.append((f, entry_local, local))
        traveled += t_ray
        # vertex hit?
        for uu, corner in ((u, (s + 1) % 3), (1.0 - u, (s + 2) % 3)):
            if abs(uu) * edge_len <= vertex_snap:
                v = surface.vertex(f, corner)
                # fan angle of the incoming back-direction, measured against
                # the hit edge in the global plane (robust through needles)
                other = p if corner == (s + 2) % 3 else q
                vpos = q if corner == (s + 2) % 3 else p
                ex, ey = other[0] - vpos[0], other[1] - vpos[1]
                en = math.hypot(ex, ey)
                ex, ey = ex / en, ey / en
                off = math.atan2(
                    _cross(ex, ey, -d[0], -d[1]), ex * (-d[0]) + ey * (-d[1])
                )
                base_angle = _edge_fan_angle(surface, v, f, corner, s)
                total = surface.cone_angle(v)
                ang = base_angle + off
                if v not in surface.boundary_vertices:
                    ang %= total
                else:
                    ang = min(max(ang, 0.0), total)
                vp = SurfacePoint.vertex_point(surface, v)
                return TracedRay(
                    segments, crossings, traveled, "vertex", vp, v, ang
                )
        crossings.append(((f, s), u))
        entry = table.get((f, s))
        if entry is None or (blocked and (f, s) in blocked):
            bary = _bary_of(ch[f], local)
            return TracedRay(
                segments, crossings, traveled, "boundary", SurfacePoint(f, bary)
            )
        (f2, s2), M = entry
        T = _compose(T, M)
        Ti = _invert(T)
        entry_local = _apply(Ti, hit)
        f = f2
        entry_side = s2
    raise SurfaceError("ray", "ray exceeded the hop limit")


def _edge_fan_angle(surface, v, f, corner, side):
    """Cumulative fan angle at v of the directed edge from v along ``side``
    of face f (v is the ``corner`` endpoint of that side)."""
    fan = surface.corner_fan(v)
    acc = 0.0
    for ff, cc in fan:
        if ff == f and cc == corner:
            if side == (cc + 2) % 3:
                return acc  # interval start edge
            return acc + float(surface.angles[ff, cc])  # interval end edge
        acc += float(surface.angles[ff, cc])
    raise SurfaceError("ray", f"corner ({f},{corner}) not in fan of vertex {v}")


def _bary_of(chart, p):
    (x0, y0), (x1, y1), (x2, y2) = chart
    den = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    b0 = ((y1 - y2) * (p[0] - x2) + (x2 - x1) * (p[1] - y2)) / den
    b1 = ((y2 - y0) * (p[0] - x2) + (x0 - x2) * (p[1] - y2)) / den
    b0 = min(1.0, max(0.0, b0))
    b1 = min(1.0, max(0.0, min(b1, 1.0 - b0)))
    return (b0, b1, max(0.0, 1.0 - b0 - b1))


# -- refined edge graph (independent upper bound) ---------------------------


def _edge_graph(surface, k=2):
    cache = surface.__dict__.setdefault("_edge_graph_cache", {})
    if k in cache:
        return cache[k]
    nodes = {}
    face_nodes = [[] for _ in range(surface.n_faces)]

    def node_key(f, s, t):
        g = surface.gluing.get((f, s))
        key = ((f, s), round(t, 12))
        if g is not None:
            key2 = (g, round(1.0 - t, 12))
            key = min(key, key2)
        return key

    for f in range(surface.n_faces):
        ch = surface.charts[f]
        for c in range(3):
            v = surface.vertex(f, c)
            key = ("v", v)
            if key not in nodes:
                nodes[key] = len(nodes)
            face_nodes[f].append((nodes[key], (float(ch[c][0]), float(ch[c][1]))))
        for s in range(3):
            p = ch[(s + 1) % 3]
            q = ch[(s + 2) % 3]
            for i in range(1, k + 1):
                t = i / (k + 1)
                key = node_key(f, s, t)
                if key not in nodes:
                    nodes[key] = len(nodes)
                pos = (
                    float(p[0] + t * (q[0] - p[0])),
                    float(p[1] + t * (q[1] - p[1])),
                )
                face_nodes[f].append((nodes[key], pos))
    adj = [[] for _ in range(len(nodes))]
    for f in range(surface.n_faces):
        pts = face_nodes[f]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                (na, pa), (nb, pb) = pts[i], pts[j]
                if na == nb:
                    continue
                w = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
                adj[na].append((nb, w))
                adj[nb].append((na, w))
    cache[k] = (nodes, face_nodes, adj)
    return cache[k]


def edge_graph_distance(surface, x, y, k=2):
    """Upper bound on d(x, y) via Dijkstra on the k-refined edge graph."""
    nodes, face_nodes, adj = _edge_graph(surface, k)
    n = len(nodes)
    sources = []
    for f, b in x.reps(surface):
        px = SurfacePoint(f, b).position(surface)
        for nid, pos in face_nodes[f]:
            sources.append((nid, math.hypot(px[0] - pos[0], px[1] - pos[1])))
    targets = {}
    for f, b in y.reps(surface):
        py = SurfacePoint(f, b).position(surface)
        for nid, pos in face_nodes[f]:
            w = math.hypot(py[0] - pos[0], py[1] - pos[1])
            targets[nid] = min(targets.get(nid, math.inf), w)
    # direct same-face hop
    best_direct = math.inf
    xf = {f for f, _ in x.reps(surface)}
    for f, b in y.reps(surface):
        if f in xf:
            for f2, b2 in x.reps(surface):
                if f2 == f:
                    p1 = SurfacePoint(f, b).position(surface)
                    p2 = SurfacePoint(f2, b2).position(surface)
                    best_direct = min(
                        best_direct, math.hypot(p1[0] - p2[0], p1[1] - p2[1])
                    )
    dist = [math.inf] * n
    heap = []
    for nid, w in sources:
        if w < dist[nid]:
            dist[nid] = w
            heapq.heappush(heap, (w, nid))
    best = best_direct
    while heap:
        dcur, u = heapq.heappop(heap)
        if dcur > dist[u]:
            continue
        if dcur >= best:
            break
        if u in targets:
            best = min(best, dcur + targets[u])
        for w2, ww in adj[u]:
            nd = dcur + ww
            if nd < dist[w2]:
                dist[w2] = nd
                heapq.heappush(heap, (nd, w2))
    return best


# -- nets, diameter, systole, GH ---------------------------------------------


@dataclass
class Net:
    """A maximal separated point set with its separation radius."""

    points: list
    radius: float
    cardinality_scaling: float  # len(points) * radius**2
    seed: int

    def __len__(self):
        return len(self.points)


def build_net(surface, r, seed=0, n_random=None):
    """Greedy maximal 2r-separated net over a seeded candidate set (vertices,
    barycenters, edge midpoints, random points).  Every candidate ends up
    within 2r of the net, so vertices and barycenters are 4r-covered with
    room to spare."""
    if r <= 0:
        raise SurfaceError("net", "net radius must be positive")
    rng = np.random.default_rng(seed)
    candidates = []
    for v in range(surface.n_vertices):
        candidates.append(SurfacePoint.vertex_point(surface, v))
    for f in range(surface.n_faces):
        candidates.append(SurfacePoint(f, (1 / 3, 1 / 3, 1 / 3)))
    for f in range(surface.n_faces):
        for s in range(3):
            g = surface.gluing.get((f, s))
            if g is None or (f, s) < g:
                candidates.append(SurfacePoint.edge_point(surface, f, s, 0.5))
    if n_random is None:
        n_random = min(4000, int(20.0 * surface.area() / (r * r)) + 8)
    draw = face_sampler(surface, rng)
    for _ in range(n_random):
        candidates.append(draw())
    order = rng.permutation(len(candidates))
    net = []
    for idx in order:
        cand = candidates[int(idx)]
        ok = True
        for p in net:
            reached, val = distance_lower_bound(surface, cand, p, cutoff=2.0 * r)
            if reached:
                ok = False
                break
        if ok:
            net.append(cand)
    return Net(net, r, len(net) * r * r, seed)


def diameter_estimate(surface, r, seed=0):
    """Interval [lo, hi] containing the diameter: lo is the maximal pairwise
    net distance, hi adds the 4r covering slack."""
    if r <= 0:
        raise SurfaceError("net", "net radius must be positive")
    net = build_net(surface, r, seed=seed)
    lo = 0.0
    pts = net.points
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = shortest_path(surface, pts[i], pts[j]).length
            lo = max(lo, d)
    return lo, lo + 4.0 * r


def _gf2_reduce(vec, basis):
    """Reduce a bitset against an echelonized GF(2) basis dict {pivot: row}."""
    while vec:
        piv = vec.bit_length() - 1
        row = basis.get(piv)
        if row is None:
            return vec
        vec ^= row
    return 0


def _gf2_insert(vec, basis):
    vec = _gf2_reduce(vec, basis)
    if vec:
        basis[vec.bit_length() - 1] = vec


def systole_upper_bound(surface):
    """Length of the shortest edge-graph cycle that is nontrivial in mod-2
    homology; +inf for sphere topology.  Such a cycle is noncontractible, so
    this upper-bounds the systole-relevant loop length."""
    if surface.boundary_slots:
        raise SurfaceError("closed", "systole bound needs a closed surface")
    if surface.chi_computed == 2:
        return math.inf
    edges = _edge_table_geo(surface)
    n_e = len(edges)
    # boundary space: spanned by face boundaries
    slot_edge = {}
    for idx, (_, _, _, slot) in enumerate(edges):
        slot_edge[slot] = idx
        slot_edge[surface.gluing[slot]] = idx
    basis = {}
    for f in range(surface.n_faces):
        vec = 0
        for s in range(3):
            vec ^= 1 << slot_edge[(f, s)]
        _gf2_insert(vec, basis)

    adj = {}
    for idx, (a, b, ln, _) in enumerate(edges):
        adj.setdefault(a, []).append((idx, b, ln))
        if a != b:
            adj.setdefault(b, []).append((idx, a, ln))
    best = math.inf
    for root in range(surface.n_vertices):
        dist = {root: 0.0}
        tree_vec = {root: 0}
        tree_edge = {}
        heap = [(0.0, root)]
        while heap:
            dcur, u = heapq.heappop(heap)
            if dcur > dist.get(u, math.inf):
                continue
            for idx, w, ln in adj.get(u, ()):
                nd = dcur + ln
                if nd < dist.get(w, math.inf) - 1e-15:
                    dist[w] = nd
                    tree_vec[w] = tree_vec[u] ^ (1 << idx)
                    tree_edge[w] = idx
                    heapq.heappush(heap, (nd, w))
        for idx, (a, b, ln, _) in enumerate(edges):
            if a not in dist or b not in dist:
                continue
            if tree_edge.get(a) == idx or tree_edge.get(b) == idx:
                continue
            weight = dist[a] + dist[b] + ln
            if weight >= best:
                continue
            vec = tree_vec[a] ^ tree_vec[b] ^ (1 << idx)
            if _gf2_reduce(vec, basis):
                best = weight
    return best


def _edge_table_geo(surface):
    edges = []
    seen = set()
    for (f, s), other in sorted(surface.gluing.items()):
        if (f, s) in seen:
            continue
        seen.add((f, s))
        seen.add(other)
        a, b = surface.side_endpoints(f, s)
        edges.append((a, b, surface.faces[f][s], (f, s)))
    return edges


def gh_upper_bound(A, B, r, n_max=8, seed=0):
    """Upper bound for the Gromov-Hausdorff distance between two surfaces:
    half the best correspondence distortion over their nets plus the 4r
    covering slack on each side."""
    net_a = build_net(A, r, seed=seed)
    net_b = build_net(B, r, seed=seed)
    if len(net_a) > n_max or len(net_b) > n_max:
        raise SurfaceError(
            "gh-net", f"nets too large for brute force: {len(net_a)} x {len(net_b)}"
        )
    da = _distance_matrix(A, net_a.points)
    db = _distance_matrix(B, net_b.points)
    na, nb = len(net_a), len(net_b)

    def dis_of(fmap, gmap):
        pairs = [(i, fmap[i]) for i in range(na)] + [(gmap[j], j) for j in range(nb)]
        worst = 0.0
        for ii in range(len(pairs)):
            ai, bi = pairs[ii]
            for jj in range(ii + 1, len(pairs)):
                aj, bj = pairs[jj]
                worst = max(worst, abs(da[ai, aj] - db[bi, bj]))
        return worst

    def greedy_g(fmap):
        g = []
        for j in range(nb):
            bestv, besta = math.inf, 0
            for a in range(na):
                v = max(
                    abs(da[a, i] - db[j, fmap[i]]) for i in range(na)
                )
                if v < bestv:
                    bestv, besta = v, a
            g.append(besta)
        return g

    best = math.inf
    if na == nb and math.factorial(na) <= 50000:
        for perm in permutations(range(nb)):
            d = np.max(np.abs(da - db[np.ix_(perm, perm)]))
            best = min(best, float(d))
    else:
        if nb ** na <= 200000:
            fmaps = _all_maps(na, nb)
        else:
            rng = np.random.default_rng(seed)
            fmaps = [tuple(rng.integers(0, nb, na)) for _ in range(5000)]
            fmaps.append(tuple(min(i, nb - 1) for i in range(na)))
        for fmap in fmaps:
            best = min(best, dis_of(fmap, greedy_g(fmap)))
    return 0.5 * best + 2.0 * (4.0 * r)


def _all_maps(n, m):
    maps = [()]
    for _ in range(n):
        maps = [t + (v,) for t in maps for v in range(m)]
    return maps


def _distance_matrix(surface, points):
    n = len(points)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = shortest_path(surface, points[i], points[j]).length
    return out


def trace_from_vertex(surface, v, theta, max_length=math.inf, edge_snap=1e-9):
    """Trace a straight ray leaving vertex v at fan angle theta.

    Directions within ``edge_snap`` radians of an incident edge walk that
    edge directly (robust against needle faces); anything else launches a
    chart ray via trace_ray.
    """
    fan = surface.corner_fan(v)
    total = surface.cone_angle(v)
    if v not in surface.boundary_vertices:
        theta = theta % total
    acc = 0.0
    checks = []
    for f, c in fan:
        checks.append((acc, f, c, (c + 1) % 3))
        acc += float(surface.angles[f, c])
    # the closing edge of a boundary fan
    f_last, c_last = fan[-1]
    checks.append((acc, f_last, c_last, (c_last + 2) % 3))
    for ang, f, c, target_corner in checks:
        delta = theta - ang
        if v not in surface.boundary_vertices:
            delta = ((delta + total / 2.0) % total) - total / 2.0
        if abs(delta) > edge_snap:
            continue
        ch = surface.charts[f]
        entry = (float(ch[c][0]), float(ch[c][1]))
        exitp = (float(ch[target_corner][0]), float(ch[target_corner][1]))
        L = math.hypot(exitp[0] - entry[0], exitp[1] - entry[1])
        if L >= max_length - 1e-15:
            t = max_length / L
            mid = (
                entry[0] + t * (exitp[0] - entry[0]),
                entry[1] + t * (exitp[1] - entry[1]),
            )
            return TracedRay(
                [(f, entry, mid)], [], max_length, "length",
                SurfacePoint(f, _bary_of(ch, mid)),
            )
        w = surface.vertex(f, target_corner)
        side_e = 3 - c - target_corner
        ang_back = _edge_fan_angle(surface, w, f, target_corner, side_e)
        return TracedRay(
            [(f, entry, exitp)],
            [],
            L,
            "vertex",
            SurfacePoint.vertex_point(surface, w),
            w,
            ang_back,
        )
    f, c, d, o = direction_at_vertex(surface, v, theta)
    return trace_ray(surface, (f, o, d), max_length=max_length)
