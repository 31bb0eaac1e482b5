"""Independent brute-force oracles used by the test suite.

The unfolding oracle enumerates every face strip up to a fixed length by
plain recursion and takes the minimum over feasible straight segments.  It
shares no code with the production engine.
"""

import math


def _chart_pts(surface, f):
    ch = surface.charts[f]
    return [(float(ch[i][0]), float(ch[i][1])) for i in range(3)]


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _place_across(a, b, a2, b2):
    """Direct isometry taking a2 -> a and b2 -> b."""
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


def exhaustive_unfold_distance(surface, x, y, max_faces=8):
    """Minimum length over all straight segments in unfolded strips of at
    most ``max_faces`` faces.  Exact on surfaces whose geodesics avoid
    vertices (no negative-curvature vertices)."""
    best = [math.inf]
    tol = 1e-12

    y_by_face = {}
    for f, b in y.reps(surface):
        ch = _chart_pts(surface, f)
        pos = (
            b[0] * ch[0][0] + b[1] * ch[1][0] + b[2] * ch[2][0],
            b[0] * ch[0][1] + b[1] * ch[1][1] + b[2] * ch[2][1],
        )
        y_by_face.setdefault(f, []).append(pos)

    def recurse(X, f, place, wa, wb, s_in, depth):
        ux, uy = wa[0] - X[0], wa[1] - X[1]
        vx, vy = wb[0] - X[0], wb[1] - X[1]
        scale = math.hypot(ux, uy) + math.hypot(vx, vy)
        for pos in y_by_face.get(f, ()):
            p = place(pos)
            px, py = p[0] - X[0], p[1] - X[1]
            ctol = tol * scale * (math.hypot(px, py) + 1.0)
            if _cross(ux, uy, px, py) < -ctol or _cross(px, py, vx, vy) < -ctol:
                continue
            ex, ey = wb[0] - wa[0], wb[1] - wa[1]
            s_x = _cross(ex, ey, X[0] - wa[0], X[1] - wa[1])
            s_p = _cross(ex, ey, p[0] - wa[0], p[1] - wa[1])
            if s_x * s_p > tol * (abs(s_x) + abs(s_p)):
                continue
            best[0] = min(best[0], math.hypot(px, py))
        if depth >= max_faces:
            return
        for s in range(3):
            if s == s_in:
                continue
            g = surface.gluing.get((f, s))
            if g is None:
                continue
            pts = [place(p) for p in _chart_pts(surface, f)]
            p = pts[(s + 1) % 3]
            q = pts[(s + 2) % 3]
            g0r = _cross(ux, uy, p[0] - X[0], p[1] - X[1])
            g1r = _cross(ux, uy, q[0] - X[0], q[1] - X[1])
            g0l = _cross(p[0] - X[0], p[1] - X[1], vx, vy)
            g1l = _cross(q[0] - X[0], q[1] - X[1], vx, vy)
            eps = tol * (abs(g0r) + abs(g1r) + abs(g0l) + abs(g1l) + 1e-300)
            t0, t1 = 0.0, 1.0
            feasible = True
            for h0, h1 in ((g0r, g1r), (g0l, g1l)):
                if h0 < -eps and h1 < -eps:
                    feasible = False
                    break
                if h0 < -eps or h1 < -eps:
                    tc = h0 / (h0 - h1)
                    if h0 < 0:
                        t0 = max(t0, tc)
                    else:
                        t1 = min(t1, tc)
            if not feasible or t0 > t1:
                continue
            na = (p[0] + (q[0] - p[0]) * t0, p[1] + (q[1] - p[1]) * t0)
            nb = (p[0] + (q[0] - p[0]) * t1, p[1] + (q[1] - p[1]) * t1)
            if _cross(na[0] - X[0], na[1] - X[1], nb[0] - X[0], nb[1] - X[1]) < 0:
                na, nb = nb, na
            if math.hypot(nb[0] - na[0], nb[1] - na[1]) <= 1e-11 * math.hypot(
                na[0] - X[0], na[1] - X[1]
            ):
                continue
            f2, s2 = g
            ch2 = _chart_pts(surface, f2)
            move = _place_across(p, q, ch2[(s2 + 2) % 3], ch2[(s2 + 1) % 3])
            recurse(X, f2, move, na, nb, s2, depth + 1)

    for fx, bx in x.reps(surface):
        ch = _chart_pts(surface, fx)
        X = (
            bx[0] * ch[0][0] + bx[1] * ch[1][0] + bx[2] * ch[2][0],
            bx[0] * ch[0][1] + bx[1] * ch[1][1] + bx[2] * ch[2][1],
        )
        for pos in y_by_face.get(fx, ()):
            best[0] = min(best[0], math.hypot(pos[0] - X[0], pos[1] - X[1]))
        on_side = [c for c in range(3) if bx[c] <= 1e-12]
        is_vertex = len(on_side) == 2
        corner = None
        if is_vertex:
            corner = next(c for c in range(3) if bx[c] > 1e-12)
        for s in range(3):
            if s in on_side and not is_vertex:
                continue
            if is_vertex and s != corner:
                continue
            g = surface.gluing.get((fx, s))
            if g is None:
                continue
            p = ch[(s + 1) % 3]
            q = ch[(s + 2) % 3]
            f2, s2 = g
            ch2 = _chart_pts(surface, f2)
            move = _place_across(p, q, ch2[(s2 + 2) % 3], ch2[(s2 + 1) % 3])
            recurse(X, f2, move, p, q, s2, 1)
    return best[0]


def planar_triangle_coords(a, b, c):
    """Comparison-triangle oracle: vertices of the planar triangle with side
    lengths (a, b, c), placed A=(0,0), B=(c,0), C above."""
    x = (b * b + c * c - a * a) / (2 * c)
    y = math.sqrt(max(0.0, b * b - x * x))
    return (0.0, 0.0), (c, 0.0), (x, y)


def gromov_tangent_lengths(a, b, c):
    """Tangent lengths of the inscribed-circle subdivision of a flat triangle
    with sides a = |BC|, b = |CA|, c = |AB|: from A, B, C in order."""
    return (b + c - a) / 2, (c + a - b) / 2, (a + b - c) / 2
