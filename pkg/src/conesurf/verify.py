"""Empirical certification: sampled bi-Lipschitz distortion, flattening
estimates (radial lengths, near-orthogonality), and the quantitative area,
inradius, and net-cardinality bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TWO_PI, Region, SurfaceError, curvature
from .geodesics import SurfacePoint, face_sampler, shortest_path

MIN_SEPARATION_FACTOR = 1e-3  # pairs closer than this times the diameter
                              # proxy amplify ratio noise and are excluded


def _diameter_proxy(surface):
    longest = max(max(f) for f in surface.faces)
    return max(math.sqrt(surface.area()), longest)


@dataclass
class DistortionReport:
    """Sampled expansion/contraction extremes of a piecewise map."""

    samples: int
    used: int
    excluded_close: int
    excluded_unmapped: int
    excluded_inexact: int
    max_expansion: float
    max_contraction: float
    guaranteed_expansion: float
    guaranteed_contraction: float
    seed: int
    min_separation: float
    violations: list = field(default_factory=list)

    @property
    def distortion(self):
        return max(self.max_expansion, self.max_contraction)

    def to_doc(self):
        return {
            "samples": self.samples,
            "used": self.used,
            "excluded": {
                "too_close": self.excluded_close,
                "unmapped": self.excluded_unmapped,
                "inexact_distance": self.excluded_inexact,
            },
            "max_expansion": float(self.max_expansion),
            "max_contraction": float(self.max_contraction),
            "distortion": float(self.distortion),
            "guaranteed_expansion": float(self.guaranteed_expansion),
            "guaranteed_contraction": float(self.guaranteed_contraction),
            "seed": self.seed,
            "min_separation": float(self.min_separation),
            "violations": self.violations,
        }


def sample_distortion(
    plmap,
    source,
    target=None,
    n=1000,
    seed=0,
    budget=40000,
    tol_dist=None,
    faces=None,
):
    """Measure max d_target(f x, f y) / d_source(x, y) and its reciprocal
    over n seeded area-uniform pairs.

    ``target=None`` reads the map through ``evaluate`` into the plane
    (Euclidean distances); a ConeSurface target uses ``push`` and geodesic
    distances.  Pairs closer than a thousandth of the diameter proxy, pairs
    whose image is trimmed at a sampled fringe, and pairs whose geodesic
    certificate stays inexact are excluded and counted.
    """
    if n < 2:
        raise SurfaceError("distortion", "need at least two samples")
    tol_dist = source.tol.tol_dist if tol_dist is None else tol_dist
    rng = np.random.default_rng(seed)
    draw = face_sampler(source, rng, faces=faces)
    min_sep = MIN_SEPARATION_FACTOR * _diameter_proxy(source)
    g_exp = getattr(plmap, "guaranteed_expansion", math.inf)
    g_con = getattr(plmap, "guaranteed_contraction", math.inf)

    used = close = unmapped = inexact = 0
    max_exp = 0.0
    max_con = 0.0
    violations = []
    for _k in range(n):
        x, y = draw(), draw()
        g = shortest_path(source, x, y, budget=budget)
        if not g.exact:
            inexact += 1
            continue
        if g.length < min_sep:
            close += 1
            continue
        if target is None:
            ix = plmap.evaluate(x)
            iy = plmap.evaluate(y)
            if ix is None or iy is None:
                unmapped += 1
                continue
            d_t = math.hypot(ix[0] - iy[0], ix[1] - iy[1])
        else:
            px = plmap.push(x)
            py = plmap.push(y)
            if px is None or py is None:
                unmapped += 1
                continue
            gt = shortest_path(target, px, py, budget=budget)
            if not gt.exact:
                inexact += 1
                continue
            d_t = gt.length
        used += 1
        exp = d_t / g.length
        con = g.length / d_t if d_t > 0 else math.inf
        if exp > max_exp:
            max_exp = exp
            if exp > g_exp + tol_dist:
                violations.append({"pair": _k, "expansion": float(exp)})
        if con > max_con:
            max_con = con
            if con > g_con + tol_dist:
                violations.append({"pair": _k, "contraction": float(con)})
    return DistortionReport(
        samples=n,
        used=used,
        excluded_close=close,
        excluded_unmapped=unmapped,
        excluded_inexact=inexact,
        max_expansion=max_exp,
        max_contraction=max_con,
        guaranteed_expansion=g_exp,
        guaranteed_contraction=g_con,
        seed=seed,
        min_separation=min_sep,
        violations=violations,
    )


class IdentityMap:
    """Identity on a surface; the trivial piecewise map."""

    guaranteed_expansion = 1.0
    guaranteed_contraction = 1.0
    guaranteed_bound = 1.0

    def push(self, pt):
        return pt


# -- flattening estimates --------------------------------------------------------


def _base_boundary_points(att, per_edge):
    """Sample points along the star boundary (the base edges), with the base
    slot and edge parameter retained."""
    surface = att.surface
    pts = []
    for f in sorted(att.star_faces):
        for s in range(3):
            g = surface.gluing.get((f, s))
            if g is None or g[0] not in att.collar_faces:
                continue
            for k in range(1, per_edge + 1):
                t = k / (per_edge + 1)
                pts.append(((f, s), t, SurfacePoint.edge_point(surface, f, s, t)))
    return pts


def flattening_report(result, per_edge=6, ortho_tol=0.1, seed=0):
    """Check the flattening's geometric estimates.

    (a) radial lengths: |image(center) image(X)| close to d(center, X) for
        boundary samples X, reported as the smallest factor c_star with
        residual <= c_star * delta * d(center, X);
    (b) near-orthogonality: the image boundary meets image radial segments
        within ortho_tol of a right angle;
    (c) residual flatness of the final surface.
    """
    att = result.attached
    surface = att.surface
    center_pt = SurfacePoint.vertex_point(surface, att.center)
    center_img = result.plmap.evaluate(center_pt)
    if center_img is None:
        raise SurfaceError("flatten-report", "center image missing")
    samples = _base_boundary_points(att, per_edge)
    delta = result.params.delta

    radial_entries = []
    worst_resid = 0.0
    c_star = 0.0
    for slot, t, pt in samples:
        d_src = shortest_path(surface, center_pt, pt).length
        img = result.plmap.evaluate(pt)
        if img is None:
            continue
        d_img = math.hypot(img[0] - center_img[0], img[1] - center_img[1])
        resid = abs(d_img - d_src)
        worst_resid = max(worst_resid, resid)
        if d_src > 0:
            c_star = max(c_star, resid / (delta * d_src))
        radial_entries.append(
            {"slot": list(slot), "t": t, "source": d_src, "image": d_img}
        )

    ortho_entries = []
    ortho_pass = True
    worst_dev = 0.0
    h = 1e-4
    for slot, t, pt in samples:
        f, s = slot
        t0, t1 = max(1e-6, t - h), min(1.0 - 1e-6, t + h)
        p0 = result.plmap.evaluate(SurfacePoint.edge_point(surface, f, s, t0))
        p1 = result.plmap.evaluate(SurfacePoint.edge_point(surface, f, s, t1))
        img = result.plmap.evaluate(pt)
        if p0 is None or p1 is None or img is None:
            continue
        tang = (p1[0] - p0[0], p1[1] - p0[1])
        rad = (img[0] - center_img[0], img[1] - center_img[1])
        nt, nr = math.hypot(*tang), math.hypot(*rad)
        if nt == 0 or nr == 0:
            continue
        cosang = (tang[0] * rad[0] + tang[1] * rad[1]) / (nt * nr)
        dev = abs(math.acos(min(1.0, max(-1.0, cosang))) - math.pi / 2.0)
        worst_dev = max(worst_dev, dev)
        if dev > ortho_tol:
            ortho_pass = False
        ortho_entries.append({"slot": list(slot), "t": t, "deviation": float(dev)})

    return {
        "radial": {
            "samples": len(radial_entries),
            "worst_residual": float(worst_resid),
            "fitted_c_star": float(c_star),
            "delta": float(delta),
        },
        "orthogonality": {
            "samples": len(ortho_entries),
            "worst_deviation": float(worst_dev),
            "tolerance": ortho_tol,
            "pass": bool(ortho_pass),
        },
        "flatness": {
            "residual_total": result.report["residual_total"],
            "residual_worst": result.report["residual_worst"],
        },
    }


# -- class-scale bounds -------------------------------------------------------------


def class_bounds_report(surface, region=None, net=None, diam_radius=None, seed=0,
                        boundary_samples=48, interior_samples=200):
    """Area bound, optional cap-region inradius bound, and net scaling.

    The area of a closed surface must stay below (2*pi + negative part)
    times the squared diameter upper bound; a simply connected cap bounded
    by a loop of length 2*r0 with positive part at least pi has inradius at
    most 2*r0 / sin(positive_part / 2).
    """
    from .geodesics import diameter_estimate

    out = {}
    rep = curvature(surface)
    if not surface.boundary_slots:
        r = diam_radius if diam_radius is not None else _diameter_proxy(surface) / 4.0
        lo, hi = diameter_estimate(surface, r, seed=seed)
        area = surface.area()
        bound = (TWO_PI + rep.negative_total) * hi * hi
        out["area"] = {
            "area": float(area),
            "diameter_interval": [float(lo), float(hi)],
            "bound": float(bound),
            "pass": bool(area <= bound + 1e-9),
        }
    if region is not None:
        pos, neg, turns = _region_parts(surface, region)
        cycles = region.boundary_cycles
        if not region.is_disk():
            raise SurfaceError("cap", "inradius bound needs a simply connected cap")
        blen = 0.0
        for f, s in cycles[0]:
            blen += surface.faces[f][s]
        r0 = blen / 2.0
        rng = np.random.default_rng(seed)
        bpts = []
        for f, s in cycles[0]:
            for k in range(1, max(2, boundary_samples // len(cycles[0])) + 1):
                t = k / (max(2, boundary_samples // len(cycles[0])) + 1)
                bpts.append(SurfacePoint.edge_point(surface, f, s, t))
            bpts.append(SurfacePoint.edge_point(surface, f, s, 1e-9))
        draw = face_sampler(surface, rng, faces=sorted(region.faces))
        probes = [draw() for _ in range(interior_samples)]
        for v in region.interior_vertices():
            probes.append(SurfacePoint.vertex_point(surface, v))
        inradius = 0.0
        for p in probes:
            d = min(shortest_path(surface, p, q).length for q in bpts)
            inradius = max(inradius, d)
        if pos < math.pi or pos >= TWO_PI:
            bound = math.inf
        else:
            bound = 2.0 * r0 / math.sin(pos / 2.0)
        out["inradius"] = {
            "positive_part": float(pos),
            "boundary_length": float(blen),
            "sampled_inradius": float(inradius),
            "bound": float(bound),
            "pass": bool(inradius <= bound + 1e-6 + 1e-2),
        }
    if net is not None:
        out["net"] = {
            "radius": float(net.radius),
            "cardinality": len(net),
            "cardinality_times_r2": float(net.cardinality_scaling),
        }
    return out


def _region_parts(surface, region):
    pos = neg = 0.0
    for v in region.interior_vertices():
        w = surface.defect(v)
        if w > 0:
            pos += w
        else:
            neg += -w
    return pos, neg, region.boundary_vertex_turns()
