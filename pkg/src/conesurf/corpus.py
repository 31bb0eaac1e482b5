"""Generators for test surfaces: flat tori, platonic solids, cone stars,
and randomly perturbed in-class surfaces."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .core import TWO_PI, ConeSurface, SurfaceError, load_surface


def mesh_from_embedding(points, triangles, chi=None):
    """Surface document from an embedded triangle mesh.

    ``triangles`` must be consistently oriented (each shared edge traversed
    in opposite directions by its two faces).
    """
    points = np.asarray(points, dtype=float)
    faces = []
    directed = {}
    for fi, (i, j, k) in enumerate(triangles):
        # side s opposite corner s; corners in the given order
        faces.append(
            [
                float(np.linalg.norm(points[j] - points[k])),
                float(np.linalg.norm(points[k] - points[i])),
                float(np.linalg.norm(points[i] - points[j])),
            ]
        )
        idx = (i, j, k)
        for s in range(3):
            tail, head = idx[(s + 1) % 3], idx[(s + 2) % 3]
            directed[(tail, head)] = (fi, s)
    pairs = []
    seen = set()
    for (tail, head), slot in directed.items():
        if (tail, head) in seen:
            continue
        other = directed.get((head, tail))
        if other is None:
            continue  # boundary edge
        seen.add((tail, head))
        seen.add((head, tail))
        pairs.append([list(slot), list(other)])
    doc = {"faces": faces, "gluing": pairs}
    if chi is not None:
        doc["chi"] = chi
    return doc


def flat_torus(width=1.0, height=1.0):
    """1x1 (or a x b) flat torus: two right triangles with opposite sides of
    the rectangle identified."""
    w, h = float(width), float(height)
    d = math.hypot(w, h)
    # T0 = (A, B, C), T1 = (A, C, D) for rectangle A B C D
    faces = [[h, d, w], [w, h, d]]
    gluing = [
        [[0, 2], [1, 0]],  # AB ~ DC
        [[0, 0], [1, 1]],  # BC ~ AD
        [[0, 1], [1, 2]],  # shared diagonal AC
    ]
    return {"faces": faces, "gluing": gluing, "chi": 0}


_PLATONIC_COORDS = {
    "tetrahedron": (
        [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)],
        [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)],
    ),
    "octahedron": (
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
        [
            (0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
            (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5),
        ],
    ),
    "icosahedron": None,  # filled below
}


def _icosahedron():
    phi = (1 + math.sqrt(5)) / 2
    pts = []
    for a, b in ((1, phi), (-1, phi), (1, -phi), (-1, -phi)):
        pts.append((0, a, b))
        pts.append((a, b, 0))
        pts.append((b, 0, a))
    pts = np.array(pts, dtype=float)
    # faces by nearest-neighbor edges, oriented outward
    from itertools import combinations

    edge_len = np.min(
        [np.linalg.norm(pts[i] - pts[j]) for i, j in combinations(range(12), 2)]
    )
    tris = []
    for i, j, k in combinations(range(12), 3):
        dij = np.linalg.norm(pts[i] - pts[j])
        djk = np.linalg.norm(pts[j] - pts[k])
        dki = np.linalg.norm(pts[k] - pts[i])
        if max(dij, djk, dki) < edge_len * 1.01:
            n = np.cross(pts[j] - pts[i], pts[k] - pts[i])
            c = (pts[i] + pts[j] + pts[k]) / 3
            tris.append((i, j, k) if np.dot(n, c) > 0 else (i, k, j))
    return pts, tris


def platonic(kind, scale=1.0):
    """Surface document for a platonic solid triangulation.

    "cube" uses 12 right isoceles triangles (legs ``scale``); the others have
    equilateral faces with edge ``scale``.
    """
    if kind == "cube":
        pts = np.array(
            [
                (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
            ],
            dtype=float,
        ) * scale
        quads = [
            (0, 3, 2, 1),  # bottom, outward = -z
            (4, 5, 6, 7),  # top
            (0, 1, 5, 4),  # front
            (1, 2, 6, 5),  # right
            (2, 3, 7, 6),  # back
            (3, 0, 4, 7),  # left
        ]
        tris = []
        for a, b, c, d in quads:
            tris.append((a, b, c))
            tris.append((a, c, d))
        return mesh_from_embedding(pts, tris, chi=2)
    if kind == "tetrahedron":
        pts, tris = _PLATONIC_COORDS["tetrahedron"]
        pts = np.array(pts, dtype=float)
        pts *= scale / np.linalg.norm(pts[0] - pts[1])
        return mesh_from_embedding(pts, tris, chi=2)
    if kind == "octahedron":
        pts, tris = _PLATONIC_COORDS["octahedron"]
        pts = np.array(pts, dtype=float)
        pts *= scale / math.sqrt(2.0)
        return mesh_from_embedding(pts, tris, chi=2)
    if kind == "icosahedron":
        pts, tris = _icosahedron()
        edge = np.linalg.norm(pts[tris[0][0]] - pts[tris[0][1]])
        return mesh_from_embedding(pts * (scale / edge), tris, chi=2)
    raise ValueError(f"unknown platonic kind {kind!r}")


def refined_flat_torus(n=3, width=1.0, height=1.0):
    """Flat torus on an n x n grid (2*n*n faces)."""
    w, h = float(width), float(height)
    pts = {}
    for i in range(n):
        for j in range(n):
            pts[(i, j)] = len(pts)
    coords = np.zeros((len(pts), 3))
    for (i, j), idx in pts.items():
        coords[idx] = (i * w / n, j * h / n, 0.0)
    tris = []
    for i in range(n):
        for j in range(n):
            a = pts[(i, j)]
            b = pts[((i + 1) % n, j)]
            c = pts[((i + 1) % n, (j + 1) % n)]
            d = pts[(i, (j + 1) % n)]
            tris.append((a, b, c))
            tris.append((a, c, d))
    # lengths must come from the flat metric, not the wrapped coordinates
    faces = []
    directed = {}
    dx, dy = w / n, h / n
    diag = math.hypot(dx, dy)
    for fi, (i, j, k) in enumerate(tris):
        if fi % 2 == 0:
            faces.append([dy, diag, dx])
        else:
            faces.append([dx, dy, diag])
        idx = (i, j, k)
        for s in range(3):
            tail, head = idx[(s + 1) % 3], idx[(s + 2) % 3]
            directed[(tail, head)] = (fi, s)
    pairs = []
    seen = set()
    for key, slot in directed.items():
        if key in seen:
            continue
        other = directed[(key[1], key[0])]
        seen.add(key)
        seen.add((key[1], key[0]))
        pairs.append([list(slot), list(other)])
    return {"faces": faces, "gluing": pairs, "chi": 0}


def cone_star_disk(cone_angle, m, radius=1.0, saddle=None):
    """Star-shaped disk document: ``m`` isoceles triangles fanned around a
    center whose total angle is ``cone_angle``.

    With ``saddle=(defect, distance, wedge)`` an extra interior vertex with
    the requested (signed) defect is inserted inside one wedge at the given
    distance from the center; the remaining interior stays flat, so all
    curvature is concentrated near the center.
    """
    if cone_angle <= 0:
        raise ValueError("cone angle must be positive")
    psi = cone_angle / m
    base = 2.0 * radius * math.sin(psi / 2.0)
    faces = []
    gluing = []
    # wedge i: corners (center, rim_i, rim_{i+1}); side 0 = base (rim edge),
    # side 1 = spoke to rim_i ... corner order (B, A_i, A_i+1):
    # side0 opposite B: A_i A_i+1 = base; side1 opposite A_i: A_i+1 B spoke;
    # side2 opposite A_i+1: B A_i spoke.
    for i in range(m):
        faces.append([base, radius, radius])
    for i in range(m):
        # spoke between wedge i and wedge i+1: side1 of face i is the spoke
        # from A_{i+1} to B; side2 of face i+1 is the spoke B to A_{i+1}
        gluing.append([[i, 1], [(i + 1) % m, 2]])
    doc = {"faces": faces, "gluing": gluing}
    if saddle is not None:
        defect, dist, wedge = saddle
        doc = _insert_interior_cone(doc, wedge, defect, dist, psi, radius, base)
    return doc


def _insert_interior_cone(doc, wedge, defect, dist, psi, radius, base):
    """Replace one wedge face of a star disk by a patch with a new interior
    vertex X carrying exactly the requested angle defect.

    X sits on the wedge bisector at ``dist`` from the center.  A radial slit
    runs from X to the wedge base; a flat angular wedge of size ``|defect|``
    is inserted in the slit (negative defect) or removed around it (positive
    defect).  The center keeps its angle, the legs stay straight, and the
    base picks up a turn at the slit foot, which lies on the disk boundary.
    """
    half = psi / 2.0
    h = radius * math.cos(half)       # distance from center to the base line
    rim_y = radius * math.sin(half)   # half the base length
    if not (0.0 < dist < h):
        raise SurfaceError("cone-insert", "saddle distance outside the wedge")
    d = dist
    leg = h - d                       # slit length from X to the base
    x_a0 = math.hypot(h - d, rim_y)   # |X A_i| = |X A_j|

    faces = [list(f) for f in doc["faces"]]
    gluing = [list(map(list, p)) for p in doc["gluing"]]
    nf = len(faces)

    # around-center halves: f1 = (B, A_i, X), f2 = (B, X, A_j)
    f1, f2 = wedge, nf
    faces[wedge] = [x_a0, d, radius]
    faces.append([x_a0, radius, d])
    remap = {(wedge, 2): (f1, 2), (wedge, 1): (f2, 1)}
    for pair in gluing:
        for end in pair:
            key = (end[0], end[1])
            if key in remap:
                end[0], end[1] = remap[key]
    gluing.append([[f1, 1], [f2, 2]])  # shared spoke B-X

    w = abs(defect)
    if defect < 0:
        # single slit, insert a wedge (X, P, Q) of apex angle w
        chord = 2.0 * leg * math.sin(w / 2.0)
        f3, f4, f5 = nf + 1, nf + 2, nf + 3
        faces.append([rim_y, leg, x_a0])   # f3 = (X, A_i, S)
        faces.append([rim_y, x_a0, leg])   # f4 = (X, S, A_j)
        faces.append([chord, leg, leg])    # f5 = (X, P, Q)
        gluing.append([[f1, 0], [f3, 2]])  # A_i-X
        gluing.append([[f2, 0], [f4, 1]])  # X-A_j
        gluing.append([[f4, 2], [f5, 1]])  # upper slit bank
        gluing.append([[f5, 2], [f3, 1]])  # lower slit bank
    else:
        # symmetric double slit, remove the middle wedge of angle w
        if w >= math.pi:
            raise SurfaceError("cone-insert", "removed wedge must be below pi")
        spread = leg * math.tan(w / 2.0)
        if spread >= rim_y - 1e-12 * radius:
            raise SurfaceError("cone-insert", "removed wedge reaches the legs")
        bank = leg / math.cos(w / 2.0)
        rim_piece = rim_y - spread
        f3, f4 = nf + 1, nf + 2
        faces.append([rim_piece, bank, x_a0])  # f3 = (X, A_i, S)
        faces.append([rim_piece, x_a0, bank])  # f4 = (X, S, A_j)
        gluing.append([[f1, 0], [f3, 2]])
        gluing.append([[f2, 0], [f4, 1]])
        gluing.append([[f3, 1], [f4, 2]])      # banks glued directly

    out = {"faces": faces, "gluing": gluing}
    if "chi" in doc:
        out["chi"] = doc["chi"]
    return out


def random_in_class(seed, n=3, defect_scale=0.25, width=1.0, height=1.0):
    """Flat torus perturbed by one +/- cone pair, staying inside a class with
    small C and eps around 1.

    The insertion spreads a little compensating curvature onto the three
    surrounding grid vertices, so the total stays 2*pi*chi = 0 exactly.
    """
    rng = np.random.default_rng(seed)
    doc = refined_flat_torus(n=n, width=width, height=height)
    n_faces = len(doc["faces"])
    f_pos = int(rng.integers(0, n_faces))
    f_neg = int(rng.integers(0, n_faces))
    while f_neg == f_pos:
        f_neg = int(rng.integers(0, n_faces))
    w = float(rng.uniform(0.3, 1.0)) * defect_scale
    doc = _insert_cone_in_face(doc, f_pos, +w)
    doc = _insert_cone_in_face(doc, f_neg, -w)
    return doc


def _insert_cone_in_face(doc, face, defect, bary=(1 / 3, 1 / 3, 1 / 3)):
    """Insert an interior vertex with the given defect inside a face of any
    surface document, scaling the three new spokes by a solved factor."""
    from .core import face_chart

    sides = doc["faces"][face]
    chart = face_chart(sides)
    x = bary[0] * chart[0] + bary[1] * chart[1] + bary[2] * chart[2]
    d = [float(np.linalg.norm(chart[c] - x)) for c in range(3)]
    target = TWO_PI - defect

    def angle_sum(lam):
        t = [lam * di for di in d]
        total = 0.0
        for c in range(3):
            p, q, opp = t[(c + 1) % 3], t[(c + 2) % 3], sides[c]
            cosv = (p * p + q * q - opp * opp) / (2.0 * p * q)
            total += math.acos(min(1.0, max(-1.0, cosv)))
        return total - target

    f1 = angle_sum(1.0)
    if abs(f1) < 1e-15:
        lam = 1.0
    else:
        step = 1.05 if f1 > 0 else 1 / 1.05
        hi = 1.0
        for _ in range(300):
            hi *= step
            try:
                if angle_sum(hi) * f1 < 0:
                    break
            except ValueError:
                raise SurfaceError("cone-insert", "defect out of reach for this face")
        else:
            raise SurfaceError("cone-insert", "no spoke scale achieves the defect")
        lam = brentq(angle_sum, min(1.0, hi), max(1.0, hi), xtol=1e-15, rtol=8.9e-16)
    t = [lam * di for di in d]

    faces = [list(f) for f in doc["faces"]]
    gluing = [list(map(list, p)) for p in doc["gluing"]]
    nf = len(faces)
    # face corners (0,1,2) -> three faces (X,1,2), (X,2,0), (X,0,1)
    new_ids = [face, nf, nf + 1]
    new_faces = [
        [sides[0], t[2], t[1]],
        [sides[1], t[0], t[2]],
        [sides[2], t[1], t[0]],
    ]
    faces[face] = new_faces[0]
    faces.append(new_faces[1])
    faces.append(new_faces[2])
    remap = {
        (face, 0): (new_ids[0], 0),
        (face, 1): (new_ids[1], 0),
        (face, 2): (new_ids[2], 0),
    }
    for pair in gluing:
        for end in pair:
            key = (end[0], end[1])
            if key in remap:
                end[0], end[1] = remap[key]
    for c in range(3):
        # spoke from X to corner (c+2): side1 of new face c glues to side2 of
        # new face (c+1)
        gluing.append([[new_ids[c], 1], [new_ids[(c + 1) % 3], 2]])
    out = {"faces": faces, "gluing": gluing}
    if "chi" in doc:
        out["chi"] = doc["chi"]
    return out


def generate_corpus(kind, seed=0, **params):
    """Emit a surface document by kind; every output loads cleanly."""
    if kind == "flat-torus":
        doc = flat_torus(params.get("width", 1.0), params.get("height", 1.0))
    elif kind == "platonic":
        doc = platonic(params.get("name", "cube"), params.get("scale", 1.0))
    elif kind == "cone-star":
        defect = params.get("defect", math.pi / 2)
        m = params.get("m", 8)
        doc = cone_star_disk(
            TWO_PI - defect, m, params.get("radius", 1.0), params.get("saddle")
        )
    elif kind == "random-in-class":
        doc = random_in_class(seed, n=params.get("n", 3))
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    load_surface(doc, allow_boundary=(kind == "cone-star"))
    return doc


def mixed_star_disk(center_defect, saddle_defect, m, radius=1.0, rho=0.01):
    """Star disk with the center defect at B and a second cone point X a
    short way out along spoke 0, which passes straight through it.

    Spoke 0 is the broken geodesic B -> X -> A_0 balanced at X (equal angles
    on both sides), so every rim vertex realizes distance ``radius`` from B.
    All faces come out of closed-form planar trigonometry.
    """
    if saddle_defect == 0 or center_defect >= TWO_PI:
        raise ValueError("need a nonzero second defect and center below 2*pi")
    theta = TWO_PI - center_defect
    psi = theta / m
    half_excess = -saddle_defect / 2.0  # bank turn at X on each side

    def law_cos(p, q, gamma):
        return math.sqrt(max(0.0, p * p + q * q - 2 * p * q * math.cos(gamma)))

    def tri_angle(adj1, adj2, opp):
        v = (adj1 * adj1 + adj2 * adj2 - opp * opp) / (2 * adj1 * adj2)
        return math.acos(min(1.0, max(-1.0, v)))

    # wedge 0 (between broken spoke 0 and spoke 1): quad B, X, A_0, A_1
    # T1 = (B, X, A_1) with apex angle psi at B
    d_xa1 = law_cos(rho, radius, psi)
    ang_x_t1 = tri_angle(rho, d_xa1, radius)
    bank = radius - rho  # |X A_0|
    # the wedge-0 side of the broken spoke holds angle pi + half_excess at X
    ang_x_t2 = math.pi + half_excess - ang_x_t1
    if not (0.0 < ang_x_t2 < math.pi):
        raise SurfaceError("mixed-star", "saddle too strong for this spoke layout")
    base0 = law_cos(bank, d_xa1, ang_x_t2)  # |A_0 A_1|
    base = 2.0 * radius * math.sin(psi / 2.0)

    faces = []
    gluing = []
    # labels: B = implicit via gluing; order faces so vertex classes emerge.
    # wedge 0: T1 = (B, X, A1): s0 = |X A1|, s1 = |A1 B| = radius, s2 = |B X|
    # T2 = (X, A0, A1): s0 = |A0 A1| = base0, s1 = |A1 X| = d_xa1, s2 = |X A0|
    T1 = 0
    faces.append([d_xa1, radius, rho])
    T2 = 1
    faces.append([base0, d_xa1, bank])
    gluing.append([[T1, 0], [T2, 1]])  # X-A1 diagonal
    # mirror wedge m-1: T1m = (B, A_{m-1}, X), T2m = (X, A_{m-1}, A_0)
    T1m = 2
    faces.append([d_xa1, rho, radius])   # s0=|A_{m-1} X|, s1=|X B|, s2=|B A_{m-1}|
    T2m = 3
    faces.append([base0, bank, d_xa1])   # (X, A_{m-1}, A_0): s0=base0, s1=|A0 X|=bank... 
    gluing.append([[T1m, 0], [T2m, 2]])
    gluing.append([[T1, 2], [T1m, 1]])   # shared spoke B-X
    gluing.append([[T2, 2], [T2m, 1]])   # shared bank X-A_0
    # plain wedges 1..m-2: face index 4 + (k-1) for wedge k
    for k in range(1, m - 1):
        faces.append([base, radius, radius])
    def wedge_face(k):
        if k == 0 or k == m - 1:
            raise ValueError
        return 4 + (k - 1)
    # spokes between consecutive plain wedges
    for k in range(1, m - 2):
        gluing.append([[wedge_face(k), 1], [wedge_face(k + 1), 2]])
    # spoke 1: wedge0's T1 side |A1 B|... T1 = (B, X, A1): side1 = |A1 B| spoke
    gluing.append([[T1, 1], [wedge_face(1), 2]])
    # spoke m-1: wedge m-2 to T1m: T1m = (B, A_{m-1}, X): side2 = |B A_{m-1}|
    gluing.append([[wedge_face(m - 2), 1], [T1m, 2]])
    return {"faces": faces, "gluing": gluing}


def cone_triangle(sides=(1.0, 1.1, 0.9), defect=0.01, bary=(1 / 3, 1 / 3, 1 / 3)):
    """Single geodesic triangle with one interior cone point: a disk of three
    faces meeting at the cone, sides straight, total curvature |defect|."""
    doc = {"faces": [list(sides)], "gluing": []}
    if defect != 0.0:
        doc = _insert_cone_in_face(doc, 0, defect, bary=bary)
    return doc
