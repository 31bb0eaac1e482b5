"""Minimal SVG emission for planar developments."""

from __future__ import annotations


def development_to_svg(dev, stroke=0.002, margin=0.05, sector_rays=None):
    """SVG drawing of a development: one polygon per face, optional
    highlighted sector rays (lists of point pairs)."""
    x0, y0, x1, y1 = dev.bounds()
    w = x1 - x0
    h = y1 - y0
    pad = margin * max(w, h)
    view = f"{x0 - pad:.6f} {-(y1 + pad):.6f} {w + 2 * pad:.6f} {h + 2 * pad:.6f}"
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view}">',
        f'<g fill="#eef3f7" stroke="#47618a" stroke-width="{stroke * max(w, h):.6f}" '
        'stroke-linejoin="round">',
    ]
    for f in range(dev.surface.n_faces):
        pts = dev.face_polygon(f)
        path = " ".join(f"{x:.9f},{-y:.9f}" for x, y in pts)
        lines.append(f'<polygon points="{path}"/>')
    lines.append("</g>")
    if sector_rays:
        lines.append(
            f'<g fill="none" stroke="#c0392b" stroke-width="{1.5 * stroke * max(w, h):.6f}">'
        )
        for ray in sector_rays:
            path = "M " + " L ".join(f"{x:.9f} {-y:.9f}" for x, y in ray)
            lines.append(f'<path d="{path}"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
