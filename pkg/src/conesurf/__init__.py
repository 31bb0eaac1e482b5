from .core import (
    ClassParams,
    ConeSurface,
    CurvatureReport,
    Region,
    SurfaceError,
    Tolerances,
    check_class,
    corner_angles,
    curvature,
    emit_surface,
    load_surface,
    region_curvature,
)

__all__ = [
    "ClassParams",
    "ConeSurface",
    "CurvatureReport",
    "Region",
    "SurfaceError",
    "Tolerances",
    "check_class",
    "corner_angles",
    "curvature",
    "emit_surface",
    "load_surface",
    "region_curvature",
]
