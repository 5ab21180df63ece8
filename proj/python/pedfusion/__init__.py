"""Camera/lidar pedestrian distance fusion on simulated crossing scenarios."""

from ._core import (
    DistancePoly,
    FitReport,
    FusedOutput,
    FusionState,
    MainSensor,
    PedfusionError,
    Source,
    SpatialMap,
    Warning,
    align_camera_to_lidar,
    build_spatial_map,
    calibrate,
    camera_trusted,
    compute_roi,
    dbscan,
    default_scenario,
    eval_distance,
    fit_distance_poly,
    fuse,
    lk_flow,
    mask_threshold,
    min_eigen_scores,
    render_frame,
    replay,
    run,
    shi_tomasi,
    warn_level,
)

__all__ = [name for name in dir() if not name.startswith("_")]
