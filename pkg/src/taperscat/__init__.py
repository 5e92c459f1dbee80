"""Tapered-wave scattering simulation and direct boundary imaging in 2D."""

__version__ = "0.1.0"

from .forward import (DensitySolution, ExteriorDomainError, ForwardSolverError, NystromSolver,
                      eval_scattered, greens_rep_eval, mie_series_reference, solve_density)
from .geometry import BoundaryCurve, CurveSample, distance_to_curve, evaluate, sample_nodes, shape_registry
from .imaging import (Reconstruction, SamplingGrid, build_elongated_mesh, indicator, local_maxima,
                      point_source_fit, reconstruct, reconstruction_metrics, separated_domain_reconstruct)
from .incident import PlaneWave, TaperedWave, eval_F, eval_plane, eval_point_source, eval_tapered, eval_w
from .synthesis import (MeasurementConfig, ScatteringDataset, add_noise, build_directions, build_receivers,
                        load_dataset, save_dataset, synthesize)

__all__ = [
    "BoundaryCurve", "CurveSample", "DensitySolution", "ExteriorDomainError", "ForwardSolverError",
    "MeasurementConfig", "NystromSolver", "PlaneWave", "Reconstruction", "SamplingGrid",
    "ScatteringDataset", "TaperedWave", "add_noise", "build_directions", "build_elongated_mesh",
    "build_receivers", "distance_to_curve", "eval_F", "eval_plane", "eval_point_source",
    "eval_scattered", "eval_tapered", "eval_w", "evaluate", "greens_rep_eval", "indicator",
    "load_dataset", "local_maxima", "mie_series_reference", "point_source_fit", "reconstruct",
    "reconstruction_metrics", "sample_nodes", "save_dataset", "separated_domain_reconstruct",
    "shape_registry", "solve_density", "synthesize",
]
