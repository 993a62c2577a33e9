"""Measure evolution through sweeping processes.

Time-stepping with optimal-transport diagnostics, Moreau-Yosida regularized
particle flows with Wasserstein error bounds, and moment-constraint export.
"""

from .bounds import SystemConstants, kappa, oneD_bound, step_w2_bound
from .dynamics import DriftField, Trajectory, catching_up, constant_drift, integrate_regularized
from .evolution import (MeasureCurve, evolve_reference, evolve_regularized, evolve_timestepping,
                        interpolate_curve, step_measure)
from .geometry import (Ball, Box, Halfspace, Intersection, MovingConvexSet, ProjectionError,
                       TranslationPath, hausdorff, project, set_at, vi_residual)
from .measures import DiscreteMeasure, MultiIndex, moment, pushforward, uniform_grid
from .tolerances import TOL
from .transport import TransportPlan, brute_force_w, kantorovich, mccann_interpolate, w1_1d

__version__ = "0.1.0"

__all__ = [
    "Ball", "Box", "DiscreteMeasure", "DriftField", "Halfspace", "Intersection", "MeasureCurve",
    "MovingConvexSet", "MultiIndex", "ProjectionError", "SystemConstants", "TOL", "Trajectory",
    "TranslationPath", "TransportPlan", "brute_force_w", "catching_up", "constant_drift",
    "evolve_reference", "evolve_regularized", "evolve_timestepping", "hausdorff",
    "integrate_regularized", "interpolate_curve", "kantorovich", "kappa", "mccann_interpolate",
    "moment", "oneD_bound", "project", "pushforward", "set_at", "step_measure", "step_w2_bound",
    "uniform_grid", "vi_residual", "w1_1d",
]
