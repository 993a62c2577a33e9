"""Numerical tolerances shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    membership: float = 1e-9
    merge: float = 1e-14
    mass: float = 1e-12
    marginal: float = 1e-10
    unit_normal: float = 1e-12
    plan_mass_floor: float = 1e-15
    lipschitz_sampling: float = 1e-8
    projection_step: float = 1e-12
    projection_max_iter: int = 10_000
    boundary_band: float = 1e-6


TOL = Tolerances()
