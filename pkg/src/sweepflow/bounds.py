"""Closed-form error bounds for the regularized and time-stepped flows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SystemConstants:
    """Constants entering the bounds.

    ``L_f = 0`` is accepted so that pure sweeping scenarios (f identically 0)
    can evaluate the time-stepping bounds; the regularization bounds divide by
    ``L_f`` and reject it.
    """

    L_f: float
    L_s: float
    T: float
    first_abs_moment: float = 0.0
    x0_abs: float = 0.0
    C_max: float = 0.0

    def __post_init__(self):
        for name in ("L_f", "L_s", "first_abs_moment", "x0_abs", "C_max"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T!r}")


def _need_lf(c: SystemConstants) -> None:
    if c.L_f <= 0:
        raise ValueError("bound requires L_f > 0")


def _need_lambda(lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam!r}")


def kappa(c: SystemConstants) -> float:
    _need_lf(c)
    return math.expm1(2 * c.L_f * c.T) * (2 * c.L_f + c.L_s) / (2 * c.L_f)


def lemma_traj_bound(c: SystemConstants, lam: float, t: float) -> float:
    """Pointwise bound on |x^lambda(t) - x(t)| for one trajectory."""
    _need_lambda(lam)
    lead = c.L_f * (1 + kappa(c) + c.x0_abs) + c.L_s
    return lead * math.sqrt(lam * math.expm1(2 * c.L_f * t) / (2 * c.L_f))


def thm_w1_bound(c: SystemConstants, lam: float, t: float) -> float:
    """W_1 bound between the regularized and exact measure curves."""
    _need_lambda(lam)
    C1 = c.L_f * (1 + kappa(c)) + c.L_s
    return C1 * math.sqrt(c.L_f * lam * math.expm1(c.L_f * t) / 2) * c.first_abs_moment


def oneD_bound(lam: float, t: float) -> float:
    """(3/2) e^2 sqrt(lambda (e^t - 1) / 2) for the half-line example."""
    _need_lambda(lam)
    return 1.5 * math.e ** 2 * math.sqrt(lam * math.expm1(t) / 2)


def step_w2_bound(c: SystemConstants, tau: float) -> float:
    return tau * (c.L_f * c.C_max + c.L_s)


def holder_bound(c: SystemConstants, s: float, t: float) -> float:
    if t < s:
        s, t = t, s
    return math.sqrt(t - s) * (c.L_s + c.L_f * c.C_max) * math.sqrt(c.T)


def moment_diff_bound(k: int, R: float, w1: float) -> float:
    """|m_k(mu) - m_k(nu)| <= k R^(k-1) W_1 on a domain of radius R."""
    if k < 0:
        raise ValueError("moment degree must be >= 0")
    if k == 0:
        return 0.0
    return k * R ** (k - 1) * w1


def penalty_bound(c: SystemConstants) -> float:
    """Uniform bound on |(x^lambda - proj(x^lambda)) / lambda|."""
    return c.L_f * (1 + kappa(c) + math.exp(2 * c.L_f * c.T) * c.x0_abs) + c.L_s


def c_max(paths: np.ndarray, weights: np.ndarray) -> float:
    """max_k (sum_i w_i (1 + |x_k^i|)^2)^(1/2) over a run with paths (K+1, N, n)."""
    paths = np.asarray(paths, dtype=float)
    if paths.size == 0:
        raise ValueError("c_max needs a non-empty run")
    norms = np.linalg.norm(paths, axis=-1)
    return float(np.sqrt(np.max((1.0 + norms) ** 2 @ np.asarray(weights, dtype=float))))


def c_max_curve(curve) -> float:
    return c_max(curve.paths, curve.weights)
