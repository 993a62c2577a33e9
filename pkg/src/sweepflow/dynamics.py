"""Single-trajectory solvers: catching-up and the Moreau-Yosida regularized ODE."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import MovingConvexSet, ProjectionError
from .tolerances import TOL


@dataclass(frozen=True)
class DriftField:
    """Perturbation f(t, x) with declared constant L_f.

    ``func(t, x)`` takes a point of shape (n,). When ``vectorized`` is set it
    also accepts (N, n) stacks and returns the matching stack.
    """

    func: Callable
    lipschitz: float
    vectorized: bool = False

    def __post_init__(self):
        if not self.lipschitz >= 0:
            raise ValueError("declared L_f must be >= 0")

    def __call__(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 or self.vectorized:
            return np.asarray(self.func(t, x), dtype=float)
        return np.array([np.asarray(self.func(t, p), dtype=float) for p in x])


def constant_drift(value, lipschitz: float | None = None) -> DriftField:
    """f(t, x) = value. The growth bound needs L_f >= |value|."""
    v = np.atleast_1d(np.asarray(value, dtype=float))
    v.setflags(write=False)
    L = float(np.linalg.norm(v)) if lipschitz is None else lipschitz

    def f(t, x):
        out = np.empty(np.shape(x))
        out[...] = v
        return out

    return DriftField(f, L, vectorized=True)


def affine_drift(matrix, offset, lipschitz: float | None = None) -> DriftField:
    """f(t, x) = A x + c."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    c = np.atleast_1d(np.asarray(offset, dtype=float))
    L = max(float(np.linalg.norm(A, 2)), float(np.linalg.norm(c))) if lipschitz is None else lipschitz

    def f(t, x):
        return x @ A.T + c

    return DriftField(f, L, vectorized=True)


def check_assumption(f: DriftField, dim: int, horizon: float, samples: int = 200,
                     radius: float = 10.0, seed: int = 0, tol: float = TOL.lipschitz_sampling) -> list[str]:
    """Sampled check of |f(t,x)| <= L_f(1+|x|) and |f(t,x)-f(t,y)| <= L_f|x-y|."""
    rng = np.random.default_rng(seed)
    failures = []
    L = f.lipschitz + tol
    for _ in range(samples):
        t = rng.uniform(0.0, horizon)
        x = rng.uniform(-radius, radius, dim)
        y = rng.uniform(-radius, radius, dim)
        fx, fy = f(t, x), f(t, y)
        if np.linalg.norm(fx) > L * (1.0 + np.linalg.norm(x)):
            failures.append(f"growth bound violated at t={t:.6g}, x={x.tolist()}")
        if np.linalg.norm(fx - fy) > L * np.linalg.norm(x - y):
            failures.append(f"Lipschitz bound violated at t={t:.6g}, x={x.tolist()}, y={y.tolist()}")
        if len(failures) >= 5:
            break
    return failures


def time_grid(horizon: float, step: float) -> np.ndarray:
    """Uniform grid 0, step, 2 step, ... ending exactly at ``horizon``."""
    if not step > 0:
        raise ValueError("step must be > 0")
    n = max(1, int(math.ceil(horizon / step - 1e-9)))
    times = np.arange(n + 1, dtype=float) * step
    times[-1] = horizon
    return times


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    scheme: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must start at 0 and increase strictly")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory states must be finite")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        """Linear interpolation between grid states."""
        if not (self.times[0] <= t <= self.times[-1] * (1 + 1e-12)):
            raise ValueError(f"time {t} outside trajectory range [0, {self.times[-1]}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k >= len(self.times) - 1:
            return self.states[-1]
        t0, t1 = self.times[k], self.times[k + 1]
        s = (t - t0) / (t1 - t0)
        return (1 - s) * self.states[k] + s * self.states[k + 1]

    def parameter_label(self) -> str:
        return ";".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))

    def to_csv(self) -> str:
        n = self.states.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + ["scheme", "parameter"])
        label = self.parameter_label()
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(c)) for c in x] + [self.scheme, label])
        return buf.getvalue()


def regularized_rhs(f: DriftField, ms: MovingConvexSet, lam: float, t: float, x) -> np.ndarray:
    """f(t,x) - (x - P_{S(t)} x) / lam."""
    if not lam > 0:
        raise ValueError("regularization parameter lambda must be > 0")
    x = np.asarray(x, dtype=float)
    return f(t, x) - (x - ms.project(t, x)) / lam


def _check_start(ms: MovingConvexSet, x0: np.ndarray) -> None:
    res = np.atleast_1d(ms.residual(0.0, x0))
    bad = np.nonzero(res > TOL.membership)[0]
    if bad.size:
        pts = np.atleast_2d(x0)
        raise ValueError(f"initial state {pts[bad[0]].tolist()} (atom {int(bad[0])}) is not in S(0)")


def _guard_step(lam: float, h: float) -> None:
    if not lam > 0:
        raise ValueError("regularization parameter lambda must be > 0")
    if not h > 0:
        raise ValueError("step h must be > 0")
    if h > lam / 10 * (1 + 1e-12):
        raise ValueError(
            f"stiffness guard: step h={h:g} exceeds lambda/10={lam / 10:g}; "
            "the penalty term has rate 1/lambda and explicit Euler needs h <= lambda/10"
        )


def regularized_paths(f: DriftField, ms: MovingConvexSet, lam: float, X0: np.ndarray, h: float,
                      horizon: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Euler paths for a stack of starting points; states have shape (K+1, N, n)."""
    _guard_step(lam, h)
    X = np.array(X0, dtype=float)
    _check_start(ms, X)
    times = time_grid(ms.horizon if horizon is None else horizon, h)
    states = np.empty((len(times),) + X.shape)
    states[0] = X
    for k in range(len(times) - 1):
        t = times[k]
        X = X + (times[k + 1] - t) * (f(t, X) - (X - ms.project(t, X)) / lam)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError(f"regularized integration produced a non-finite state at step {k + 1}")
        states[k + 1] = X
    return times, states


def catching_up_paths(f: DriftField, ms: MovingConvexSet, X0: np.ndarray, tau: float,
                      horizon: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Catching-up iterates for a stack of starting points; states (K+1, N, n)."""
    X = np.array(X0, dtype=float)
    _check_start(ms, X)
    times = time_grid(ms.horizon if horizon is None else horizon, tau)
    states = np.empty((len(times),) + X.shape)
    states[0] = X
    for k in range(len(times) - 1):
        t = times[k]
        try:
            X = ms.project(times[k + 1], X + (times[k + 1] - t) * f(t, X))
        except ProjectionError as exc:
            raise ProjectionError(f"catching-up step {k + 1}: {exc}", exc.last_iterate, exc.residual) from exc
        states[k + 1] = X
    return times, states


def integrate_regularized(f: DriftField, ms: MovingConvexSet, lam: float, x0, h: float,
                          horizon: float | None = None) -> Trajectory:
    """Explicit Euler on the regularized ODE; requires h <= lam/10."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    times, states = regularized_paths(f, ms, lam, x0, h, horizon)
    return Trajectory(times, states, "regularized", {"lambda": lam, "h": h})


def catching_up(f: DriftField, ms: MovingConvexSet, x0, tau: float,
                horizon: float | None = None) -> Trajectory:
    """x_{k+1} = P_{S(t_{k+1})}(x_k + (t_{k+1}-t_k) f(t_k, x_k))."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    times, states = catching_up_paths(f, ms, x0, tau, horizon)
    return Trajectory(times, states, "catching_up", {"tau": tau})
