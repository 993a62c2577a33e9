"""Measure evolution: OT time-stepping, regularized particle flow, reference flow."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DriftField, catching_up_paths, regularized_paths
from .geometry import MovingConvexSet, vi_residual
from .measures import DiscreteMeasure, pushforward
from .tolerances import TOL
from .transport import kantorovich, mccann_interpolate


@dataclass(frozen=True, eq=False)
class MeasureCurve:
    """Snapshots of an evolving measure on a time grid.

    Atom positions are kept unmerged in ``paths`` (shape (K+1, N, n)) with the
    initial weights; merged snapshots are built on demand and cached.
    """

    times: np.ndarray
    paths: np.ndarray
    weights: np.ndarray
    scheme: str
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def snapshot(self, k: int) -> DiscreteMeasure:
        if k < 0:
            k += len(self.times)
        if k not in self._cache:
            self._cache[k] = DiscreteMeasure(self.paths[k], self.weights)
        return self._cache[k]

    def snapshots(self) -> list[DiscreteMeasure]:
        return [self.snapshot(k) for k in range(len(self.times))]

    def index_at(self, t: float) -> int:
        """Grid index k with times[k] == t (within 1e-12), else error."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the curve grid")
        return k

    def means(self) -> np.ndarray:
        return np.einsum("n,knd->kd", self.weights, self.paths) / self.weights.sum()

    def check(self, ms: MovingConvexSet | None = None) -> list[str]:
        """Mass conservation and (for projected schemes) support containment."""
        failures = []
        m0 = self.snapshot(0).total_mass
        if self.paths.shape[1] > 1:
            # with a single atom nothing can merge and the mass is the weight itself
            for k in range(len(self.times)):
                mk = (self._cache.get(k) or DiscreteMeasure(self.paths[k], self.weights)).total_mass
                if abs(mk - m0) > TOL.mass:
                    failures.append(f"step {k}: mass {mk!r} differs from initial mass {m0!r}")
        if ms is not None and self.scheme != "regularized":
            res = ms.residual_along(self.times, self.paths).max(axis=1)
            for k in np.nonzero(res > TOL.membership)[0][:5]:
                failures.append(f"step {k}: support leaves S(t={self.times[k]:.6g}) by {res[k]:.3e}")
        return failures

    def index_csv(self, pattern: str = "snapshot_{k:05d}.csv") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "filename", "mass", "support_size"])
        for k, t in enumerate(self.times):
            mu = self.snapshot(k)
            w.writerow([repr(float(t)), pattern.format(k=k), repr(mu.total_mass), mu.size])
        return buf.getvalue()


def _step_map(f: DriftField, ms: MovingConvexSet, t0: float, t1: float):
    def g(X):
        return ms.project(t1, X + (t1 - t0) * f(t0, X))
    return g


def _step_times(ms: MovingConvexSet, k: int, tau: float, t_next: float | None):
    t0 = k * tau
    t1 = min((k + 1) * tau, ms.horizon) if t_next is None else t_next
    return t0, t1


def step_measure(mu: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, k: int, tau: float,
                 t_next: float | None = None) -> DiscreteMeasure:
    """G^k # mu with G^k(x) = P_{S(t_{k+1})}(x + tau f(t_k, x))."""
    t0, t1 = _step_times(ms, k, tau, t_next)
    return pushforward(mu, _step_map(f, ms, t0, t1), vectorized=True)


def _require_support(mu: DiscreteMeasure, ms: MovingConvexSet) -> None:
    res = np.atleast_1d(ms.residual(0.0, mu.points))
    bad = np.nonzero(res > TOL.membership)[0]
    if bad.size:
        raise ValueError(f"initial atom {int(bad[0])} at {mu.points[bad[0]].tolist()} lies outside S(0)")


def evolve_timestepping(mu0: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, tau: float,
                        horizon: float | None = None) -> MeasureCurve:
    """Iterated push-forward under the catching-up map."""
    _require_support(mu0, ms)
    times, paths = catching_up_paths(f, ms, mu0.points, tau, horizon)
    return MeasureCurve(times, paths, np.array(mu0.weights), "timestepping", {"tau": tau})


def evolve_reference(mu0: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, tau_ref: float = 1e-5,
                     horizon: float | None = None) -> MeasureCurve:
    """Fine time-stepping run used as the exact flow."""
    curve = evolve_timestepping(mu0, f, ms, tau_ref, horizon)
    return MeasureCurve(curve.times, curve.paths, curve.weights, "reference", {"tau_ref": tau_ref})


def evolve_regularized(mu0: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, lam: float, h: float,
                       horizon: float | None = None) -> MeasureCurve:
    """Each atom follows the Moreau-Yosida flow; weights are unchanged."""
    _require_support(mu0, ms)
    times, paths = regularized_paths(f, ms, lam, mu0.points, h, horizon)
    return MeasureCurve(times, paths, np.array(mu0.weights), "regularized", {"lambda": lam, "h": h})


def interpolate_curve(curve: MeasureCurve, t: float, mode: str = "geodesic") -> DiscreteMeasure:
    """Geodesic (McCann) or piecewise-constant interpolation between snapshots."""
    times = curve.times
    if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
        raise ValueError(f"time {t} outside [0, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 1)
    if mode == "piecewise_constant":
        if abs(t - times[k]) <= 1e-15 * max(1.0, t):
            # t on the grid: the right-closed convention gives snapshot k itself
            return curve.snapshot(k)
        return curve.snapshot(k + 1)
    if mode != "geodesic":
        raise ValueError(f"unknown interpolation mode {mode!r}")
    if k == len(times) - 1 or t == times[k]:
        return curve.snapshot(k)
    s = (t - times[k]) / (times[k + 1] - times[k])
    mu, nu = curve.snapshot(k), curve.snapshot(k + 1)
    _, plan = kantorovich(mu, nu, 2)
    return mccann_interpolate(mu, nu, plan, s)


def discrete_velocity(mu: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, k: int, tau: float,
                      t_next: float | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per atom, (x, (G^k(x) - x) / dt)."""
    t0, t1 = _step_times(ms, k, tau, t_next)
    images = _step_map(f, ms, t0, t1)(mu.points)
    vel = (images - mu.points) / (t1 - t0)
    return [(x.copy(), v) for x, v in zip(mu.points, vel)]


def velocity_vi_residual(mu: DiscreteMeasure, f: DriftField, ms: MovingConvexSet, k: int, tau: float,
                         probes: np.ndarray | None = None, t_next: float | None = None) -> float:
    """Largest vi_residual(S_{k+1}, G^k(x), v - f, probes) over atoms; <= 0 up to rounding."""
    t0, t1 = _step_times(ms, k, tau, t_next)
    target = ms.at(t1)
    if probes is None:
        probes = target.sample_points(32)
    worst = -np.inf
    for x, v in discrete_velocity(mu, f, ms, k, tau, t_next):
        gx = x + (t1 - t0) * v
        w = v - f(t0, x)
        worst = max(worst, vi_residual(target, gx, w, probes))
    return float(worst)


def step_w2(curve: MeasureCurve) -> np.ndarray:
    """W_2(mu_{k+1}, mu_k) for every step (one LP each)."""
    return np.array([kantorovich(curve.snapshot(k + 1), curve.snapshot(k), 2)[0]
                     for k in range(len(curve) - 1)])
