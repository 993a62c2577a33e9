"""Closed convex sets, moving set families, projection and Hausdorff distance.

Every set works on single points of shape ``(n,)`` and on stacks of points of
shape ``(N, n)``; the returned array has the shape of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .tolerances import TOL


class ProjectionError(RuntimeError):
    """Alternating projections did not converge."""

    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.last_iterate = last_iterate
        self.residual = residual


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise ValueError(f"expected a point or a stack of points, got shape {arr.shape}")
    return arr, False


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


class ConvexSet:
    """Base class; subclasses implement ``_project`` and ``_residual`` on (N, n) stacks."""

    dim: int
    bounded: bool

    def project(self, x) -> np.ndarray:
        pts, single = _as_points(x)
        self._check_dim(pts)
        out = self._project(pts)
        return out[0] if single else out

    def residual(self, x):
        """Membership violation (0 inside); scalar for a point, array for a stack."""
        pts, single = _as_points(x)
        self._check_dim(pts)
        res = self._residual(pts)
        return float(res[0]) if single else res

    def contains(self, x, tol: float = TOL.membership):
        res = self.residual(x)
        return res <= tol if np.isscalar(res) else res <= tol

    def translate(self, v) -> "ConvexSet":
        raise NotImplementedError

    def sample_points(self, count: int = 16) -> np.ndarray:
        """Deterministic points inside the set, used as variational-inequality probes."""
        raise NotImplementedError

    def support_point(self, u: np.ndarray) -> np.ndarray:
        """A point of the set maximizing <u, x> (approximate for intersections)."""
        raise NotImplementedError

    def support_points(self, dirs: np.ndarray) -> np.ndarray:
        return np.array([self.support_point(u) for u in dirs])

    def _check_dim(self, pts: np.ndarray) -> None:
        if pts.shape[1] != self.dim:
            raise ValueError(f"point dimension {pts.shape[1]} does not match set dimension {self.dim}")

    def _project(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _residual(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """``{x : <normal, x> <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _frozen(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > TOL.unit_normal:
            raise ValueError(f"halfspace normal must have unit norm, got |n|={np.linalg.norm(n)!r}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_inequality(cls, a, b: float) -> "Halfspace":
        """Build ``{x : <a, x> <= b}`` for an arbitrary nonzero ``a``."""
        a = np.asarray(a, dtype=float)
        norm = np.linalg.norm(a)
        if norm == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        return cls(a / norm, b / norm)

    @property
    def dim(self) -> int:
        return self.normal.size

    bounded = False

    def _project(self, pts):
        excess = pts @ self.normal - self.offset
        if excess.max() <= 0.0:
            return pts.copy()
        return pts - np.maximum(excess, 0.0)[:, None] * self.normal

    def _residual(self, pts):
        return np.maximum(pts @ self.normal - self.offset, 0.0)

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        return Halfspace(self.normal, self.offset + float(self.normal @ v))

    def tangent_basis(self) -> np.ndarray:
        # rows span the hyperplane directions
        _, _, vt = np.linalg.svd(self.normal[None, :])
        return vt[1:]

    def sample_points(self, count=16):
        anchor = self.offset * self.normal
        pts = [anchor]
        for s in range(1, count + 1):
            pts.append(anchor - s * self.normal)
            for tv in self.tangent_basis():
                pts.append(anchor + s * tv)
                pts.append(anchor - s * (tv + self.normal))
        return np.array(pts)

    def support_point(self, u):
        raise ValueError("halfspace has no support point in general directions")


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        r = float(self.radius)
        if not r >= 0.0:
            raise ValueError(f"ball radius must be >= 0, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    bounded = True

    def _project(self, pts):
        d = pts - self.center
        r = np.linalg.norm(d, axis=1)
        out = pts.copy()
        outside = r > self.radius
        if np.any(outside):
            out[outside] = self.center + d[outside] * (self.radius / r[outside])[:, None]
        return out

    def _residual(self, pts):
        return np.maximum(np.linalg.norm(pts - self.center, axis=1) - self.radius, 0.0)

    def translate(self, v):
        return Ball(self.center + np.asarray(v, dtype=float), self.radius)

    def sample_points(self, count=16):
        dirs = sphere_directions(self.dim, count)
        return np.vstack([self.center, self.center + self.radius * dirs, self.center + 0.5 * self.radius * dirs])

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.center + self.radius * u / np.linalg.norm(u)


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.lower), _frozen(self.upper)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have the same dimension")
        if np.any(lo > hi):
            raise ValueError(f"box requires lower <= upper componentwise, got {lo} > {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    bounded = True

    def _project(self, pts):
        return np.clip(pts, self.lower, self.upper)

    def _residual(self, pts):
        over = np.maximum(self.lower - pts, pts - self.upper)
        return np.maximum(over.max(axis=1), 0.0)

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        return Box(self.lower + v, self.upper + v)

    def vertices(self) -> np.ndarray:
        return np.array([np.where(mask, self.upper, self.lower) for mask in product((False, True), repeat=self.dim)])

    def sample_points(self, count=16):
        centre = 0.5 * (self.lower + self.upper)
        return np.vstack([self.vertices(), centre])

    def support_point(self, u):
        return np.where(np.asarray(u) >= 0, self.upper, self.lower)


@dataclass(frozen=True, eq=False)
class Intersection(ConvexSet):
    """Intersection of convex sets, projected with Dykstra's cyclic scheme.

    ``witness`` is an optional point known to lie in every component; it
    certifies nonemptiness.
    """

    sets: tuple
    witness: np.ndarray | None = None
    max_iter: int = TOL.projection_max_iter
    step_tol: float = TOL.projection_step
    _samples: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise ValueError("intersection needs at least one set")
        dims = {s.dim for s in sets}
        if len(dims) != 1:
            raise ValueError(f"intersection components have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "sets", sets)
        if self.witness is not None:
            w = _frozen(self.witness)
            bad = [i for i, s in enumerate(sets) if s.residual(w) > TOL.membership]
            if bad:
                raise ValueError(f"witness point lies outside components {bad}")
            object.__setattr__(self, "witness", w)

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    @property
    def bounded(self) -> bool:
        # sufficient condition only; halfspace-only polytopes are reported unbounded
        return any(s.bounded for s in self.sets)

    def _residual(self, pts):
        return np.max([s._residual(pts) for s in self.sets], axis=0)

    def _project(self, pts):
        if len(self.sets) == 1:
            return self.sets[0]._project(pts)
        x = pts.copy()
        increments = [np.zeros_like(x) for _ in self.sets]
        # successive-iterate test relative to the coordinate scale
        tol = self.step_tol * max(1.0, float(np.max(np.abs(pts))))
        for _ in range(self.max_iter):
            x_start = x
            inc_change = 0.0
            for i, s in enumerate(self.sets):
                y = s._project(x + increments[i])
                new_inc = x + increments[i] - y
                inc_change = max(inc_change, float(np.max(np.abs(new_inc - increments[i]))))
                increments[i] = new_inc
                x = y
            step = float(np.max(np.abs(x - x_start)))
            if step < tol and inc_change < tol:
                res = float(np.max(self._residual(x)))
                if res <= TOL.membership:
                    return x
        raise ProjectionError(
            f"alternating projections did not converge in {self.max_iter} cycles",
            x,
            float(np.max(self._residual(x))),
        )

    def translate(self, v):
        w = None if self.witness is None else self.witness + np.asarray(v, dtype=float)
        return Intersection(tuple(s.translate(v) for s in self.sets), w, self.max_iter, self.step_tol)

    def _anchor(self) -> np.ndarray:
        if self.witness is not None:
            return np.array(self.witness)
        for s in self.sets:
            if isinstance(s, Ball):
                return self.project(s.center)
            if isinstance(s, Box):
                return self.project(0.5 * (s.lower + s.upper))
        return self.project(np.zeros(self.dim))

    def _radius_hint(self) -> float:
        radii = []
        for s in self.sets:
            if isinstance(s, Ball):
                radii.append(s.radius)
            elif isinstance(s, Box):
                radii.append(0.5 * float(np.linalg.norm(s.upper - s.lower)))
        return max(radii) if radii else 1.0

    def sample_points(self, count=16):
        if count not in self._samples:
            anchor = self._anchor()
            reach = 2.0 * self._radius_hint() + 1.0
            dirs = sphere_directions(self.dim, count)
            pts = np.vstack([anchor, self.project(anchor + reach * dirs)])
            pts.setflags(write=False)
            self._samples[count] = pts
        return self._samples[count]

    def support_point(self, u):
        return self.support_points(np.atleast_2d(u))[0]

    def support_points(self, dirs: np.ndarray) -> np.ndarray:
        dirs = np.asarray(dirs, dtype=float)
        reach = 1e2 * (self._radius_hint() + 1.0)
        unit = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        return self.project(self._anchor() + reach * unit)


def sphere_directions(dim: int, count: int) -> np.ndarray:
    """Deterministic unit vectors roughly evenly spread on the sphere."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    g = np.random.default_rng(0).standard_normal((count, dim))
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    g = np.vstack([axes, g])
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def project(convex_set: ConvexSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` (a point or stack of points) onto the set."""
    return convex_set.project(x)


# -- Hausdorff distance ------------------------------------------------------


class HausdorffDistance(NamedTuple):
    value: float
    exact: bool


def _translation(a: ConvexSet, b: ConvexSet, tol: float = 1e-12):
    """Vector ``v`` with ``b = a + v`` when this can be recognized, else None."""
    if type(a) is not type(b) or a.dim != b.dim:
        return None
    if isinstance(a, Ball):
        return b.center - a.center if abs(a.radius - b.radius) <= tol else None
    if isinstance(a, Box):
        if np.allclose(a.upper - a.lower, b.upper - b.lower, rtol=0.0, atol=tol):
            return b.lower - a.lower
        return None
    if isinstance(a, Halfspace):
        if np.allclose(a.normal, b.normal, rtol=0.0, atol=tol):
            return (b.offset - a.offset) * a.normal
        return None
    if isinstance(a, Intersection):
        if len(a.sets) != len(b.sets):
            return None
        parts = [_translation(sa, sb, tol) for sa, sb in zip(a.sets, b.sets)]
        if any(p is None for p in parts):
            return None
        rigid = [p for p, s in zip(parts, a.sets) if not isinstance(s, Halfspace)]
        normals = [s.normal for s in a.sets if isinstance(s, Halfspace)]
        shifts = [float(p @ s.normal) for p, s in zip(parts, a.sets) if isinstance(s, Halfspace)]
        if rigid:
            v = rigid[0]
            if any(not np.allclose(r, v, rtol=0.0, atol=tol) for r in rigid[1:]):
                return None
        else:
            v, *_ = np.linalg.lstsq(np.array(normals), np.array(shifts), rcond=None)
        if normals and not np.allclose(np.array(normals) @ v, shifts, rtol=0.0, atol=max(tol, 1e-10)):
            return None
        return v
    return None


def _one_sided_exact(a: ConvexSet, b: ConvexSet):
    """sup_{x in a} dist(x, b) when it is available in closed form."""
    if isinstance(a, Box):
        verts = a.vertices()
        return float(np.max(np.linalg.norm(verts - b.project(verts), axis=1)))
    if isinstance(a, Ball) and isinstance(b, Ball):
        return max(float(np.linalg.norm(a.center - b.center)) + a.radius - b.radius, 0.0)
    return None


def _one_sided_sampled(a: ConvexSet, b: ConvexSet, samples: int) -> float:
    pts = a.support_points(sphere_directions(a.dim, samples))
    return float(np.max(np.linalg.norm(pts - b.project(pts), axis=1)))


def hausdorff(a: ConvexSet, b: ConvexSet, samples: int = 256) -> HausdorffDistance:
    """Hausdorff distance between two convex sets.

    Exact for translates of a common shape, for pairs of balls and for box-sided
    suprema; otherwise a lower estimate from ``samples`` support points with
    ``exact=False``.
    """
    v = _translation(a, b)
    if v is not None:
        return HausdorffDistance(float(np.linalg.norm(v)), True)
    if not (a.bounded and b.bounded):
        raise ValueError("hausdorff undefined on unbounded pair")
    ab, ba = _one_sided_exact(a, b), _one_sided_exact(b, a)
    exact = ab is not None and ba is not None
    if ab is None:
        ab = _one_sided_sampled(a, b, samples)
    if ba is None:
        ba = _one_sided_sampled(b, a, samples)
    return HausdorffDistance(max(ab, ba), exact)


# -- moving sets ---------------------------------------------------------------


@dataclass(frozen=True)
class PathSegment:
    """Polynomial translation ``c(t) = sum_j coeffs[j] * (t - start)**j`` on [start, end]."""

    start: float
    end: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2:
            raise ValueError("segment coefficients must be a (degree+1, n) array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if not self.end > self.start:
            raise ValueError(f"segment must have end > start, got [{self.start}, {self.end}]")

    def __call__(self, t: float) -> np.ndarray:
        s = t - self.start
        out = np.zeros(self.coeffs.shape[1])
        for c in self.coeffs[::-1]:
            out = out * s + c
        return out

    def velocity(self, t: float) -> np.ndarray:
        s = t - self.start
        deriv = self.coeffs[1:] * np.arange(1, len(self.coeffs))[:, None]
        out = np.zeros(self.coeffs.shape[1])
        for c in deriv[::-1]:
            out = out * s + c
        return out


@dataclass(frozen=True)
class TranslationPath:
    """Continuous piecewise-polynomial translation path."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.start))
        if not segs:
            raise ValueError("translation path needs at least one segment")
        for prev, nxt in zip(segs, segs[1:]):
            if abs(prev.end - nxt.start) > 1e-12:
                raise ValueError(f"path segments leave a gap at t={prev.end}")
            jump = np.linalg.norm(prev(prev.end) - nxt(nxt.start))
            if jump > 1e-9:
                raise ValueError(f"translation path is discontinuous at t={nxt.start} (jump {jump:.3e})")
        object.__setattr__(self, "segments", segs)

    @property
    def dim(self) -> int:
        return self.segments[0].coeffs.shape[1]

    def _segment(self, t: float) -> PathSegment:
        for seg in self.segments:
            if t <= seg.end:
                return seg
        return self.segments[-1]

    def __call__(self, t: float) -> np.ndarray:
        return self._segment(t)(t)

    def max_speed(self, samples: int = 64) -> float:
        speed = 0.0
        for seg in self.segments:
            for t in np.linspace(seg.start, seg.end, samples):
                speed = max(speed, float(np.linalg.norm(seg.velocity(t))))
        return speed


@dataclass(frozen=True)
class MovingConvexSet:
    """Family ``t -> S(t)`` on [0, horizon] with a declared Lipschitz constant.

    Families built with :meth:`translating` or :meth:`static` keep the base
    shape, which gives a fast projection and exact Hausdorff distances.
    """

    generator: Callable[[float], ConvexSet]
    lipschitz: float
    horizon: float
    base: ConvexSet | None = None
    path: TranslationPath | None = None
    _time_slack: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        if not self.lipschitz >= 0:
            raise ValueError("declared Lipschitz constant must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")

    @classmethod
    def static(cls, convex_set: ConvexSet, horizon: float) -> "MovingConvexSet":
        return cls(lambda t: convex_set, 0.0, horizon, base=convex_set)

    @classmethod
    def translating(cls, base: ConvexSet, path: TranslationPath, lipschitz: float, horizon: float):
        if path.dim != base.dim:
            raise ValueError("translation path and base set dimensions differ")
        return cls(lambda t: base.translate(path(t)), lipschitz, horizon, base=base, path=path)

    @property
    def dim(self) -> int:
        return self.at(0.0).dim

    def _check_time(self, t: float) -> None:
        slack = self._time_slack * max(1.0, self.horizon)
        if not (-slack <= t <= self.horizon + slack):
            raise ValueError(f"time {t} outside [0, {self.horizon}]")

    def offset(self, t: float) -> np.ndarray | None:
        if self.base is None:
            return None
        return None if self.path is None else self.path(t)

    def at(self, t: float) -> ConvexSet:
        self._check_time(t)
        return self.generator(t)

    def project(self, t: float, x) -> np.ndarray:
        self._check_time(t)
        if self.base is not None:
            c = self.offset(t)
            if c is None:
                return self.base.project(x)
            return self.base.project(np.asarray(x, dtype=float) - c) + c
        return self.generator(t).project(x)

    def residual(self, t: float, x):
        self._check_time(t)
        if self.base is not None:
            c = self.offset(t)
            return self.base.residual(x if c is None else np.asarray(x, dtype=float) - c)
        return self.generator(t).residual(x)

    def _along(self, times, paths, op):
        times = np.asarray(times, dtype=float)
        paths = np.asarray(paths, dtype=float)
        K, N, n = paths.shape
        for t in (times[0], times[-1]):
            self._check_time(float(t))
        if self.path is None:
            return op(self.base, paths.reshape(K * N, n), None)
        offsets = np.repeat(np.array([self.path(float(t)) for t in times]), N, axis=0)
        return op(self.base, paths.reshape(K * N, n) - offsets, offsets)

    def project_along(self, times, paths) -> np.ndarray:
        """Projection of paths[k] (shape (K, N, n)) onto S(times[k])."""
        paths = np.asarray(paths, dtype=float)
        if self.base is None:
            return np.array([self.project(float(t), X) for t, X in zip(times, paths)])

        def op(base, flat, offsets):
            out = base.project(flat)
            return out if offsets is None else out + offsets

        return self._along(times, paths, op).reshape(paths.shape)

    def residual_along(self, times, paths) -> np.ndarray:
        """Membership residual of paths[k] (shape (K, N, n)) in S(times[k]); shape (K, N)."""
        paths = np.asarray(paths, dtype=float)
        if self.base is None:
            return np.array([np.atleast_1d(self.residual(float(t), X)) for t, X in zip(times, paths)])
        return self._along(times, paths, lambda base, flat, _: base.residual(flat)).reshape(paths.shape[:2])

    def check_lipschitz(self, samples: int = 64, tol: float = TOL.lipschitz_sampling) -> list[str]:
        """Sampled validation of d_H(S(s), S(t)) <= L_s |t - s|; returns failure messages."""
        ts = np.linspace(0.0, self.horizon, samples)
        failures = []
        for s, t in zip(ts[:-1], ts[1:]):
            d = hausdorff(self.at(s), self.at(t)).value
            if d > (self.lipschitz + tol) * abs(t - s):
                failures.append(
                    f"set motion on [{s:.6g}, {t:.6g}] has Hausdorff rate {d / abs(t - s):.6g} "
                    f"> declared L_s={self.lipschitz:.6g}"
                )
        return failures


def set_at(ms: MovingConvexSet, t: float) -> ConvexSet:
    return ms.at(t)


def vi_residual(convex_set: ConvexSet, x, w, probes: Sequence) -> float:
    """max over probes y of <y - x, -w>; a value <= tol certifies w in -N_set(x).

    ``x`` and each probe must lie in the set.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.size == 0:
        raise ValueError("vi_residual needs at least one probe point")
    if convex_set.residual(x) > TOL.membership:
        raise ValueError(f"point {x} is not in the set")
    outside = np.nonzero(convex_set.residual(probes) > TOL.membership)[0]
    if outside.size:
        raise ValueError(f"probe points {outside.tolist()} lie outside the set")
    return float(np.max((probes - x) @ (-w)))


def bounding_radius(convex_set: ConvexSet) -> float:
    """Radius of a ball about the origin containing the set (inf if unbounded)."""
    if isinstance(convex_set, Ball):
        return float(np.linalg.norm(convex_set.center)) + convex_set.radius
    if isinstance(convex_set, Box):
        return float(np.max(np.linalg.norm(convex_set.vertices(), axis=1)))
    if isinstance(convex_set, Intersection):
        return min(bounding_radius(s) for s in convex_set.sets)
    return math.inf
