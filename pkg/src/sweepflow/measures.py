"""Finitely supported measures, push-forward and moments."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Box
from .tolerances import TOL


def _merge_atoms(points: np.ndarray, weights: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge atoms closer than ``tol`` in every coordinate; the first point in
    lexicographic order represents its cluster."""
    if len(points) <= 1:
        return points, weights
    order = np.lexsort(points.T[::-1])
    pts, wts = points[order], weights[order]
    if not np.any(np.all(np.abs(np.diff(pts, axis=0)) <= tol, axis=1)) and len(pts) < 3:
        return pts, wts
    reps: list[np.ndarray] = []
    acc: list[list[float]] = []
    for p, w in zip(pts, wts):
        j = len(reps) - 1
        hit = -1
        # reps are sorted by first coordinate, so only a short tail can match
        while j >= 0 and reps[j][0] >= p[0] - tol:
            if np.all(np.abs(reps[j] - p) <= tol):
                hit = j
                break
            j -= 1
        if hit < 0:
            reps.append(p)
            acc.append([w])
        else:
            acc[hit].append(w)
    merged_w = np.array([math.fsum(a) for a in acc])
    return np.array(reps), merged_w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms ``sum_i w_i delta_{x_i}``; points have shape (N, n)."""

    points: np.ndarray
    weights: np.ndarray
    merge_tol: float = field(default=TOL.merge, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        wts = np.array(self.weights, dtype=float).reshape(-1)
        if pts.ndim != 2 or len(pts) != len(wts):
            raise ValueError(f"points {pts.shape} and weights {wts.shape} do not match")
        if not np.all(np.isfinite(pts)):
            bad = np.nonzero(~np.all(np.isfinite(pts), axis=1))[0]
            raise ValueError(f"atoms {bad.tolist()} have non-finite coordinates")
        if np.any(wts < 0) or not np.all(np.isfinite(wts)):
            raise ValueError("weights must be finite and nonnegative")
        pts, wts = _merge_atoms(pts, wts, self.merge_tol)
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def dirac(cls, point, mass: float = 1.0) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [mass])

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points / self.total_mass

    def first_abs_moment(self) -> float:
        return float(self.weights @ np.linalg.norm(self.points, axis=1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x_{i + 1}" for i in range(self.dim)] + ["weight"])
        for p, wt in zip(self.points, self.weights):
            w.writerow([repr(float(c)) for c in p] + [repr(float(wt))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[-1] != "weight":
            raise ValueError("measure CSV must end with a 'weight' column")
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
        return cls(data[:, :-1], data[:, -1])

    def to_json(self, **metadata) -> str:
        doc = {"metadata": metadata, "dim": self.dim,
               "points": self.points.tolist(), "weights": self.weights.tolist()}
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        doc = json.loads(text)
        return cls(np.array(doc["points"], dtype=float).reshape(-1, doc["dim"]), doc["weights"])


@dataclass(frozen=True)
class MultiIndex:
    """Monomial t^a x^b v^c."""

    time_power: int
    space_powers: tuple
    velocity_powers: tuple = ()

    def __post_init__(self):
        b = tuple(int(v) for v in self.space_powers)
        c = tuple(int(v) for v in self.velocity_powers)
        if self.time_power < 0 or any(v < 0 for v in b + c):
            raise ValueError("multi-index powers must be nonnegative")
        object.__setattr__(self, "time_power", int(self.time_power))
        object.__setattr__(self, "space_powers", b)
        object.__setattr__(self, "velocity_powers", c)

    @property
    def degree(self) -> int:
        return self.time_power + sum(self.space_powers) + sum(self.velocity_powers)

    def exponents(self) -> tuple:
        return (self.time_power,) + self.space_powers + self.velocity_powers


def monomial(points: np.ndarray, powers: Sequence[int]) -> np.ndarray:
    """Evaluate prod_i x_i^{p_i} on each row (0**0 == 1)."""
    out = np.ones(len(points))
    for i, p in enumerate(powers):
        if p:
            out = out * points[:, i] ** p
    return out


def moment(mu: DiscreteMeasure, idx: MultiIndex, t: float = 0.0) -> float:
    """t^a * sum_i w_i x_i^b."""
    if any(idx.velocity_powers):
        raise ValueError("velocity moments need a velocity field; use the moments_sdp module")
    if len(idx.space_powers) != mu.dim:
        raise ValueError(f"multi-index has {len(idx.space_powers)} space powers for a {mu.dim}-D measure")
    return float(t) ** idx.time_power * float(mu.weights @ monomial(mu.points, idx.space_powers))


def pushforward(mu: DiscreteMeasure, g: Callable[[np.ndarray], np.ndarray], vectorized: bool = False) -> DiscreteMeasure:
    """Image measure g#mu. With ``vectorized`` the map receives the (N, n) stack."""
    if vectorized:
        images = np.asarray(g(mu.points), dtype=float).reshape(mu.points.shape[0], -1)
    else:
        images = np.array([np.atleast_1d(np.asarray(g(p), dtype=float)) for p in mu.points])
    bad = np.nonzero(~np.all(np.isfinite(images), axis=1))[0]
    if bad.size:
        raise ValueError(f"push-forward map produced a non-finite value at atom {int(bad[0])}")
    return DiscreteMeasure(images, mu.weights, mu.merge_tol)


def uniform_grid(region: Box, cells_per_axis: int) -> DiscreteMeasure:
    """Probability measure with one equal-weight atom per cell centre."""
    if cells_per_axis < 1:
        raise ValueError("cells_per_axis must be >= 1")
    width = region.upper - region.lower
    if np.any(width <= 0):
        raise ValueError("grid region must have positive width on every axis")
    axis = [(np.arange(cells_per_axis) + 0.5) / cells_per_axis for _ in range(region.dim)]
    mesh = np.meshgrid(*axis, indexing="ij")
    centres = region.lower + np.column_stack([m.ravel() for m in mesh]) * width
    count = cells_per_axis ** region.dim
    return DiscreteMeasure(centres, np.full(count, 1.0 / count))
