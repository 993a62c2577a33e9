"""Scenario files (TOML) and their validation."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .dynamics import DriftField, affine_drift, check_assumption, constant_drift
from .geometry import (Ball, Box, ConvexSet, Halfspace, Intersection, MovingConvexSet,
                       PathSegment, TranslationPath)
from .measures import DiscreteMeasure, uniform_grid
from .tolerances import TOL


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the offending field."""


@dataclass
class Scenario:
    name: str
    dimension: int
    horizon: float
    drift: DriftField
    moving_set: MovingConvexSet
    initial: DiscreteMeasure
    schemes: dict
    diagnostics: dict
    output: str | None = None
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return doc[key]


def _vector(doc: dict, key: str, where: str, dim: int) -> np.ndarray:
    val = np.atleast_1d(np.asarray(_field(doc, key, where), dtype=float))
    if val.shape != (dim,):
        raise ScenarioError(f"{where}.{key}: expected {dim} components, got {val.size}")
    return val


def _positive(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: expected a number, got {value!r}") from exc
    if not v > 0:
        raise ScenarioError(f"{where}: must be > 0, got {value!r}")
    return v


def build_set(doc: dict, dim: int, where: str = "set") -> ConvexSet:
    kind = _field(doc, "kind", where)
    try:
        if kind == "halfspace":
            return Halfspace.from_inequality(_vector(doc, "normal", where, dim), float(_field(doc, "offset", where)))
        if kind == "ball":
            return Ball(_vector(doc, "center", where, dim), float(_field(doc, "radius", where)))
        if kind == "box":
            return Box(_vector(doc, "lower", where, dim), _vector(doc, "upper", where, dim))
        if kind == "intersection":
            parts = [build_set(c, dim, f"{where}.components[{i}]")
                     for i, c in enumerate(_field(doc, "components", where))]
            witness = doc.get("witness")
            return Intersection(tuple(parts), None if witness is None else np.asarray(witness, dtype=float))
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    raise ScenarioError(f"{where}.kind: unknown set kind {kind!r}")


def build_moving_set(doc: dict, dim: int, horizon: float) -> MovingConvexSet:
    base = build_set(doc, dim)
    L_s = float(doc.get("lipschitz", 0.0))
    if L_s < 0:
        raise ScenarioError("set.lipschitz: must be >= 0")
    motion = doc.get("motion")
    if motion is None:
        return replace(MovingConvexSet.static(base, horizon), lipschitz=L_s)
    segs = []
    for i, seg in enumerate(_field(motion, "segments", "set.motion")):
        where = f"set.motion.segments[{i}]"
        coeffs = np.asarray(_field(seg, "coeffs", where), dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[1] != dim:
            raise ScenarioError(f"{where}.coeffs: expected rows of {dim} components")
        try:
            segs.append(PathSegment(float(_field(seg, "start", where)), float(_field(seg, "end", where)), coeffs))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    try:
        path = TranslationPath(tuple(segs))
    except ValueError as exc:
        raise ScenarioError(f"set.motion: {exc}") from exc
    return MovingConvexSet.translating(base, path, L_s, horizon)


def build_drift(doc: dict, dim: int) -> DriftField:
    kind = _field(doc, "kind", "drift")
    L = doc.get("lipschitz")
    if kind == "constant":
        return constant_drift(_vector(doc, "value", "drift", dim), L)
    if kind == "affine":
        A = np.asarray(_field(doc, "matrix", "drift"), dtype=float)
        if A.shape != (dim, dim):
            raise ScenarioError(f"drift.matrix: expected shape ({dim}, {dim}), got {A.shape}")
        return affine_drift(A, _vector(doc, "offset", "drift", dim), L)
    raise ScenarioError(f"drift.kind: unknown drift kind {kind!r}")


def build_initial(doc: dict, dim: int, seed: int | None = None) -> DiscreteMeasure:
    kind = _field(doc, "kind", "initial")
    if kind == "dirac":
        return DiscreteMeasure.dirac(_vector(doc, "point", "initial", dim))
    if kind == "atoms":
        pts = np.asarray(_field(doc, "points", "initial"), dtype=float).reshape(-1, dim)
        w = np.asarray(_field(doc, "weights", "initial"), dtype=float)
        return DiscreteMeasure(pts, w)
    if kind == "grid":
        region = Box(_vector(doc, "lower", "initial", dim), _vector(doc, "upper", "initial", dim))
        return uniform_grid(region, int(_field(doc, "cells_per_axis", "initial")))
    if kind == "random":
        # uniform atoms in a box; only this kind depends on the seed
        rng = np.random.default_rng(int(doc.get("seed", 0) if seed is None else seed))
        lo, hi = _vector(doc, "lower", "initial", dim), _vector(doc, "upper", "initial", dim)
        count = int(_field(doc, "count", "initial"))
        return DiscreteMeasure.uniform(rng.uniform(lo, hi, size=(count, dim)))
    raise ScenarioError(f"initial.kind: unknown measure kind {kind!r}")


def parse_scenario(text: str, source: str = "<string>", seed: int | None = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc
    name = str(_field(doc, "name", "scenario"))
    dim = int(_field(doc, "dimension", "scenario"))
    if dim < 1:
        raise ScenarioError("dimension: must be >= 1")
    horizon = _positive(_field(doc, "horizon", "scenario"), "horizon")
    drift = build_drift(_field(doc, "drift", "scenario"), dim)
    ms = build_moving_set(_field(doc, "set", "scenario"), dim, horizon)
    mu0 = build_initial(_field(doc, "initial", "scenario"), dim, seed)
    schemes = dict(_field(doc, "schemes", "scenario"))
    for sname, params in schemes.items():
        if sname not in ("timestepping", "reference", "regularized"):
            raise ScenarioError(f"schemes.{sname}: unknown scheme")
        if sname == "timestepping":
            _positive(_field(params, "tau", "schemes.timestepping"), "schemes.timestepping.tau")
        if sname == "reference":
            _positive(params.get("tau_ref", 1e-5), "schemes.reference.tau_ref")
        if sname == "regularized":
            for i, lam in enumerate(_field(params, "lambdas", "schemes.regularized")):
                _positive(lam, f"schemes.regularized.lambdas[{i}]")
            _positive(_field(params, "h_ratio", "schemes.regularized"), "schemes.regularized.h_ratio")
    return Scenario(name, dim, horizon, drift, ms, mu0, schemes, dict(doc.get("diagnostics", {})),
                    doc.get("output"), source, doc)


def packaged_names() -> list[str]:
    root = resources.files("sweepflow") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def read_scenario_text(ref: str) -> tuple[str, str]:
    """File path, or the name of a packaged scenario."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(), str(path)
    res = resources.files("sweepflow") / "scenarios" / f"{ref}.toml"
    if res.is_file():
        return res.read_text(), f"packaged:{ref}"
    raise ScenarioError(f"no scenario file or packaged scenario named {ref!r}; packaged: {packaged_names()}")


def load_scenario(ref: str, seed: int | None = None) -> Scenario:
    text, source = read_scenario_text(ref)
    return parse_scenario(text, source, seed)


def validate(scn: Scenario, lipschitz_samples: int = 64) -> list[str]:
    """Dry-run checks; returns human-readable failures (empty when valid)."""
    failures = []
    failures += [f"assumption 1: {m}" for m in check_assumption(scn.drift, scn.dimension, scn.horizon)]
    failures += [f"assumption 2: {m}" for m in scn.moving_set.check_lipschitz(lipschitz_samples)]
    res = np.atleast_1d(scn.moving_set.residual(0.0, scn.initial.points))
    for i in np.nonzero(res > TOL.membership)[0]:
        failures.append(f"initial atom {int(i)} at {scn.initial.points[i].tolist()} lies outside S(0) "
                        f"(residual {res[i]:.3e})")
    reg = scn.schemes.get("regularized")
    if reg is not None:
        ratio = float(reg["h_ratio"])
        if ratio > 0.1 * (1 + 1e-12):
            failures.append(f"stiffness guard: h = {ratio:g} * lambda exceeds lambda/10")
    for sname, params in scn.schemes.items():
        step = params.get("tau", params.get("tau_ref"))
        if step is not None and float(step) > scn.horizon:
            failures.append(f"schemes.{sname}: step {step} exceeds the horizon {scn.horizon}")
    return failures


def first_moment_times(scn: Scenario) -> list[float]:
    return [float(t) for t in scn.diagnostics.get("first_moment_times", [])]


def check_time_grid(times, horizon: float, where: str) -> None:
    for t in times:
        if not (0.0 <= t <= horizon + 1e-12) or math.isnan(t):
            raise ScenarioError(f"{where}: time {t} outside [0, {horizon}]")
