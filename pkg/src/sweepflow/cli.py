"""Command-line scenario runner.

    sweepflow run <scenario> [--out DIR] [--seed N] [--quiet]
    sweepflow validate <scenario>

``<scenario>`` is a TOML file or the name of a packaged scenario. ``run``
exits with status 1 when any enabled invariant check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .evolution import (MeasureCurve, evolve_reference, evolve_regularized, evolve_timestepping,
                        step_w2)
from .geometry import Box
from .moments_sdp import (DiscScenario, SupportDescription, assemble_constraints, export_sdpa,
                          row_residuals, sidecar, simulated_moments)
from .scenario import Scenario, ScenarioError, load_scenario, packaged_names, validate
from .tolerances import TOL
from .transport import kantorovich, w1_1d

BOUND_SLACK = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunReport:
    scenario: str
    out_dir: Path
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, failures: list[str]) -> None:
        self.checks.append(Check(name, not failures, "; ".join(failures[:3])))


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _snapshot_indices(curve: MeasureCurve, selection) -> list[int]:
    if selection is None:
        return [0, len(curve) - 1]
    if selection == "all":
        return list(range(len(curve)))
    return sorted({int(np.argmin(np.abs(curve.times - float(t)))) for t in selection})


def _export_curve(curve: MeasureCurve, folder: Path, selection) -> None:
    idx = _snapshot_indices(curve, selection)
    rows = []
    for k in idx:
        mu = curve.snapshot(k)
        name = f"snapshot_{k:06d}.csv"
        _write(folder / name, mu.to_csv())
        rows.append([float(curve.times[k]), name, mu.total_mass, mu.size])
    _write(folder / "index.csv", _csv(rows, ["time", "filename", "mass", "support_size"]))


def _constants(scn: Scenario, curve: MeasureCurve) -> bounds.SystemConstants:
    mu0 = scn.initial
    return bounds.SystemConstants(
        L_f=scn.drift.lipschitz, L_s=scn.moving_set.lipschitz, T=scn.horizon,
        first_abs_moment=mu0.first_abs_moment(),
        x0_abs=float(np.max(np.linalg.norm(mu0.points, axis=1))),
        C_max=bounds.c_max_curve(curve),
    )


def _step_bound_check(report: RunReport, scn: Scenario, curve: MeasureCurve, folder: Path) -> None:
    c = _constants(scn, curve)
    w2 = step_w2(curve)
    dts = np.diff(curve.times)
    rows, failures = [], []
    for k, (w, dt) in enumerate(zip(w2, dts)):
        b = bounds.step_w2_bound(c, float(dt))
        rows.append([k + 1, float(curve.times[k + 1]), float(w), b])
        if w > b + BOUND_SLACK:
            failures.append(f"step {k + 1}: W2 {w:.6g} > bound {b:.6g}")
    _write(folder / "diagnostics.csv", _csv(rows, ["step", "t", "w2_step", "step_w2_bound"]))
    report.summary[f"{curve.scheme}_C_max"] = c.C_max
    report.add(f"{curve.scheme}: one-step W2 bound", failures)


def _holder_check(report: RunReport, scn: Scenario, curve: MeasureCurve, selection) -> None:
    c = _constants(scn, curve)
    idx = _snapshot_indices(curve, selection)
    failures = []
    for i in idx:
        for j in idx:
            if j <= i:
                continue
            s, t = float(curve.times[i]), float(curve.times[j])
            w = kantorovich(curve.snapshot(j), curve.snapshot(i), 2)[0]
            b = bounds.holder_bound(c, s, t)
            if w > b + BOUND_SLACK:
                failures.append(f"W2(mu_{t:.6g}, mu_{s:.6g}) = {w:.6g} > {b:.6g}")
    report.add(f"{curve.scheme}: Hoelder bound", failures)


def _phase_checks(report: RunReport, scn: Scenario, curve: MeasureCurve) -> None:
    ms = scn.moving_set
    for phase in scn.diagnostics.get("phases", []):
        k, kind = int(phase["step"]), phase["edge"]
        mu = curve.snapshot(k)
        t = float(curve.times[k])
        failures = []
        if kind == "single_atom":
            if mu.size != 1:
                failures.append(f"step {k}: {mu.size} atoms, expected one")
        else:
            S = ms.at(t)
            if not isinstance(S, Box):
                raise ScenarioError("diagnostics.phases: edge checks need a box set")
            axis, side = {"top": (1, "upper"), "bottom": (1, "lower"),
                          "left": (0, "lower"), "right": (0, "upper")}[kind]
            edge = getattr(S, side)[axis]
            gap = float(np.max(np.abs(mu.points[:, axis] - edge)))
            if gap > TOL.boundary_band:
                failures.append(f"step {k}: mass {gap:.3e} away from the {kind} edge")
        report.add(f"phase at step {k}: {kind}", failures)


def _first_moments(curve: MeasureCurve, times: list[float], folder: Path) -> list[list]:
    means = curve.means()
    rows = []
    for t in times:
        k = int(np.argmin(np.abs(curve.times - t)))
        rows.append([float(curve.times[k])] + [float(v) for v in means[k]])
    header = ["t"] + [f"m_{i + 1}" for i in range(curve.paths.shape[2])]
    _write(folder / "first_moments.csv", _csv(rows, header))
    return rows


def _moment_export(report: RunReport, scn: Scenario, curve: MeasureCurve, out: Path) -> None:
    k = int(scn.diagnostics["moments"])
    drift = scn.drift(0.0, np.zeros(scn.dimension))
    disc = DiscScenario(scn.horizon, float(getattr(scn.moving_set.base, "radius", 1.0)), tuple(drift))
    sim = simulated_moments(curve, k, disc.radius)
    sys_ = assemble_constraints(k, disc, sim["mu_0"])
    res = row_residuals(sys_, sim)
    rows = [[row.provenance[0], *row.provenance[1], row.degree, float(r)] for row, r in zip(sys_.rows, res)]
    _write(out / "moment_residuals.csv", _csv(rows, ["a", "b_1", "b_2", "degree", "residual"]))
    tol = float(scn.diagnostics.get("moment_tolerance", 0.05))
    max_deg = int(scn.diagnostics.get("moment_check_degree", 3))
    failures = [f"row {row.provenance}: residual {r:.3e}" for row, r in zip(sys_.rows, res)
                if row.degree <= max_deg and abs(r) > tol]
    report.add(f"moment rows of degree <= {max_deg} within {tol:g}", failures)
    if scn.diagnostics.get("sdpa_export", False):
        supports = SupportDescription.disc(scn.horizon, disc.radius)
        _write(out / f"moments_k{k}.dat-s", export_sdpa(sys_, supports))
        _write(out / f"moments_k{k}.json", sidecar(sys_, supports))


def _half_line_closed_form(lam: float, t: float) -> float:
    return abs(lam * math.expm1(-(t - 0.5) / lam)) if t >= 0.5 else 0.0


def _regularized(report: RunReport, scn: Scenario, ref: MeasureCurve, out: Path) -> None:
    params = scn.schemes["regularized"]
    times = [float(t) for t in scn.diagnostics.get("w1_times", [scn.horizon])]
    closed = scn.diagnostics.get("closed_form")
    ms = scn.moving_set
    rows, dominance, closed_fail, thm_fail, penalty_fail = [], [], [], [], []
    for lam in params["lambdas"]:
        lam = float(lam)
        curve = evolve_regularized(scn.initial, scn.drift, ms, lam, lam * float(params["h_ratio"]))
        c = _constants(scn, ref)
        for t in times:
            mu_l = curve.snapshot(curve.index_at(t))
            mu_r = ref.snapshot(ref.index_at(t))
            w = w1_1d(mu_l, mu_r) if scn.dimension == 1 else kantorovich(mu_l, mu_r, 1)[0]
            thm = bounds.thm_w1_bound(c, lam, t)
            row = [lam, t, w]
            if closed == "half_line":
                cf, ob = _half_line_closed_form(lam, t), bounds.oneD_bound(lam, t)
                row += [cf, ob]
                if not w < ob:
                    dominance.append(f"lambda={lam:g}, t={t:g}: W1 {w:.6g} >= {ob:.6g}")
                if abs(w - cf) > 1e-3:
                    closed_fail.append(f"lambda={lam:g}, t={t:g}: W1 {w:.6g} vs closed form {cf:.6g}")
            row.append(thm)
            if w > thm + BOUND_SLACK:
                thm_fail.append(f"lambda={lam:g}, t={t:g}: W1 {w:.6g} > {thm:.6g}")
            rows.append(row)
        pen = bounds.penalty_bound(c)
        gap = np.linalg.norm(curve.paths - ms.project_along(curve.times, curve.paths), axis=-1).max(axis=1) / lam
        for k in np.nonzero(gap > pen + BOUND_SLACK)[0][:1]:
            penalty_fail.append(f"lambda={lam:g}, t={curve.times[k]:g}: penalty {gap[k]:.6g} > {pen:.6g}")
    header = ["lambda", "t", "measured_w1"]
    if closed == "half_line":
        header += ["closed_form", "oned_bound"]
        report.add("regularized: W1 matches closed form within 1e-3", closed_fail)
        report.add("regularized: W1 strictly below the 1-D bound", dominance)
    header.append("thm_w1_bound")
    _write(out / "bounds.csv", _csv(rows, header))
    report.add("regularized: W1 below the general bound", thm_fail)
    report.add("regularized: penalty term bound", penalty_fail)


def run_scenario(scn: Scenario, out_dir: Path, quiet: bool = True) -> RunReport:
    out = Path(out_dir) / scn.name
    report = RunReport(scn.name, out)
    report.add("validation", validate(scn))
    ms, diag = scn.moving_set, scn.diagnostics
    snaps = diag.get("snapshot_times")

    if "timestepping" in scn.schemes:
        tau = float(scn.schemes["timestepping"]["tau"])
        curve = evolve_timestepping(scn.initial, scn.drift, ms, tau)
        folder = out / "timestepping"
        report.add("timestepping: mass and support", curve.check(ms))
        _export_curve(curve, folder, snaps)
        if diag.get("w2_per_step", False):
            _step_bound_check(report, scn, curve, folder)
        if diag.get("bounds", False):
            _holder_check(report, scn, curve, snaps)
        if diag.get("first_moment_times"):
            rows = _first_moments(curve, [float(t) for t in diag["first_moment_times"]], folder)
            m1 = [r[1] for r in rows]
            report.add("timestepping: first moment nondecreasing in x_1",
                       [f"m_1 decreases after t={rows[i][0]:g}" for i in range(len(m1) - 1) if m1[i + 1] < m1[i]])
        _phase_checks(report, scn, curve)
        if diag.get("moments"):
            _moment_export(report, scn, curve, out / "moments")

    ref = None
    if "reference" in scn.schemes:
        tau_ref = float(scn.schemes["reference"].get("tau_ref", 1e-5))
        ref = evolve_reference(scn.initial, scn.drift, ms, tau_ref)
        report.add("reference: mass and support", ref.check(ms))
        _export_curve(ref, out / "reference", snaps if snaps != "all" else None)

    if "regularized" in scn.schemes:
        if ref is None:
            raise ScenarioError("schemes.regularized: needs a [schemes.reference] run to compare against")
        _regularized(report, scn, ref, out)

    report.summary["checks"] = [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks]
    report.summary["scenario"] = scn.name
    _write(out / "summary.json", json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
    if not quiet:
        for c in report.checks:
            print(f"[{'pass' if c.passed else 'FAIL'}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        print(f"artifacts written to {out}")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sweepflow", description="Measure evolution through sweeping processes.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write artifacts")
    run.add_argument("scenario", help=f"TOML file or packaged name ({', '.join(packaged_names())})")
    run.add_argument("--out", default=None, help="output directory (default: $SWEEPFLOW_OUT, then the scenario's output field, then ./sweepflow-out)")
    run.add_argument("--seed", type=int, default=None, help="seed for randomized initial measures")
    run.add_argument("--quiet", action="store_true", help="suppress the per-check report")
    val = sub.add_parser("validate", help="dry-run checks without simulating")
    val.add_argument("scenario")
    val.add_argument("--seed", type=int, default=None)
    val.add_argument("--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.scenario, seed=args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        failures = validate(scn)
        if not args.quiet:
            for f in failures:
                print(f"FAIL {f}")
            print(f"{scn.name}: {len(failures)} failure(s)")
        return 0 if not failures else 1
    out = Path(args.out or os.environ.get("SWEEPFLOW_OUT") or scn.output or "sweepflow-out")
    try:
        report = run_scenario(scn, out, quiet=args.quiet)
    except (ScenarioError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
