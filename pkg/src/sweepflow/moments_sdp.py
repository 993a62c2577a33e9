"""Truncated moment form of the constrained continuity equation on the unit disc.

Three measures carry the moments:

* ``mu_S``        occupation measure of the interior, variables (t, x1, x2);
                  the velocity there equals the drift and is substituted.
* ``mu_boundary`` occupation measure of the circle, variables (t, x1, x2, v1, v2).
* ``mu_T``        terminal measure, variables (x1, x2).

Testing the weak continuity equation against t^a x^b gives, for every
a + |b| <= 2k - 1,

    T^a y^T_b - m^0_{a,b} = a y^S_{a-1,b} + a y^B_{a-1,b,0}
                            + sum_i b_i (c_i y^S_{a,b-e_i} + y^B_{a,b-e_i,e_i})

with c the constant drift and m^0_{a,b} = 0^a * int x^b dmu_0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .measures import MultiIndex, monomial
from .tolerances import TOL

LABELS = ("mu_S", "mu_boundary", "mu_T")
VARIABLES = {
    "mu_S": ("t", "x1", "x2"),
    "mu_boundary": ("t", "x1", "x2", "v1", "v2"),
    "mu_T": ("x1", "x2"),
}


def exponents_of(label: str, idx: MultiIndex) -> tuple:
    if label == "mu_T":
        return idx.space_powers
    if label == "mu_S":
        return (idx.time_power,) + idx.space_powers
    return (idx.time_power,) + idx.space_powers + (idx.velocity_powers or (0, 0))


def index_from(label: str, exps: tuple) -> MultiIndex:
    exps = tuple(int(e) for e in exps)
    if label == "mu_T":
        return MultiIndex(0, exps)
    if label == "mu_S":
        return MultiIndex(exps[0], exps[1:3])
    return MultiIndex(exps[0], exps[1:3], exps[3:5])


def graded_lex(nvars: int, degree: int) -> list[tuple]:
    """All exponent tuples of total degree <= degree, graded lexicographic order."""
    if degree < 0:
        return []
    out = [e for e in product(range(degree + 1), repeat=nvars) if sum(e) <= degree]
    return sorted(out, key=lambda e: (sum(e), tuple(-x for x in e)))


def monomial_count(nvars: int, degree: int) -> int:
    return math.comb(degree + nvars, nvars) if degree >= 0 else 0


@dataclass(frozen=True)
class DiscScenario:
    horizon: float = 3.0
    radius: float = 1.0
    drift: tuple = (1.0, 0.0)


@dataclass
class MomentVector:
    label: str
    entries: dict
    degree: int

    def __post_init__(self):
        nv = len(VARIABLES[self.label])
        missing = [e for e in graded_lex(nv, self.degree) if index_from(self.label, e) not in self.entries]
        if missing:
            raise ValueError(f"{self.label} moments missing exponents {missing[:5]}")
        zero = index_from(self.label, (0,) * nv)
        if self.entries[zero] < 0:
            raise ValueError(f"{self.label} has negative mass")

    def __getitem__(self, idx: MultiIndex) -> float:
        return self.entries[idx]


@dataclass
class ConstraintRow:
    coeffs: dict            # (label, MultiIndex) -> coefficient
    rhs: float
    provenance: tuple       # (a, b)

    @property
    def degree(self) -> int:
        return self.provenance[0] + sum(self.provenance[1])


@dataclass
class LinearConstraintSystem:
    k: int
    horizon: float
    rows: list = field(default_factory=list)

    def variables(self) -> list[tuple[str, MultiIndex]]:
        """Every moment of the three measures up to degree 2k, in export order."""
        out = []
        for label in LABELS:
            for e in graded_lex(len(VARIABLES[label]), max(2 * self.k, 0)):
                out.append((label, index_from(label, e)))
        return out

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        pos = {v: i for i, v in enumerate(self.variables())}
        A = np.zeros((len(self.rows), len(pos)))
        for r, row in enumerate(self.rows):
            for key, c in row.coeffs.items():
                A[r, pos[key]] += c
        return A, np.array([row.rhs for row in self.rows])


def assemble_constraints(k: int, scenario: DiscScenario, m0: dict) -> LinearConstraintSystem:
    """Moment rows of the continuity equation for relaxation order k.

    ``m0`` maps ``MultiIndex(0, b)`` to int x^b dmu_0 for |b| <= 2k. For k = 0
    the single mass-conservation row (a, b) = (0, 0) is emitted.
    """
    if k < 0:
        raise ValueError("relaxation order must be >= 0")
    needed = [MultiIndex(0, e) for e in graded_lex(2, 2 * k)]
    missing = [idx.space_powers for idx in needed if idx not in m0]
    if missing:
        raise ValueError(f"initial moments missing for exponents {missing}")
    T = float(scenario.horizon)
    c = tuple(float(v) for v in scenario.drift)
    sys = LinearConstraintSystem(k, T)
    for a, b1, b2 in graded_lex(3, max(2 * k - 1, 0)):
        b = (b1, b2)
        coeffs: dict = {}

        def add(label, idx, val):
            if val != 0.0:
                key = (label, idx)
                coeffs[key] = coeffs.get(key, 0.0) + val

        add("mu_T", MultiIndex(0, b), T ** a)
        if a > 0:
            add("mu_S", MultiIndex(a - 1, b), -float(a))
            add("mu_boundary", MultiIndex(a - 1, b, (0, 0)), -float(a))
        for i in range(2):
            if b[i] > 0:
                lower = tuple(bj - (j == i) for j, bj in enumerate(b))
                add("mu_S", MultiIndex(a, lower), -b[i] * c[i])
                add("mu_boundary", MultiIndex(a, lower, tuple(int(j == i) for j in range(2))), -float(b[i]))
        rhs = float(m0[MultiIndex(0, b)]) if a == 0 else 0.0
        sys.rows.append(ConstraintRow(coeffs, rhs, (a, b)))
    return sys


# -- simulated moments ------------------------------------------------------------


def simulated_moments(curve, k: int, radius: float = 1.0, band: float = TOL.boundary_band) -> dict:
    """Moment vectors of a disc time-stepping curve by left-point quadrature.

    At each step an atom counts toward ``mu_boundary`` when ||x| - radius| <= band,
    with velocity (x_{k+1} - x_k) / dt; otherwise it counts toward ``mu_S``.
    Returns ``{label: MomentVector}`` plus ``"mu_0"`` holding the initial moments.
    """
    deg = 2 * k
    times, paths, w = curve.times, curve.paths, np.asarray(curve.weights, dtype=float)
    K, N, n = len(times) - 1, paths.shape[1], paths.shape[2]
    dts = np.diff(times)
    X = paths[:-1].reshape(K * N, n)
    V = ((paths[1:] - paths[:-1]) / dts[:, None, None]).reshape(K * N, n)
    tt = np.repeat(times[:-1], N)
    on_bd = np.abs(np.linalg.norm(X, axis=1) - radius) <= band
    base = np.repeat(dts, N) * np.tile(w, K)
    TX = np.column_stack([tt, X])
    TXV = np.column_stack([tt, X, V])
    ws, wb = base * ~on_bd, base * on_bd
    S = {e: float(ws @ monomial(TX, e)) for e in graded_lex(3, deg)}
    B = {e: float(wb @ monomial(TXV, e)) for e in graded_lex(5, deg)}
    final, first = paths[-1], paths[0]
    out = {
        "mu_S": MomentVector("mu_S", {index_from("mu_S", e): v for e, v in S.items()}, deg),
        "mu_boundary": MomentVector("mu_boundary", {index_from("mu_boundary", e): v for e, v in B.items()}, deg),
        "mu_T": MomentVector("mu_T", {MultiIndex(0, e): float(w @ monomial(final, e))
                                      for e in graded_lex(2, deg)}, deg),
    }
    out["mu_0"] = {MultiIndex(0, e): float(w @ monomial(first, e)) for e in graded_lex(2, deg)}
    return out


def row_residuals(sys: LinearConstraintSystem, simulated: dict) -> np.ndarray:
    res = []
    for row in sys.rows:
        total = -row.rhs
        for (label, idx), c in row.coeffs.items():
            vec = simulated[label]
            if idx.degree > vec.degree:
                raise ValueError(f"row {row.provenance} needs degree {idx.degree} > simulated degree {vec.degree}")
            total += c * vec[idx]
        res.append(total)
    return np.array(res)


def residual(sys: LinearConstraintSystem, simulated: dict, max_degree: int | None = None) -> float:
    """Largest absolute row residual, optionally over rows of degree <= max_degree."""
    r = row_residuals(sys, simulated)
    if max_degree is not None:
        mask = np.array([row.degree <= max_degree for row in sys.rows])
        r = r[mask]
    return float(np.max(np.abs(r))) if r.size else 0.0


# -- supports and SDPA export ------------------------------------------------------


@dataclass
class SupportDescription:
    """Polynomials (exponent tuple -> coefficient) with g >= 0 or h = 0 per measure."""

    inequalities: dict
    equalities: dict

    @classmethod
    def disc(cls, horizon: float, radius: float = 1.0) -> "SupportDescription":
        T = float(horizon)
        time_window_S = {(1, 0, 0): T, (2, 0, 0): -1.0}
        ball_S = {(0, 0, 0): radius ** 2, (0, 2, 0): -1.0, (0, 0, 2): -1.0}
        time_window_B = {(1, 0, 0, 0, 0): T, (2, 0, 0, 0, 0): -1.0}
        circle_B = {(0, 0, 0, 0, 0): radius ** 2, (0, 2, 0, 0, 0): -1.0, (0, 0, 2, 0, 0): -1.0}
        radial_B = {(0, 1, 0, 0, 1): 1.0, (0, 0, 1, 1, 0): -1.0}
        ball_T = {(0, 0): radius ** 2, (2, 0): -1.0, (0, 2): -1.0}
        return cls(
            inequalities={"mu_S": [time_window_S, ball_S], "mu_boundary": [time_window_B], "mu_T": [ball_T]},
            equalities={"mu_S": [], "mu_boundary": [circle_B, radial_B], "mu_T": []},
        )


def _poly_degree(poly: dict) -> int:
    return max(sum(e) for e in poly)


def _add(e1, e2):
    return tuple(x + y for x, y in zip(e1, e2))


def _sdp_blocks(sys: LinearConstraintSystem, supports: SupportDescription):
    """Blocks as (kind, label, size, entries) with entries {(i, j): {var: coeff}} and
    a constant part under var 0 (the F_0 of the SDPA form F(y) = sum y_i F_i - F_0)."""
    k = sys.k
    pos = {v: i + 1 for i, v in enumerate(sys.variables())}

    def var(label, exps):
        return pos[(label, index_from(label, exps))]

    blocks = []
    for label in LABELS:
        nv = len(VARIABLES[label])
        basis = graded_lex(nv, k)
        entries = {}
        for i, ei in enumerate(basis):
            for j in range(i, len(basis)):
                entries[(i + 1, j + 1)] = {var(label, _add(ei, basis[j])): 1.0}
        blocks.append(("moment", label, len(basis), entries))
        for g in supports.inequalities.get(label, []):
            dloc = k - math.ceil(_poly_degree(g) / 2)
            if dloc < 0:
                continue
            basis = graded_lex(nv, dloc)
            entries = {}
            for i, ei in enumerate(basis):
                for j in range(i, len(basis)):
                    cell = {}
                    for gexp, gc in g.items():
                        v = var(label, _add(_add(ei, basis[j]), gexp))
                        cell[v] = cell.get(v, 0.0) + gc
                    entries[(i + 1, j + 1)] = cell
            blocks.append(("localizing", label, len(basis), entries))
    equalities = []
    for row in sys.rows:
        equalities.append(({pos[key]: c for key, c in row.coeffs.items()}, row.rhs, f"row{row.provenance}"))
    for label in LABELS:
        nv = len(VARIABLES[label])
        for h in supports.equalities.get(label, []):
            for mexp in graded_lex(nv, 2 * k - _poly_degree(h)):
                lin = {}
                for hexp, hc in h.items():
                    v = var(label, _add(mexp, hexp))
                    lin[v] = lin.get(v, 0.0) + hc
                equalities.append((lin, 0.0, f"support {label}"))
    for lin, rhs, tag in equalities:
        for sign in (1.0, -1.0):
            cell = {v: sign * c for v, c in lin.items()}
            if rhs != 0.0:
                cell[0] = sign * rhs
            blocks.append(("equality", tag, 1, {(1, 1): cell}))
    return blocks


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_sdpa(sys: LinearConstraintSystem, supports: SupportDescription) -> str:
    """Sparse SDPA (.dat-s) text of the feasibility problem."""
    mdim = len(sys.variables())
    blocks = _sdp_blocks(sys, supports)
    lines = [str(mdim), str(len(blocks)), " ".join(str(b[2]) for b in blocks), " ".join(["0"] * mdim)]
    quint = []
    for bno, (_, _, _, entries) in enumerate(blocks, start=1):
        for (i, j), cell in entries.items():
            for v, c in cell.items():
                if c != 0.0:
                    quint.append((v, bno, i, j, c))
    quint.sort(key=lambda q: q[:4])
    lines += [f"{v} {b} {i} {j} {_fmt(c)}" for v, b, i, j, c in quint]
    return "\n".join(lines) + "\n"


def sidecar(sys: LinearConstraintSystem, supports: SupportDescription) -> str:
    """JSON map from SDPA variable index to (measure label, exponents)."""
    blocks = _sdp_blocks(sys, supports)
    doc = {
        "relaxation_order": sys.k,
        "horizon": sys.horizon,
        "variables": [
            {"index": i + 1, "measure": label, "names": list(VARIABLES[label]),
             "exponents": list(exponents_of(label, idx))}
            for i, (label, idx) in enumerate(sys.variables())
        ],
        "blocks": [{"block": b + 1, "kind": kind, "tag": tag, "size": size}
                   for b, (kind, tag, size, _) in enumerate(blocks)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_sdpa(text: str) -> dict:
    """Read sparse SDPA text back into {mdim, block_sizes, c, entries}."""
    lines = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in "*\""]
    mdim = int(lines[0].split()[0])
    nblock = int(lines[1].split()[0])
    sizes = [int(s) for s in lines[2].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    if len(sizes) != nblock:
        raise ValueError(f"block count {nblock} does not match {len(sizes)} block sizes")
    c = [float(s) for s in lines[3].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    entries = []
    for ln in lines[4:]:
        m, b, i, j, v = ln.split()
        entries.append((int(m), int(b), int(i), int(j), float(v)))
    return {"mdim": mdim, "nblock": nblock, "block_sizes": sizes, "c": c, "entries": entries}


def evaluate_blocks(parsed: dict, y: np.ndarray) -> list[np.ndarray]:
    """Symmetric block matrices F(y) = sum_i y_i F_i - F_0 from parsed SDPA data."""
    mats = [np.zeros((s, s)) for s in parsed["block_sizes"]]
    for m, b, i, j, v in parsed["entries"]:
        coef = -v if m == 0 else v * y[m - 1]
        mats[b - 1][i - 1, j - 1] += coef
        if i != j:
            mats[b - 1][j - 1, i - 1] += coef
    return mats


def moment_vector_array(sys: LinearConstraintSystem, simulated: dict) -> np.ndarray:
    """Simulated moments laid out in SDPA variable order."""
    return np.array([simulated[label][idx] for label, idx in sys.variables()])
