"""Exact discrete optimal transport.

``kantorovich`` solves the transportation LP with a primal simplex on the
bipartite basis tree (MODI potentials, Dantzig entering rule with a Bland
fallback after a run of degenerate pivots). Optimal flows are recomputed from
the final basis by leaf elimination, so the marginals hold to rounding error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .measures import DiscreteMeasure
from .tolerances import TOL


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: np.ndarray
    target: np.ndarray
    mass: np.ndarray
    p: int
    cost: float

    def dense(self, m: int, n: int) -> np.ndarray:
        out = np.zeros((m, n))
        np.add.at(out, (self.source, self.target), self.mass)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source_index", "target_index", "mass"])
        for i, j, m in zip(self.source, self.target, self.mass):
            w.writerow([int(i), int(j), repr(float(m))])
        return buf.getvalue()


def cost_matrix(x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return sq if p == 2 else np.sqrt(sq) ** p


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int) -> None:
    if p not in (1, 2):
        raise ValueError(f"cost exponent must be 1 or 2, got {p}")
    if mu.size == 0 or nu.size == 0:
        raise ValueError("transport between measures with empty support")
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if abs(mu.total_mass - nu.total_mass) > TOL.marginal:
        raise ValueError(f"unbalanced: total masses {mu.total_mass!r} and {nu.total_mass!r} differ")


# -- transportation simplex ------------------------------------------------------


def _northwest(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    m, n = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    basis = []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        basis.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            return basis
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1


def _adjacency(basis, m: int, n: int) -> list[list[int]]:
    # nodes 0..m-1 are rows, m..m+n-1 columns
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    return adj


def _potentials(basis, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m, n = C.shape
    adj = _adjacency(basis, m, n)
    pot = np.full(m + n, np.nan)
    pot[0] = 0.0
    stack = [0]
    while stack:
        node = stack.pop()
        for nb in adj[node]:
            if np.isnan(pot[nb]):
                i, j = (node, nb - m) if node < m else (nb, node - m)
                # C_ij = u_i + v_j on basic cells
                pot[nb] = C[i, j] - pot[node]
                stack.append(nb)
    return pot[:m], pot[m:]


def _tree_path(adj, start: int, goal: int) -> list[int]:
    parent = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def _tree_flows(basis, a: np.ndarray, b: np.ndarray) -> dict:
    """Unique flows on a spanning-tree basis by repeated leaf elimination."""
    m, n = len(a), len(b)
    adj = [set(x) for x in _adjacency(basis, m, n)]
    rem = np.concatenate([a, b]).astype(float)
    flows = {}
    leaves = [v for v in range(m + n) if len(adj[v]) == 1]
    while leaves:
        v = leaves.pop()
        if len(adj[v]) != 1:
            continue
        (u,) = adj[v]
        i, j = (v, u - m) if v < m else (u, v - m)
        x = rem[v]
        flows[(i, j)] = x
        rem[u] -= x
        rem[v] = 0.0
        adj[v].clear()
        adj[u].discard(v)
        if len(adj[u]) == 1:
            leaves.append(u)
    return flows


def _transport_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_pivots: int = 100_000):
    m, n = C.shape
    basis = _northwest(a, b)
    flows = _tree_flows(basis, a, b)
    eps = 1e-12 * max(1.0, float(np.max(np.abs(C))))
    degenerate_run = 0
    for _ in range(max_pivots):
        u, v = _potentials(basis, C)
        reduced = C - u[:, None] - v[None, :]
        if degenerate_run > m + n:
            cand = np.argwhere(reduced < -eps)
            if cand.size == 0:
                break
            ei, ej = map(int, cand[0])
        else:
            flat = int(np.argmin(reduced))
            ei, ej = divmod(flat, n)
            if reduced[ei, ej] >= -eps:
                break
        adj = _adjacency(basis, m, n)
        path = _tree_path(adj, m + ej, ei)  # column ej ... row ei through the tree
        cells = []
        for s, t in zip(path, path[1:]):
            cells.append((t, s - m) if t < m else (s, t - m))
        # cycle: (ei,ej)+, then cells alternate -, +, -, ...
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flows[c] for c in minus)
        leaving = min((c for c in minus if flows[c] <= theta), key=lambda c: (c[0], c[1]))
        degenerate_run = degenerate_run + 1 if theta <= 0.0 else 0
        for c in minus:
            flows[c] -= theta
        for c in plus:
            flows[c] += theta
        flows[(ei, ej)] = theta
        del flows[leaving]
        basis = [c for c in basis if c != leaving] + [(ei, ej)]
    else:
        raise RuntimeError("transportation simplex exceeded its pivot limit")
    return basis, _tree_flows(basis, a, b)


def kantorovich(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> tuple[float, TransportPlan]:
    """Exact W_p (no 1/2 factor) and an optimal plan."""
    _check_pair(mu, nu, p)
    a = np.asarray(mu.weights, dtype=float)
    b = np.asarray(nu.weights, dtype=float) * (mu.total_mass / nu.total_mass)
    C = cost_matrix(mu.points, nu.points, p)
    m, n = C.shape
    if m == 1 or n == 1:
        src = np.zeros(n, dtype=int) if m == 1 else np.arange(m)
        tgt = np.arange(n) if m == 1 else np.zeros(m, dtype=int)
        mass = b if m == 1 else a
    else:
        _, flows = _transport_simplex(a, b, C)
        keys = sorted(flows)
        src = np.array([k[0] for k in keys], dtype=int)
        tgt = np.array([k[1] for k in keys], dtype=int)
        mass = np.maximum(np.array([flows[k] for k in keys]), 0.0)
    keep = mass > TOL.plan_mass_floor
    src, tgt, mass = src[keep], tgt[keep], mass[keep]
    total = math.fsum(mass * C[src, tgt])
    dist = max(total, 0.0) ** (1.0 / p)
    return dist, TransportPlan(src, tgt, mass, p, dist)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    return kantorovich(mu, nu, p)[0]


# -- oracles ----------------------------------------------------------------------


def _unit_counts(w: np.ndarray, total: float, max_units: int):
    """Smallest q <= max_units with every weight an integer multiple of total/q."""
    for q in range(1, max_units + 1):
        c = w * q / total
        r = np.rint(c)
        if np.all(np.abs(c - r) <= 1e-9):
            return q, r.astype(int)
    return None


def _assignment_dp(C: np.ndarray) -> float:
    """Minimum-cost perfect matching by dynamic programming over subsets."""
    q = C.shape[0]
    best = np.full(1 << q, np.inf)
    best[0] = 0.0
    for mask in range(1 << q):
        cur = best[mask]
        if not np.isfinite(cur):
            continue
        i = bin(mask).count("1")
        if i == q:
            continue
        for j in range(q):
            bit = 1 << j
            if not mask & bit:
                cand = cur + C[i, j]
                if cand < best[mask | bit]:
                    best[mask | bit] = cand
    return float(best[-1])


def brute_force_w(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2,
                  max_support: int = 8, max_units: int = 16) -> float:
    """W_p by exhaustive search, used as an oracle for :func:`kantorovich`.

    Equal-weight square problems enumerate all permutations. When every weight
    is a multiple of a common unit (at most ``max_units`` units) atoms are split
    into unit copies and the assignment is searched exhaustively by subset DP;
    integrality of the transportation polytope makes this exact. Remaining small
    cases reach every polytope vertex by repeatedly saturating a leaf cell.
    """
    _check_pair(mu, nu, p)
    m, n = mu.size, nu.size
    if m > max_support or n > max_support:
        raise ValueError(f"support too large for brute force ({m}x{n}, limit {max_support})")
    C = cost_matrix(mu.points, nu.points, p)
    a = np.asarray(mu.weights, dtype=float)
    b = np.asarray(nu.weights, dtype=float) * (mu.total_mass / nu.total_mass)
    total = mu.total_mass
    if m == n and np.allclose(a, a[0], rtol=0, atol=1e-15) and np.allclose(b, a[0], rtol=0, atol=1e-15):
        best = min(math.fsum(C[i, s[i]] for i in range(m)) for s in permutations(range(n)))
        return float(best * a[0]) ** (1.0 / p)

    ua, ub = _unit_counts(a, total, max_units), _unit_counts(b, total, max_units)
    if ua is not None and ub is not None:
        q = ua[0] * ub[0] // math.gcd(ua[0], ub[0])
        if q <= max_units:
            rows = np.repeat(np.arange(m), np.rint(a * q / total).astype(int))
            cols = np.repeat(np.arange(n), np.rint(b * q / total).astype(int))
            return max(_assignment_dp(C[np.ix_(rows, cols)]) * total / q, 0.0) ** (1.0 / p)

    if m * n > 16:
        raise ValueError(f"support too large for vertex enumeration with incommensurable weights ({m}x{n})")
    tol = 1e-12 * max(float(np.max(a)), float(np.max(b)))

    def key(vals):
        return tuple(v if v > tol else 0.0 for v in vals)

    @lru_cache(maxsize=None)
    def solve(ra: tuple, rb: tuple) -> float:
        live_r = [i for i, x in enumerate(ra) if x > 0.0]
        live_c = [j for j, x in enumerate(rb) if x > 0.0]
        if not live_r or not live_c:
            return 0.0
        best = math.inf
        for i in live_r:
            for j in live_c:
                if rb[j] >= ra[i] - tol:
                    na, nb = list(ra), list(rb)
                    na[i], nb[j] = 0.0, rb[j] - ra[i]
                    best = min(best, ra[i] * C[i, j] + solve(key(na), key(nb)))
                if ra[i] >= rb[j] - tol:
                    na, nb = list(ra), list(rb)
                    nb[j], na[i] = 0.0, ra[i] - rb[j]
                    best = min(best, rb[j] * C[i, j] + solve(key(na), key(nb)))
        return best

    return max(solve(key(a), key(b)), 0.0) ** (1.0 / p)


def w1_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """W_1 on the line as the integral of |F_mu - F_nu|."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("w1_1d needs one-dimensional measures")
    _check_pair(mu, nu, 1)
    x = np.concatenate([mu.points[:, 0], nu.points[:, 0]])
    dw = np.concatenate([mu.weights, -np.asarray(nu.weights) * (mu.total_mass / nu.total_mass)])
    order = np.argsort(x, kind="stable")
    x, dw = x[order], dw[order]
    gap = np.cumsum(dw)[:-1]
    return float(np.sum(np.abs(gap) * np.diff(x)))


def mccann_interpolate(mu: DiscreteMeasure, nu: DiscreteMeasure, plan: TransportPlan, s: float) -> DiscreteMeasure:
    """Displacement interpolation ((1-s) x + s y)# plan."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"interpolation fraction must lie in [0, 1], got {s}")
    if plan.source.size and (plan.source.max() >= mu.size or plan.target.max() >= nu.size):
        raise ValueError("plan indices do not match the measures")
    rows = np.bincount(plan.source, plan.mass, minlength=mu.size)
    cols = np.bincount(plan.target, plan.mass, minlength=nu.size)
    nu_w = np.asarray(nu.weights) * (mu.total_mass / nu.total_mass)
    if np.max(np.abs(rows - mu.weights)) > TOL.marginal or np.max(np.abs(cols - nu_w)) > TOL.marginal:
        raise ValueError("plan marginals do not match the measures")
    pts = (1.0 - s) * mu.points[plan.source] + s * nu.points[plan.target]
    return DiscreteMeasure(pts, plan.mass, mu.merge_tol)
