import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sweepflow.bounds import (SystemConstants, c_max, holder_bound, kappa, lemma_traj_bound,
                              moment_diff_bound, oneD_bound, penalty_bound, step_w2_bound,
                              thm_w1_bound)
from sweepflow.measures import DiscreteMeasure
from sweepflow.transport import w1_1d

positive = st.floats(1e-3, 3.0)


@pytest.mark.parametrize("L_f, L_s, T, expected", [
    (1.0, 0.0, 1.0, math.e ** 2 - 1),
    (1.0, 2.0, 1.0, 2 * (math.e ** 2 - 1)),
    (0.5, 0.0, 2.0, math.e ** 2 - 1),
])
def test_kappa_values(L_f, L_s, T, expected):
    assert kappa(SystemConstants(L_f, L_s, T)) == pytest.approx(expected, rel=1e-14)


def test_kappa_vanishes_with_horizon():
    assert kappa(SystemConstants(1.0, 1.0, 1e-12)) == pytest.approx(3e-12, rel=1e-6)


def test_oned_bound_value():
    assert oneD_bound(0.1, 1.0) == pytest.approx(3.2487, abs=1e-4)
    assert oneD_bound(0.1, 0.0) == 0.0


@given(L_f=positive, L_s=positive, T=positive, lam=positive, frac=st.floats(0.0, 1.0))
def test_regularization_bounds_monotone(L_f, L_s, T, lam, frac):
    c = SystemConstants(L_f, L_s, T, first_abs_moment=1.0, x0_abs=1.0)
    t = frac * T
    assert lemma_traj_bound(c, lam, t) <= lemma_traj_bound(c, 2 * lam, t)
    assert thm_w1_bound(c, lam, t) <= thm_w1_bound(c, lam, T) * (1 + 1e-12)
    assert kappa(c) <= kappa(SystemConstants(L_f, 2 * L_s, T))
    assert penalty_bound(c) >= L_s


@pytest.mark.parametrize("bound", [
    lambda c: kappa(c),
    lambda c: lemma_traj_bound(c, 0.1, 0.5),
    lambda c: thm_w1_bound(c, 0.1, 0.5),
])
def test_lipschitz_zero_rejected_where_divided(bound):
    with pytest.raises(ValueError, match="bound requires L_f > 0"):
        bound(SystemConstants(0.0, 1.0, 1.0))


def test_lipschitz_zero_allowed_for_step_bounds():
    c = SystemConstants(0.0, 0.5, 4.0, C_max=3.0)
    assert step_w2_bound(c, 0.1) == pytest.approx(0.05)
    assert holder_bound(c, 1.0, 2.0) == pytest.approx(0.5 * 2.0)


@pytest.mark.parametrize("bad", [
    dict(L_f=-1.0, L_s=0.0, T=1.0),
    dict(L_f=1.0, L_s=0.0, T=0.0),
    dict(L_f=1.0, L_s=float("nan"), T=1.0),
])
def test_invalid_constants(bad):
    with pytest.raises(ValueError):
        SystemConstants(**bad)


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        oneD_bound(0.0, 1.0)


def test_holder_symmetric():
    c = SystemConstants(1.0, 0.2, 2.0, C_max=1.5)
    assert holder_bound(c, 0.3, 1.1) == holder_bound(c, 1.1, 0.3)
    assert holder_bound(c, 0.7, 0.7) == 0.0


@pytest.mark.parametrize("k, R, w1, expected", [(0, 2.0, 0.5, 0.0), (1, 2.0, 0.5, 0.5), (3, 2.0, 0.5, 6.0)])
def test_moment_diff_bound(k, R, w1, expected):
    assert moment_diff_bound(k, R, w1) == expected


def test_moment_diff_bound_holds_on_samples(rng):
    for _ in range(20):
        mu = DiscreteMeasure(rng.uniform(-1, 1, (4, 1)), rng.dirichlet(np.ones(4)))
        nu = DiscreteMeasure(rng.uniform(-1, 1, (3, 1)), rng.dirichlet(np.ones(3)))
        w = w1_1d(mu, nu)
        for k in range(4):
            gap = abs(np.dot(mu.weights, mu.points[:, 0] ** k) - np.dot(nu.weights, nu.points[:, 0] ** k))
            assert gap <= moment_diff_bound(k, 1.0, w) + 1e-12


def test_c_max_examples():
    assert c_max(np.full((3, 1, 1), 0.5), [1.0]) == pytest.approx(1.5)
    assert c_max(np.zeros((2, 1, 2)), [1.0]) == 1.0
    # two atoms at radius 0 and 1 with equal weight: sqrt(0.5 * 1 + 0.5 * 4)
    paths = np.array([[[0.0, 0.0], [1.0, 0.0]]])
    assert c_max(paths, [0.5, 0.5]) == pytest.approx(math.sqrt(2.5))
    with pytest.raises(ValueError):
        c_max(np.empty((0, 1, 2)), [])
