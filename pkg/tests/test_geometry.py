import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sweepflow.geometry import (Ball, Box, Halfspace, Intersection, MovingConvexSet, PathSegment,
                                ProjectionError, TranslationPath, hausdorff, project, set_at,
                                vi_residual)

coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
points2 = arrays(np.float64, 2, elements=coords)


def _sets():
    return [
        Ball([0.0, 0.0], 1.0),
        Ball([0.5, -0.2], 0.3),
        Box([0.0, 0.0], [1.0, 2.0]),
        Halfspace([-1.0, 0.0], 0.0),
        Halfspace.from_inequality([1.0, 1.0], 0.5),
        Intersection((Ball([0.0, 0.0], 1.0), Halfspace([0.0, 1.0], 0.2)), witness=[0.0, 0.0]),
        Intersection((Box([0.0, 0.0], [1.0, 1.0]), Ball([1.0, 1.0], 1.0)), witness=[0.9, 0.9]),
    ]


SETS = _sets()
SET_IDS = ["ball", "small-ball", "box", "halfspace", "oblique-halfspace", "cap", "box-ball"]


@pytest.mark.parametrize("convex_set, x, expected", [
    (Ball([0, 0], 1.0), [2.0, 0.0], [1.0, 0.0]),
    (Ball([0, 0], 1.0), [0.3, 0.1], [0.3, 0.1]),
    (Halfspace([-1.0, 0.0], 0.0), [-1.0, 2.0], [0.0, 2.0]),
    (Box([0, 0], [1, 1]), [2.0, -3.0], [1.0, 0.0]),
])
def test_project_examples(convex_set, x, expected):
    np.testing.assert_allclose(project(convex_set, x), expected, atol=1e-15)


def test_project_accepts_stacks():
    pts = np.array([[2.0, 0.0], [0.3, 0.1], [0.0, -4.0]])
    out = Ball([0, 0], 1.0).project(pts)
    np.testing.assert_allclose(out, [[1, 0], [0.3, 0.1], [0, -1]])


def test_intersection_projection_is_nearest_point():
    # disc cut by x2 <= 0.2; from (0, 2) the nearest point is (0, 0.2), and
    # from (2, 2) it is the corner (sqrt(0.96), 0.2) of the cap
    cap = SETS[5]
    np.testing.assert_allclose(cap.project([0.0, 2.0]), [0.0, 0.2], atol=1e-9)
    np.testing.assert_allclose(cap.project([2.0, 2.0]), [math.sqrt(0.96), 0.2], atol=1e-8)


def test_intersection_nonconvergence_reports_last_iterate():
    cap = Intersection(SETS[5].sets, witness=[0.0, 0.0], max_iter=2, step_tol=1e-300)
    with pytest.raises(ProjectionError) as err:
        cap.project([2.0, 2.0])
    assert err.value.last_iterate.shape == (1, 2)
    assert err.value.residual >= 0.0


@pytest.mark.parametrize("bad", [
    lambda: Ball([0, 0], -1.0),
    lambda: Box([1, 0], [0, 1]),
    lambda: Halfspace([1.0, 1.0], 0.0),
    lambda: Intersection(()),
    lambda: Intersection((Ball([0, 0], 1.0),), witness=[3.0, 0.0]),
])
def test_invalid_sets_rejected(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("convex_set", SETS, ids=SET_IDS)
@given(x=points2, y=points2)
def test_projection_is_nonexpansive(convex_set, x, y):
    px, py = convex_set.project(x), convex_set.project(y)
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


@pytest.mark.parametrize("convex_set", SETS, ids=SET_IDS)
@given(x=points2)
def test_projection_is_idempotent_and_feasible(convex_set, x):
    px = convex_set.project(x)
    assert convex_set.residual(px) <= 1e-9
    np.testing.assert_allclose(convex_set.project(px), px, atol=1e-10)


@pytest.mark.parametrize("convex_set", SETS, ids=SET_IDS)
@given(x=points2)
def test_projection_variational_inequality(convex_set, x):
    px = convex_set.project(x)
    probes = convex_set.sample_points(24)
    assert np.max((probes - px) @ (x - px)) <= 1e-9


@pytest.mark.parametrize("a, b, expected, exact", [
    (Ball([0, 0], 1.0), Ball([0, 0], 1.0), 0.0, True),
    (Ball([0, 0], 1.0), Ball([0.3, 0], 1.0), 0.3, True),
    (Ball([0, 0], 1.0), Ball([0, 0], 2.0), 1.0, True),
    (Box([0, 0], [1, 1]), Box([0, -0.45], [1, 0.55]), 0.45, True),
    (Halfspace([1.0, 0.0], 0.0), Halfspace([1.0, 0.0], 0.7), 0.7, True),
    # square [-1,1]^2 vs unit ball: farthest corner sits at sqrt(2) - 1
    (Box([-1, -1], [1, 1]), Ball([0, 0], 1.0), math.sqrt(2) - 1, False),
])
def test_hausdorff_examples(a, b, expected, exact):
    d = hausdorff(a, b)
    assert d.value == pytest.approx(expected, abs=1e-12)
    assert d.exact is exact


def test_hausdorff_sampled_is_lower_estimate():
    cap = SETS[5]
    d = hausdorff(cap, Ball([0, 0], 1.0))
    # the disc point (0, 1) is 0.8 away from the cap; all other points are closer
    assert not d.exact
    assert 0.79 <= d.value <= 0.8 + 1e-9


def test_hausdorff_unbounded_pair_rejected():
    with pytest.raises(ValueError, match="hausdorff undefined on unbounded pair"):
        hausdorff(Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0))


def _moving_square(v=0.2, horizon=2.0):
    path = TranslationPath((PathSegment(0.0, horizon, [[0.0, 0.0], [0.0, -v]]),))
    return MovingConvexSet.translating(Box([0, 0], [1, 1]), path, v, horizon)


def test_set_at_examples():
    disc = Ball([0, 0], 1.0)
    static = MovingConvexSet.static(disc, 3.0)
    assert set_at(static, 1.7) is disc
    sq = _moving_square()
    s = set_at(sq, 1.5)
    np.testing.assert_allclose(s.lower, [0.0, -0.3])
    np.testing.assert_allclose(s.upper, [1.0, 0.7])
    end = set_at(sq, 2.0)
    np.testing.assert_allclose(end.lower, [0.0, -0.4])


@pytest.mark.parametrize("t", [-0.1, 2.5])
def test_set_at_outside_horizon(t):
    with pytest.raises(ValueError, match="outside"):
        set_at(_moving_square(), t)


def test_moving_projection_matches_translated_set():
    sq = _moving_square()
    x = np.array([[0.5, 0.95], [2.0, 2.0]])
    np.testing.assert_allclose(sq.project(1.0, x), sq.at(1.0).project(x))


def test_check_lipschitz_flags_understated_constant():
    assert _moving_square().check_lipschitz() == []
    path = TranslationPath((PathSegment(0.0, 2.0, [[0.0, 0.0], [0.0, -0.2]]),))
    wrong = MovingConvexSet.translating(Box([0, 0], [1, 1]), path, 0.1, 2.0)
    assert wrong.check_lipschitz()


def test_translation_path_continuity_enforced():
    with pytest.raises(ValueError, match="discontinuous"):
        TranslationPath((PathSegment(0.0, 1.0, [[0.0, 0.0]]), PathSegment(1.0, 2.0, [[1.0, 0.0]])))


def test_vi_residual_examples():
    disc = Ball([0, 0], 1.0)
    probes = disc.sample_points(32)
    assert vi_residual(disc, [0.2, 0.1], [0.0, 0.0], probes) == 0.0
    # w = -n at the boundary point (1, 0)
    assert vi_residual(disc, [1.0, 0.0], [-1.0, 0.0], probes) <= 1e-12
    # <y - x, -w> with y = (0, 1), x = (1, 0), w = (0, -1) equals 1
    assert vi_residual(disc, [1.0, 0.0], [0.0, -1.0], [[0.0, 1.0]]) == pytest.approx(1.0)
    # the tangential w = (0, 1) gives -1 on that same probe
    assert vi_residual(disc, [1.0, 0.0], [0.0, 1.0], [[0.0, 1.0]]) == pytest.approx(-1.0)


def test_vi_residual_requires_probes():
    with pytest.raises(ValueError):
        vi_residual(Ball([0, 0], 1.0), [0.0, 0.0], [0.0, 0.0], np.empty((0, 2)))
