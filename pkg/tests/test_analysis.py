from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tugsys.analysis import (
    blowup_deviation,
    check_a_monotone,
    check_lemma_Ll,
    cone_comparison_check,
    lipschitz_bound_check,
    running_sup,
    slope_stats,
    symmetric_slope_check,
    xi,
)
from tugsys.domain import directions
from tugsys.errors import BallNotContained, RadiusOrder, ValidationError
from tugsys.exact import ClosedFormPair, ConePair, example1_pair

R2 = math.sqrt(2.0)
DEN = math.exp(R2) + math.exp(-R2)


def v1(r):
    return -(math.exp(R2 * r) + math.exp(-R2 * r)) / DEN


def dv1(r):
    return -R2 * (math.exp(R2 * r) - math.exp(-R2 * r)) / DEN


def sc1(r):
    """Coupled slope of the closed form at the origin, straight from the definition."""
    s = (v1(r) - v1(0)) / r
    return s + 0.5 * (v1(0) - (-v1(0))) * (1 - math.exp(-R2 * r)) / r


def affine_pair(p, domain=None):
    p = np.asarray(p, dtype=float)
    return ClosedFormPair(lambda x: np.stack([x @ p, x @ p]), dim=len(p), domain=domain)


def constant_pair(c=0.3):
    return ClosedFormPair(lambda x: np.full((2, len(x)), c), dim=2)


# a gradient aligned with one of the 256 sampling directions, so sphere extrema are exact
P_ALIGNED = 1.7 * directions(2, 256)[37]
EX1 = example1_pair()
HALF = [0.3, 0.4]  # |x0| = 0.5


@st.composite
def vertex_cones(draw):
    c = st.floats(-1.0, 1.0, allow_nan=False)
    x0 = (draw(st.floats(-2, 2)), draw(st.floats(-2, 2)))
    return ConePair(x0, draw(c), draw(c), draw(c), draw(c))


class TestSlopeStats:
    def test_example_values(self):
        assert slope_stats(EX1, [0, 0], 0.5).S_plus[0] == pytest.approx(-0.239274, abs=1e-6)
        rep = slope_stats(EX1, [0, 0], 1.0)
        assert rep.S_plus[0] == pytest.approx(-1.0 - v1(0.0), abs=1e-12)
        assert rep.S_plus[0] == pytest.approx(-0.540902, abs=1e-6)
        assert rep.SC_plus[0] == pytest.approx(sc1(1.0), abs=1e-12)
        assert rep.SC_plus[0] == pytest.approx(-0.888386, abs=1e-6)

    def test_stored_fields_reproduce_slopes(self):
        rep = slope_stats(EX1, HALF, 0.3)
        np.testing.assert_allclose(rep.S_plus, (rep.M - rep.u0) / rep.radius, atol=1e-12)
        np.testing.assert_allclose(rep.S_minus, (rep.m - rep.u0) / rep.radius, atol=1e-12)
        assert np.all(rep.S_plus >= rep.S_minus)
        assert rep.samples == 256

    def test_affine_pair(self):
        rep = slope_stats(affine_pair(P_ALIGNED), [0.2, -0.1], 0.7)
        np.testing.assert_allclose(rep.S_plus, 1.7, atol=1e-12)
        np.testing.assert_allclose(rep.S_minus, -1.7, atol=1e-12)
        np.testing.assert_array_equal(rep.SC_plus, rep.S_plus)

    def test_one_dimensional_uses_two_points(self):
        pair = ClosedFormPair(lambda x: np.stack([x[:, 0] ** 2, -x[:, 0]]), dim=1)
        rep = slope_stats(pair, [0.5], 0.25)
        assert rep.samples == 2
        assert rep.M[0] == pytest.approx(0.5625) and rep.m[0] == pytest.approx(0.0625)

    def test_errors(self):
        with pytest.raises(BallNotContained):
            slope_stats(EX1, [0.5, 0.0], 0.6)
        with pytest.raises(RadiusOrder):
            slope_stats(EX1, [0, 0], 0.0)
        with pytest.raises(ValidationError):
            slope_stats(EX1, [0, 0], 0.5, K=8)

    def test_to_dict(self):
        d = slope_stats(EX1, [0, 0], 0.5).to_dict()
        assert isinstance(d["S_plus"], list) and d["radius"] == 0.5


class TestCoupledSlack:
    def test_xi(self):
        assert xi(1.0) == pytest.approx(math.exp(R2) - math.exp(-R2))

    def test_example_equality(self):
        sp, sm = check_lemma_Ll(EX1, [0, 0], 0.5, 1.0)
        assert abs(sp[0]) <= 1e-4 and max(np.abs(sp).max(), np.abs(sm).max()) <= 1e-6
        assert slope_stats(EX1, [0, 0], 0.5).SC_plus[0] == pytest.approx(-0.704728, abs=1e-4)

    def test_constant_pair_zero(self):
        sp, sm = check_lemma_Ll(constant_pair(), [0, 0], 0.2, 0.9)
        assert np.all(sp == 0) and np.all(sm == 0)

    @settings(max_examples=100, deadline=None)
    @given(vertex_cones(), st.floats(0.05, 2.0), st.floats(0.05, 1.0))
    def test_cone_equality(self, cone, r, frac):
        sp, sm = check_lemma_Ll(cone.as_pair(), cone.x0, frac * r, r)
        assert max(np.abs(sp).max(), np.abs(sm).max()) <= 1e-6

    def test_radius_order(self):
        with pytest.raises(RadiusOrder):
            check_lemma_Ll(EX1, [0, 0], 0.6, 0.5)


class TestConeSlope:
    def test_example_zero(self):
        a, ok = check_a_monotone(EX1, [0, 0], [0.25, 0.5, 0.75, 1.0])
        assert ok and np.allclose(a, 0.0, atol=1e-12)

    def test_cone_round_trip_constant(self):
        cone = ConePair((0.0, 0.0), 0.1, -0.2, 0.3, 0.0)
        a, ok = check_a_monotone(cone.as_pair(), [0, 0], [0.5, 1.0])
        assert ok and a == pytest.approx([0.3, 0.3], abs=1e-12)

    def test_closed_form_random_centres(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x0 = rng.uniform(-0.5, 0.5, 2)
            d = 1 - np.linalg.norm(x0)
            _, ok = check_a_monotone(EX1, x0, np.linspace(0.1, d, 5))
            assert ok

    def test_decreasing_radii_rejected(self):
        with pytest.raises(RadiusOrder):
            check_a_monotone(EX1, [0, 0], [0.5, 0.25])


class TestConeComparison:
    @settings(max_examples=50, deadline=None)
    @given(vertex_cones(), st.floats(0.1, 2.0))
    def test_cone_is_own_fit(self, cone, r):
        scale = 1 + abs(cone.C1) + abs(cone.C2)
        assert abs(cone_comparison_check(cone.as_pair(), cone.x0, r)) <= 1e-12 * scale * math.exp(R2 * r)

    def test_example(self):
        assert cone_comparison_check(EX1, [0, 0], 1.0) <= 1e-10

    def test_ball_must_fit(self):
        with pytest.raises(BallNotContained):
            cone_comparison_check(EX1, [0.5, 0.5], 0.5)


class TestLipschitz:
    def test_constant(self):
        g, bound, slack = lipschitz_bound_check(constant_pair(), [0, 0], 0.5)
        assert g == 0 and bound == 0 and slack == 0

    def test_example(self):
        g, bound, slack = lipschitz_bound_check(EX1, HALF, 0.4)
        assert g == pytest.approx(abs(dv1(0.5)), abs=1e-7)
        assert g == pytest.approx(0.498324, abs=1e-6)
        assert slack > 0

    def test_affine(self):
        g, bound, slack = lipschitz_bound_check(affine_pair(P_ALIGNED), [0.1, 0.1], 0.5)
        assert g == pytest.approx(1.7, abs=1e-9) and abs(slack) <= 1e-9


class TestBlowup:
    def test_affine_residuals_vanish(self):
        rep = blowup_deviation(affine_pair(P_ALIGNED), [0.4, -0.2], [0.4, 0.2, 0.1])
        assert np.all(rep.residuals <= 1e-12)
        np.testing.assert_allclose(rep.slopes[:, 0], np.tile(P_ALIGNED, (3, 1)), atol=1e-12)

    def test_smooth_point(self):
        rep = blowup_deviation(EX1, HALF, [0.4, 0.2, 0.1, 0.05])
        assert np.all(rep.residuals >= 0) and np.all(rep.decreasing)
        assert np.all(rep.residual_ratios <= 0.7)
        assert abs(rep.slope_norms[-1, 0] - abs(dv1(0.5))) <= 1e-3

    def test_vertex_is_differentiable(self):
        rep = blowup_deviation(EX1, [0, 0], [0.4, 0.2, 0.1, 0.05])
        assert np.all(rep.decreasing) and np.all(rep.residual_ratios <= 0.7)
        assert np.all(rep.slope_norms[-1] <= 1e-3)

    def test_running_sup(self):
        rep = blowup_deviation(EX1, HALF, [0.4, 0.2, 0.1, 0.05])
        order = np.argsort(rep.radii)
        assert np.all(np.diff(rep.L[order], axis=0) >= 0)
        assert np.all(rep.L >= rep.S_plus)

    def test_running_sup_any_order(self):
        vals = np.array([[3.0], [1.0], [2.0]])
        np.testing.assert_array_equal(running_sup(vals, np.array([0.3, 0.1, 0.2])), [[3.0], [1.0], [2.0]])
        np.testing.assert_array_equal(running_sup(vals, np.array([0.1, 0.2, 0.3])), [[3.0], [3.0], [3.0]])

    def test_radii_must_decrease(self):
        with pytest.raises(RadiusOrder):
            blowup_deviation(EX1, HALF, [0.1, 0.2])

    def test_report_serialises(self):
        d = blowup_deviation(EX1, HALF, [0.2, 0.1]).to_dict()
        assert set(d) >= {"radii", "residuals", "slopes", "S_plus_limit", "decreasing"}


class TestSymmetricSlopes:
    def test_affine(self):
        sp, sm, defect = symmetric_slope_check(affine_pair(P_ALIGNED), [0, 0], [0.2, 0.1])
        assert np.all(defect <= 1e-9) and sp == pytest.approx([1.7, 1.7], abs=1e-9)

    def test_example(self):
        sp, sm, defect = symmetric_slope_check(EX1, HALF, [0.1, 0.05])
        assert sp[0] == pytest.approx(abs(dv1(0.5)), abs=1e-3)
        assert sm[0] == pytest.approx(-abs(dv1(0.5)), abs=1e-3)
        assert np.all(defect <= 1e-3)


# --- solved lattice field -------------------------------------------------

MARGIN = 0.1  # keep test balls 2 eps away from the circle, outside the clipped boundary strip


def _centre(rng, rmax):
    while True:
        x = rng.uniform(-rmax, rmax, 2)
        if np.linalg.norm(x) <= rmax:
            return x


@pytest.fixture(scope="module")
def solved(ex1_solution):
    spec, rep = ex1_solution
    return rep.field, spec.h


class TestSolvedField:
    def test_coupled_slack(self, solved):
        field, h = solved
        rng = np.random.default_rng(0)
        worst = np.inf
        for _ in range(50):
            x0 = _centre(rng, 0.6)
            r = rng.uniform(0.1, 1 - MARGIN - np.linalg.norm(x0))
            s = rng.uniform(4 * h, r)
            sp, sm = check_lemma_Ll(field, x0, s, r)
            worst = min(worst, sp.min(), sm.min())
        assert worst >= -5 * h

    def test_a_monotone_at_origin(self, solved):
        field, h = solved
        _, ok = check_a_monotone(field, [0, 0], [0.2, 0.4, 0.6, 0.8])
        assert ok

    def test_a_monotone_random_centres(self, solved):
        field, h = solved
        rng = np.random.default_rng(1)
        for _ in range(20):
            x0 = _centre(rng, 0.6)
            radii = np.sort(rng.uniform(0.1, 1 - MARGIN - np.linalg.norm(x0), 4))
            assert check_a_monotone(field, x0, radii, tol=5 * h)[1]

    def test_cone_comparison(self, solved):
        field, h = solved
        rng = np.random.default_rng(2)
        for _ in range(20):
            x0 = _centre(rng, 0.6)
            r = rng.uniform(0.1, 1 - MARGIN - np.linalg.norm(x0))
            assert cone_comparison_check(field, x0, r) <= 5 * h

    def test_symmetric_defect(self, solved):
        field, h = solved
        rng = np.random.default_rng(3)
        for _ in range(10):
            _, _, defect = symmetric_slope_check(field, _centre(rng, 0.7), [0.2, 0.1])
            assert np.all(defect <= 10 * h)

    def test_blowup_needs_radii_above_lattice_scale(self, solved):
        field, h = solved
        with pytest.raises(RadiusOrder):
            blowup_deviation(field, [0, 0], [0.2, 2 * h])
