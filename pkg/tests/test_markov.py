from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tugsys.errors import ModeOutOfRange, NonpositiveOffDiagonal, NotSquare, RowSumViolation
from tugsys.markov import (
    GeneratorMatrix,
    mode_distribution,
    sample_modes,
    switch_sample,
    symmetric_generator,
    validate_generator,
)


def rk4_distribution(c, i, s, steps=1024):
    """Integrate d rho/ds = rho (c/2) from the i-th unit vector with classical RK4."""
    c = np.asarray(c, dtype=float)
    rho = np.zeros(len(c))
    rho[i] = 1.0
    if s == 0:
        return rho
    dt = s / steps
    f = lambda r: r @ (0.5 * c)  # noqa: E731
    for _ in range(steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * dt * k1)
        k3 = f(rho + 0.5 * dt * k2)
        k4 = f(rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


UNIFORM3 = [[-2, 1, 1], [1, -2, 1], [1, 1, -2]]


@st.composite
def generators(draw, max_m=4):
    m = draw(st.integers(2, max_m))
    off = np.array(draw(st.lists(st.floats(0.05, 3.0), min_size=m * m, max_size=m * m))).reshape(m, m)
    np.fill_diagonal(off, 0.0)
    c = off - np.diag(off.sum(axis=1))
    return validate_generator(c)


class TestValidation:
    def test_symmetric_pair_valid(self):
        g = validate_generator([[-1, 1], [1, -1]])
        assert g.m == 2
        np.testing.assert_array_equal(g.c, [[-1, 1], [1, -1]])

    def test_uniform_three_state_valid(self):
        assert validate_generator(UNIFORM3).m == 3

    def test_row_sum_violation_names_row(self):
        with pytest.raises(RowSumViolation, match="row 2"):
            validate_generator([[-1, 1], [0.5, -1]])

    def test_nonpositive_off_diagonal(self):
        with pytest.raises(NonpositiveOffDiagonal):
            validate_generator([[0, 0], [0, 0]])

    def test_not_square(self):
        with pytest.raises(NotSquare):
            validate_generator([[-1, 1, 0], [1, -1, 0]])

    def test_single_mode_rejected(self):
        with pytest.raises(NotSquare):
            validate_generator([[0.0]])

    def test_row_sum_tolerance(self):
        validate_generator([[-1, 1 + 5e-13], [1, -1]])
        with pytest.raises(RowSumViolation):
            validate_generator([[-1, 1 + 1e-11], [1, -1]])


class TestDistribution:
    def test_initial_condition(self):
        np.testing.assert_array_equal(mode_distribution(symmetric_generator(), 0, 0.0).probabilities, [1, 0])

    def test_small_time_two_state(self):
        p = mode_distribution(symmetric_generator(), 0, 0.01).probabilities
        np.testing.assert_allclose(p, [0.9950249, 0.0049751], atol=5e-8)
        np.testing.assert_allclose(p, rk4_distribution([[-1, 1], [1, -1]], 0, 0.01), atol=1e-13)

    def test_three_state_hand_value(self):
        s = (2 / 3) * np.log(2)
        p = mode_distribution(validate_generator(UNIFORM3), 0, s).probabilities
        np.testing.assert_allclose(p, [2 / 3, 1 / 6, 1 / 6], atol=1e-12)

    def test_long_time_uniform_limit(self):
        # the uniform law is stationary exactly when columns also sum to zero
        for c in ([[-1, 1], [1, -1]], UNIFORM3, [[-3, 1, 2], [2, -3, 1], [1, 2, -3]]):
            g = validate_generator(c)
            for i in range(g.m):
                np.testing.assert_allclose(mode_distribution(g, i, 20.0).probabilities, 1 / g.m, atol=1e-6)

    def test_two_state_closed_form_log_grid(self):
        g = symmetric_generator()
        for s in np.logspace(-4, 1, 60):
            p = mode_distribution(g, 0, s).probabilities
            assert abs(p[0] - 0.5 * (1 + np.exp(-s))) <= 1e-10
            assert abs(p[1] - 0.5 * (1 - np.exp(-s))) <= 1e-10

    def test_mode_out_of_range(self):
        with pytest.raises(ModeOutOfRange):
            mode_distribution(symmetric_generator(), 2, 0.1)
        with pytest.raises(ModeOutOfRange):
            mode_distribution(symmetric_generator(), -1, 0.1)

    @settings(max_examples=40, deadline=None)
    @given(generators(), st.floats(0.0, 5.0))
    def test_matches_rk4_and_is_distribution(self, g, s):
        for i in range(g.m):
            p = mode_distribution(g, i, s).probabilities
            assert np.all(p >= 0) and np.all(p <= 1)
            assert abs(p.sum() - 1) <= 1e-12
            np.testing.assert_allclose(p, rk4_distribution(g.c, i, s), atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(generators(), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_chapman_kolmogorov(self, g, s, t):
        P_s, P_t, P_st = g.transition_matrix(s), g.transition_matrix(t), g.transition_matrix(s + t)
        np.testing.assert_allclose(P_s @ P_t, P_st, atol=1e-10)

    def test_unbalanced_generator_has_nonuniform_limit(self):
        g = validate_generator([[-3, 1, 2], [0.5, -1, 0.5], [2, 2, -4]])
        pi = mode_distribution(g, 0, 60.0).probabilities
        np.testing.assert_allclose(pi @ g.c, 0, atol=1e-12)
        assert np.ptp(pi) > 0.1


class TestSampling:
    def test_spec_cases(self):
        g = symmetric_generator()
        assert switch_sample(g, 0, 0.0, 0.73) == 0
        assert switch_sample(g, 0, 0.01, 0.999) == 1
        assert switch_sample(g, 0, 0.01, 0.5) == 0

    def test_switch_sample_checks_mode(self):
        with pytest.raises(ModeOutOfRange):
            switch_sample(symmetric_generator(), 5, 0.1, 0.5)

    def test_frequencies_within_four_stderr(self):
        g = validate_generator([[-3, 1, 2], [0.5, -1, 0.5], [2, 2, -4]])
        P = g.transition_matrix(0.3)
        rng = np.random.default_rng(2024)
        n = 10**6
        for i in range(3):
            draws = sample_modes(P, np.full(n, i), rng.random(n))
            freq = np.bincount(draws, minlength=3) / n
            se = np.sqrt(P[i] * (1 - P[i]) / n)
            assert np.all(np.abs(freq - P[i]) <= 4 * se + 1e-15)

    def test_uniform_near_one_stays_in_range(self):
        P = symmetric_generator(3).transition_matrix(0.2)
        assert sample_modes(P, np.array([0, 1, 2]), np.full(3, np.nextafter(1.0, 0.0))).max() <= 2


def test_generator_is_frozen():
    g = GeneratorMatrix(np.array([[-1.0, 1.0], [1.0, -1.0]]))
    with pytest.raises(Exception):
        g.c = None
