import math
import warnings

import numpy as np
import pytest

from oracles import ode_numeric
from qsim.errors import DomainError
from qsim.ode import OdeParams, ratio, ratio_limit, solve_closed_form, trajectory


def resonant(p, t):
    # v2 = e^{a2 t} (v2_0 + a1 r v1_0 t) when a1 (1 - r) = a2
    return math.exp(p.a2 * t) * (p.v2_0 + p.a1 * p.r * p.v1_0 * t)


class TestClosedForm:
    def test_initial_condition(self):
        p = OdeParams(2.0, 1.0, 0.3, 1.7, 0.4)
        assert solve_closed_form(p, 0.0) == (1.7, 0.4)

    def test_no_mutation(self):
        p = OdeParams(2.0, 1.0, 0.0)
        for t in (0.5, 3.0, 10.0):
            v1, v2 = solve_closed_form(p, t)
            assert v2 == 0.0 and v1 == pytest.approx(math.exp(2 * t), rel=1e-15)

    def test_array_input(self):
        p = OdeParams(2.0, 1.0, 0.3)
        v1, v2 = solve_closed_form(p, np.array([0.0, 1.0, 2.0]))
        assert v1.shape == (3,) and v2[1] == solve_closed_form(p, 1.0)[1]

    def test_negative_time(self):
        with pytest.raises(DomainError):
            solve_closed_form(OdeParams(2.0, 1.0, 0.3), -1.0)

    def test_random_parameters_match_integrator(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            a2 = rng.uniform(0.1, 2.0)
            a1 = a2 + rng.uniform(0.05, 2.0)
            p = OdeParams(a1, a2, rng.uniform(0, 1), rng.uniform(0, 3), rng.uniform(0, 3))
            t = rng.uniform(0, 8)
            want = ode_numeric(p.a1, p.a2, p.r, p.v1_0, p.v2_0, t)
            got = solve_closed_form(p, t)
            for g, w in zip(got, want):
                assert abs(g - w) <= 1e-6 * max(abs(w), 1e-300)

    def test_resonant_case(self):
        p = OdeParams(2.0, 1.0, 0.5, 1.0, 0.3)
        for t in (1.0, 5.0):
            want = ode_numeric(2.0, 1.0, 0.5, 1.0, 0.3, t)[1]
            assert solve_closed_form(p, t)[1] == pytest.approx(want, rel=1e-8)
            assert solve_closed_form(p, t)[1] == pytest.approx(resonant(p, t), rel=1e-14)

    @pytest.mark.parametrize("shift", [-1e-9, 1e-9])
    def test_resonant_continuity(self, shift):
        base = OdeParams(2.0, 1.0, 0.5)
        near = OdeParams(2.0, 1.0 + shift, 0.5)
        got = solve_closed_form(near, 10.0)[1]
        assert abs(got - resonant(base, 10.0)) <= 1e-6 * resonant(base, 10.0)

    def test_nonnegative(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            a2 = rng.uniform(0.1, 2.0)
            p = OdeParams(a2 + rng.uniform(0.01, 1), a2, rng.uniform(0, 1), rng.uniform(0, 2), rng.uniform(0, 2))
            v1, v2 = solve_closed_form(p, np.linspace(0, 100, 51))
            assert np.all(v1 >= 0) and np.all(v2 >= 0)


class TestRatioLimit:
    def test_threshold_examples(self):
        assert ratio_limit(OdeParams(2.0, 1.0, 0.4)).positive
        assert not ratio_limit(OdeParams(2.0, 1.0, 0.6)).positive

    def test_limit_value(self):
        p = OdeParams(2.0, 1.0, 0.25)
        lim = ratio_limit(p)
        assert lim.positive and lim.value == pytest.approx(1.0, rel=1e-15)
        v1, v2 = solve_closed_form(p, 100.0)
        assert abs(v1 / v2 - lim.value) <= 1e-6

    def test_boundary_is_zero(self):
        p = OdeParams(2.0, 1.0, 0.5)
        assert p.threshold == 0.5
        assert ratio_limit(p).positive is False

    def test_no_mutation(self):
        lim = ratio_limit(OdeParams(2.0, 1.0, 0.0))
        assert lim.positive and lim.value == math.inf
        assert lim.to_json() == {"limit": "positive", "value": None, "infinite": True}

    def test_needs_founders(self):
        with pytest.raises(DomainError):
            ratio_limit(OdeParams(2.0, 1.0, 0.3, v1_0=0.0, v2_0=1.0))

    def test_verdicts_flip_at_threshold(self):
        grid = np.linspace(0.3, 0.7, 41)
        for r in grid:
            assert ratio_limit(OdeParams(2.0, 1.0, float(r))).positive == (r < 0.5)

    @pytest.mark.parametrize("r", [0.1, 0.3, 0.45, 0.55, 0.7, 0.9])
    def test_log_ratio_slope(self, r):
        # d/dt log(v1/v2) = a1 (1 - r) - a1 r v1/v2 - a2 tends to a negative
        # value in the zero-limit regime and to 0 from above otherwise
        p = OdeParams(2.0, 1.0, r)
        q = ratio(p, 500.0)
        slope = p.growth1 - p.a1 * r * q - p.a2
        if ratio_limit(p).positive:
            assert abs(slope) < 1e-9
            assert q >= ratio_limit(p).value * (1 - 1e-12)
        else:
            assert slope < 0

    def test_log_ratio_slope_boundary(self):
        # v1/v2 ~ 1/(a1 r t): slope close to -1/t
        p = OdeParams(2.0, 1.0, 0.5)
        assert p.growth1 - p.a1 * 0.5 * ratio(p, 1000.0) - p.a2 == pytest.approx(-1 / 1000, rel=1e-3)


class TestParams:
    def test_flags_reversed_rates(self):
        with pytest.warns(UserWarning):
            OdeParams(1.0, 2.0, 0.3)

    @pytest.mark.parametrize("kw", [dict(a1=0.0), dict(a2=-1.0), dict(r=1.5), dict(v1_0=-1.0)])
    def test_validation(self, kw):
        args = dict(a1=2.0, a2=1.0, r=0.3)
        args.update(kw)
        with pytest.raises(DomainError), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            OdeParams(**args)

    def test_ratio_agrees_with_abundances(self):
        p = OdeParams(2.0, 1.0, 0.3, 1.0, 0.5)
        for t in (0.0, 1.0, 10.0):
            v1, v2 = solve_closed_form(p, t)
            assert ratio(p, t) == pytest.approx(v1 / v2, rel=1e-12)

    def test_overflow_saturates(self):
        v1, v2 = solve_closed_form(OdeParams(2.0, 1.0, 0.3), 1e4)
        assert v1 == math.inf and v2 == math.inf
        assert ratio(OdeParams(2.0, 1.0, 0.3), 1e4) == pytest.approx(0.4 / 0.6, rel=1e-12)

    def test_trajectory_rows(self):
        rows = trajectory(OdeParams(2.0, 1.0, 0.3), 5.0, 11)
        assert len(rows) == 11 and rows[0] == (0.0, 1.0, 0.0, math.inf)
        assert all(t2 > t1 for (t1, *_), (t2, *_) in zip(rows, rows[1:]))
