import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import m_uniform_quad
from qsim import distributions as D
from qsim.errors import NonconvergentQuadrature
from qsim.streams import as_generator


def table_law():
    # density 2x on [0, 1]
    return D.Tabulated((0.0, 0.5, 1.0), (0.0, 1.0, 2.0))


ALL_LAWS = [
    D.Uniform(2.0),
    D.Uniform(1.5, lo=0.5),
    D.PointMass(0.5),
    D.Mixture(((0.3, D.PointMass(1.0)), (0.7, D.Uniform(3.0)))),
    table_law(),
]


class TestSampling:
    def test_point_mass_is_degenerate(self):
        rng = as_generator(3)
        assert all(D.sample_rate(D.PointMass(0.5), rng) == 0.5 for _ in range(100))

    def test_uniform_mean_and_median(self):
        xs = D.sample_rates(D.Uniform(2.0), 11, 10**6)
        se = math.sqrt(1 / 3) / math.sqrt(xs.size)
        assert abs(xs.mean() - 1.0) <= 3 * se
        frac = (xs > 1).mean()
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / xs.size)

    def test_deterministic_given_stream(self):
        a = D.sample_rates(ALL_LAWS[3], 42, 50)
        b = D.sample_rates(ALL_LAWS[3], 42, 50)
        assert np.array_equal(a, b)

    def test_scalar_draws_match_vector_draws(self):
        rng = as_generator(5)
        scalar = [D.sample_rate(table_law(), rng) for _ in range(20)]
        assert np.array_equal(scalar, D.sample_rates(table_law(), 5, 20))

    @pytest.mark.parametrize("law", ALL_LAWS, ids=lambda d: type(d).__name__)
    def test_sampler_agrees_with_integrator(self, law):
        f = lambda x: math.cos(x) + x * x  # noqa: E731
        xs = D.sample_rates(law, 7, 10**6)
        vals = np.cos(xs) + xs ** 2
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - D.expect(law, f)) <= 4 * se + 1e-12

    def test_table_quantile_has_linear_density(self):
        xs = D.sample_rates(table_law(), 1, 10**5)
        # density 2x: P(X <= 0.5) = 0.25
        assert abs((xs <= 0.5).mean() - 0.25) < 0.005


class TestExpect:
    def test_atom(self):
        assert D.expect(D.PointMass(2.0), lambda x: x) == 2.0

    def test_uniform_mean(self):
        assert D.expect(D.Uniform(1.0), lambda x: x, (0.0, 1.0)) == pytest.approx(0.5, rel=1e-14)

    def test_condition_two_integrand_against_independent_quadrature(self):
        val = D.expect(D.Uniform(1.5), lambda x: 0.8 * x / (1 - 0.2 * x), (0.0, 1.5))
        assert val == pytest.approx(m_uniform_quad(1.5, 0.8), rel=1e-8)

    @pytest.mark.parametrize("law", ALL_LAWS, ids=lambda d: type(d).__name__)
    def test_total_mass_is_one(self, law):
        assert D.expect(law, lambda x: 1.0) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("k", range(6))
    @pytest.mark.parametrize("a", [0.7, 1.5, 3.0])
    def test_uniform_moments(self, a, k):
        assert D.expect(D.Uniform(a), lambda x: x ** k) == pytest.approx(a ** k / (k + 1), rel=1e-10)

    def test_log_divergence_is_infinite(self):
        # 1 / (1 - x) against uniform on [0, 1]
        assert D.expect(D.Uniform(1.0), lambda x: 1 / (1 - x), (0.0, 1.0)) == math.inf

    def test_integrable_singularity_is_finite(self):
        val = D.expect(D.Uniform(1.0), lambda x: 1 / math.sqrt(1 - x), (0.0, 1.0))
        assert val == pytest.approx(2.0, rel=1e-9)

    def test_atom_on_pole_is_infinite(self):
        assert D.expect(D.PointMass(2.0), lambda x: 1 / (2.0 - x)) == math.inf

    def test_region_clips_support(self):
        assert D.expect(D.Uniform(2.0), lambda x: 1.0, (0.0, 0.5)) == pytest.approx(0.25)

    def test_hopeless_integrand_raises(self):
        with pytest.raises(NonconvergentQuadrature):
            D.expect(D.Uniform(1.0), lambda x: math.sin(1e6 * x) * math.sin(3e5 / (x + 1e-9)))


class TestMassAbove:
    @pytest.mark.parametrize(
        "law, t, expected",
        [(D.Uniform(2.0), 1.0, 0.5), (D.Uniform(1.0), 1.0, 0.0), (D.PointMass(3.0), 1.0, 1.0),
         (D.PointMass(1.0), 1.0, 0.0), (D.Uniform(2.0), math.inf, 0.0)],
    )
    def test_exact_values(self, law, t, expected):
        assert D.mass_above(law, t) == expected

    @pytest.mark.parametrize("law", ALL_LAWS, ids=lambda d: type(d).__name__)
    def test_nonincreasing(self, law):
        ts = np.linspace(0, 4, 401)
        vals = [D.mass_above(law, t) for t in ts]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_right_continuous_on_grid(self):
        law = table_law()
        for x in law.grid:
            assert D.mass_above(law, x + 1e-12) == pytest.approx(D.mass_above(law, x), abs=1e-10)

    @given(st.floats(0.01, 10), st.floats(0, 12))
    @settings(max_examples=100, deadline=None)
    def test_uniform_tail_formula(self, a, t):
        assert D.mass_above(D.Uniform(a), t) == pytest.approx(max(0.0, 1 - t / a) if t < a else 0.0)


class TestConstruction:
    def test_flags(self):
        assert D.Uniform(1.0).is_absolutely_continuous
        assert not D.PointMass(1.0).is_absolutely_continuous
        assert not ALL_LAWS[3].is_absolutely_continuous
        assert table_law().is_absolutely_continuous

    def test_support_upper(self):
        assert [d.support_upper for d in ALL_LAWS] == [2.0, 1.5, 0.5, 3.0, 1.0]

    def test_mixture_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            D.Mixture(((0.5, D.Uniform(1.0)), (0.4, D.PointMass(1.0))))
        with pytest.raises(ValueError):
            D.Mixture(((1.2, D.Uniform(1.0)), (-0.2, D.PointMass(1.0))))

    def test_table_must_be_normalized(self):
        with pytest.raises(ValueError):
            D.Tabulated((0.0, 1.0), (1.0, 1.2))
        with pytest.raises(ValueError):
            D.Tabulated((0.0, 1.0, 2.0), (1.0, -0.5, 1.25))

    @pytest.mark.parametrize("law", ALL_LAWS, ids=lambda d: type(d).__name__)
    def test_json_round_trip(self, law):
        assert D.from_json(law.to_json()) == law

    def test_json_descriptors(self):
        assert D.from_json({"kind": "uniform", "a": 1.5}) == D.Uniform(1.5)
        assert D.from_json({"kind": "point", "lambda": 2.0}) == D.PointMass(2.0)
        mix = D.from_json({"kind": "mixture", "components": [
            {"weight": 0.5, "dist": {"kind": "point", "lambda": 1.0}},
            [0.5, {"kind": "uniform", "a": 2.0}],
        ]})
        assert D.expect(mix, lambda x: x) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            D.from_json({"kind": "gamma"})
