import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peplab.errors import RateSpecError
from peplab.model import (
    AsymmetryParams,
    Configuration,
    RateSpec,
    currents,
    ellipticity_bounds,
    jump_rate,
)


def rate_table(spec):
    k = spec.kappa
    return np.array([[spec.rate(a, b) for b in range(k + 1)] for a in range(k + 1)])


@st.composite
def rate_specs(draw):
    kappa = draw(st.integers(min_value=1, max_value=4))
    pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)
    c = [0.0] + [draw(pos) for _ in range(kappa)]
    d = [0.0] + [draw(pos) for _ in range(kappa)]
    return RateSpec(kappa, c, d)


class TestRateSpec:
    def test_rejects_zero_interior(self):
        with pytest.raises(RateSpecError):
            RateSpec(2, [0, 0, 1], [0, 1, 1])
        with pytest.raises(RateSpecError):
            RateSpec(2, [0, 1, 1], [0, 1, 0])

    def test_rejects_nonzero_origin(self):
        with pytest.raises(RateSpecError):
            RateSpec(1, [0.5, 1], [0, 1])

    def test_rejects_wrong_length(self):
        with pytest.raises(RateSpecError):
            RateSpec(2, [0, 1], [0, 1, 1])

    def test_table_matches_product(self):
        spec = RateSpec(2, [0, 1, 3], [0, 2, 5])
        for a in range(3):
            for b in range(3):
                assert spec.table[a, b] == spec.c[a] * spec.d[2 - b]


class TestNormalize:
    def test_kappa1_example(self):
        # c=(0,1), d=(0,2): both endpoints become sqrt(2); r unchanged
        spec = RateSpec(1, [0, 1], [0, 2])
        before = rate_table(spec)
        norm = spec.normalize()
        assert norm.c[1] == pytest.approx(np.sqrt(2), rel=1e-15)
        assert norm.d[1] == pytest.approx(np.sqrt(2), rel=1e-15)
        assert np.allclose(rate_table(norm), before, rtol=1e-14)
        assert before[1, 0] == 2.0

    def test_already_normalized_is_fixed_point(self):
        spec = RateSpec.sep(2)
        assert spec.normalize() is spec

    def test_kappa2_example(self):
        spec = RateSpec(2, [0, 1, 1], [0, 3, 4])
        before = rate_table(spec)
        norm = spec.normalize()
        assert norm.c[2] == pytest.approx(2.0, rel=1e-14)
        assert norm.d[2] == pytest.approx(2.0, rel=1e-14)
        assert before[2, 0] == 4.0
        assert rate_table(norm)[2, 0] == pytest.approx(4.0, rel=1e-14)

    @given(rate_specs())
    @settings(max_examples=60, deadline=None)
    def test_rate_invariance(self, spec):
        norm = spec.normalize()
        assert norm.c[norm.kappa] == pytest.approx(norm.d[norm.kappa], rel=1e-15)
        assert np.allclose(rate_table(norm), rate_table(spec), rtol=1e-14)


class TestJumpRate:
    def test_sep1_exclusion(self):
        spec = RateSpec.sep(1)
        assert jump_rate(spec, 1, 0) == 1.0
        assert jump_rate(spec, 0, 1) == 0.0
        assert jump_rate(spec, 1, 1) == 0.0

    def test_sep2_table(self):
        spec = RateSpec.sep(2)
        assert jump_rate(spec, 2, 1) == 2.0

    def test_indicator_rates(self):
        spec = RateSpec.indicator(2)
        assert jump_rate(spec, 1, 1) == 1.0
        assert jump_rate(spec, 2, 0) == 1.0

    @given(rate_specs())
    @settings(max_examples=60, deadline=None)
    def test_exclusion_zeros(self, spec):
        for b in range(spec.kappa + 1):
            assert jump_rate(spec, 0, b) == 0.0
        for a in range(spec.kappa + 1):
            assert jump_rate(spec, a, spec.kappa) == 0.0


class TestCurrents:
    def test_diagonal_symmetric_current_vanishes(self):
        spec = RateSpec(3, [0, 1, 2, 5], [0, 0.5, 1, 5])
        asym = AsymmetryParams.from_pq(1, 0.8, 0.2)
        for a in range(4):
            ws, _ = currents(spec, a, a, asym)
            assert ws == 0.0

    def test_symmetric_case_kills_antisymmetric(self):
        spec = RateSpec.sep(1)
        ws, wa = currents(spec, 1, 0, AsymmetryParams.symmetric())
        assert ws == 0.5
        assert wa == 0.0

    def test_sep2_values(self):
        # p - q = 0.2: wS = (r(2,1) - r(1,2))/2 = 1, wA = 0.1 (r(2,1) + r(1,2)) = 0.2
        spec = RateSpec.sep(2)
        asym = AsymmetryParams.from_pq(1, 0.6, 0.4)
        ws, wa = currents(spec, 2, 1, asym)
        assert ws == pytest.approx(1.0)
        assert wa == pytest.approx(0.2)

    @given(rate_specs(), st.integers(0, 4), st.integers(0, 4))
    @settings(max_examples=80, deadline=None)
    def test_symmetry_properties(self, spec, a, b):
        a %= spec.kappa + 1
        b %= spec.kappa + 1
        asym = AsymmetryParams.from_pq(1, 0.7, 0.3)
        ws_ab, wa_ab = currents(spec, a, b, asym)
        ws_ba, wa_ba = currents(spec, b, a, asym)
        assert ws_ab == pytest.approx(-ws_ba, abs=1e-14)
        assert wa_ab == pytest.approx(wa_ba, abs=1e-14)


class TestEllipticity:
    def test_sep1(self):
        assert ellipticity_bounds(RateSpec.sep(1)) == (1.0, 1.0)

    def test_sep2(self):
        eps0, rmax = ellipticity_bounds(RateSpec.sep(2))
        assert eps0 == 1.0  # pair a=1, b=1
        assert rmax == 4.0  # pair a=2, b=0

    def test_indicator(self):
        assert ellipticity_bounds(RateSpec.indicator(2)) == (1.0, 1.0)

    @given(rate_specs())
    @settings(max_examples=60, deadline=None)
    def test_positive(self, spec):
        eps0, rmax = ellipticity_bounds(spec)
        assert 0 < eps0 <= rmax


class TestHoleDuality:
    @given(rate_specs())
    @settings(max_examples=60, deadline=None)
    def test_rate_table_duality(self, spec):
        # a particle jump with occupancies (a, b) is a hole jump with
        # occupancies (kappa-b, kappa-a) under the swapped family (d, c)
        dual = spec.hole_dual()
        kappa = spec.kappa
        for a in range(kappa + 1):
            for b in range(kappa + 1):
                assert spec.table[a, b] == dual.table[kappa - b, kappa - a]


class TestAsymmetryParams:
    def test_sbe_scaling(self):
        asym = AsymmetryParams.sbe(64, 0.8)
        assert asym.p + asym.q == pytest.approx(1.0)
        assert asym.p - asym.q == pytest.approx(0.8 / 8.0)

    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            AsymmetryParams.sbe(1, 1.5)

    def test_from_pq_roundtrip(self):
        asym = AsymmetryParams.from_pq(16, 0.7, 0.3)
        assert asym.alpha == pytest.approx(0.4 * 4)


class TestConfiguration:
    def test_jump_conserves_particles(self):
        conf = Configuration(2, [1, 2, 0, 1])
        before = conf.particles
        conf.apply_jump(1, 2)
        assert conf.particles == before
        assert list(conf.sites) == [1, 1, 1, 1]

    def test_rejects_illegal_jumps(self):
        with pytest.raises(ValueError):
            Configuration(2, [0, 2]).apply_jump(0, 1)  # source empty
        with pytest.raises(ValueError):
            Configuration(2, [1, 2]).apply_jump(0, 1)  # target full
        with pytest.raises(ValueError):
            Configuration(1, [1, 1]).apply_jump(0, 1)  # full ring

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Configuration(1, [0, 2])
