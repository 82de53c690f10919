import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from orlicz.convex import ClosedFormW, n_from_w
from orlicz.errors import InsufficientTailError, ValidationError
from orlicz.generators import sample_from_dict
from orlicz.norms import (
    MomentCurve,
    NormReport,
    Sample,
    g0_membership,
    gpsi_norm,
    gpsi_value,
    lp_norm,
    luxemburg_norm,
    moment_curve,
    reliability_cap,
    tail_exponent_fit,
    ucn_diagnostic,
)
from orlicz.psi import MR

P_GRID = np.geomspace(2, 32, 24)


class TestSample:
    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValidationError):
            Sample([])
        with pytest.raises(ValidationError):
            Sample([1.0, np.nan])

    def test_values_are_frozen(self):
        s = Sample([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 3.0

    def test_csv_round_trip(self, tmp_path):
        s = Sample(np.random.default_rng(0).standard_normal(100))
        s.to_csv(tmp_path / "s.csv")
        assert np.array_equal(Sample.load(tmp_path / "s.csv").values, s.values)

    def test_binary_round_trip(self, tmp_path):
        s = Sample(np.random.default_rng(1).standard_normal(257))
        s.to_binary(tmp_path / "s.bin")
        raw = (tmp_path / "s.bin").read_bytes()
        assert len(raw) == 8 + 8 * 257 and int.from_bytes(raw[:8], "little") == 257
        assert np.array_equal(Sample.load(tmp_path / "s.bin").values, s.values)

    def test_truncated_binary(self, tmp_path):
        s = Sample([1.0, 2.0, 3.0])
        s.to_binary(tmp_path / "s.bin")
        (tmp_path / "t.bin").write_bytes((tmp_path / "s.bin").read_bytes()[:-4])
        with pytest.raises(ValidationError):
            Sample.from_binary(tmp_path / "t.bin")


class TestLp:
    def test_examples(self):
        assert lp_norm(Sample([1, 1, 1]), 7) == pytest.approx(1.0)
        assert lp_norm(Sample([0, 2]), 2) == pytest.approx(math.sqrt(2))
        assert lp_norm(Sample([0, 2]), 400) == pytest.approx(2 * 0.5 ** (1 / 400))

    def test_no_overflow(self):
        assert lp_norm(Sample([1e300, 0.0]), 50) == pytest.approx(1e300 * 0.5 ** (1 / 50))

    def test_zero_sample(self):
        assert lp_norm(Sample([0.0, 0.0]), 3) == 0.0

    def test_gaussian_against_gamma_formula(self):
        x = sample_from_dict({"kind": "gaussian"}, 10**6, 0).values
        for p in (2.0, 4.0, 6.0):
            exact = (2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)
            assert lp_norm(x, p) == pytest.approx(exact, rel=0.01)


samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60)


@settings(max_examples=60, deadline=None)
@given(samples, st.floats(-50, 50).filter(lambda c: c != 0))
def test_lp_homogeneity(x, c):
    s = Sample(x)
    for p in (1.0, 2.5, 9.0):
        assert lp_norm(s.scaled(c), p) == pytest.approx(abs(c) * lp_norm(s, p), rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=60))
def test_lp_triangle(pairs):
    a, b = np.array(pairs).T
    for p in (1.0, 3.0, 12.0):
        assert lp_norm(a + b, p) <= (lp_norm(a, p) + lp_norm(b, p)) * (1 + 1e-12) + 1e-300


@settings(max_examples=60, deadline=None)
@given(samples)
def test_moment_curve_is_lyapunov_monotone(x):
    c = moment_curve(Sample(x), P_GRID)
    assert np.all(np.diff(c.lp_values) >= 0)


class TestMomentCurve:
    def test_constant_sample_is_flat(self):
        c = moment_curve(Sample([3.0] * 10), P_GRID)
        assert np.allclose(c.lp_values, 3.0, rtol=1e-12)

    def test_cap_flag(self):
        n = 1000
        assert reliability_cap(n) == pytest.approx(2 * math.log2(n))
        assert not moment_curve(np.ones(n), [2.0, 19.0]).over_cap
        assert moment_curve(np.ones(n), [2.0, 21.0]).over_cap

    def test_bad_grid(self):
        with pytest.raises(ValidationError):
            moment_curve(Sample([1.0]), [3.0, 2.0])


class TestGpsi:
    def test_zero_sample(self):
        assert gpsi_value(np.zeros(5), MR(2), P_GRID) == 0.0

    def test_report_json_round_trip(self):
        r = gpsi_norm(moment_curve(np.arange(1, 11.0), P_GRID), MR(2))
        back = NormReport.from_json(r.to_json())
        assert back.gpsi_norm == r.gpsi_norm and back.argmax_p == r.argmax_p

    @pytest.mark.slow
    def test_stable_in_n(self):
        desc = {"kind": "weibull", "m": 2}
        p = np.geomspace(2, 24, 24)
        small = gpsi_value(sample_from_dict(desc, 10**4, 5), MR(2), p)
        large = gpsi_value(sample_from_dict(desc, 10**6, 5), MR(2), p)
        assert large == pytest.approx(small, rel=0.1)


class TestLuxemburg:
    def test_zero(self):
        assert luxemburg_norm(np.zeros(4), n_from_w(ClosedFormW("exp", 1.0))) == 0.0

    def test_unit_sample_in_quadratic_region(self):
        # N(u) = u^2 below e^2 when the quadratic coefficient is 1
        N = n_from_w(ClosedFormW("exp", 1.0))
        x = np.ones(8) / math.sqrt(N.quad_coeff)
        assert luxemburg_norm(x, N) == pytest.approx(2.0, rel=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.01, 100))
    def test_homogeneity(self, seed, c):
        N = n_from_w(ClosedFormW("exp", 1.0))
        x = np.random.default_rng(seed).standard_normal(500)
        assert luxemburg_norm(c * x, N) == pytest.approx(c * luxemburg_norm(x, N), rel=1e-7)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_triangle(self, seed):
        N = n_from_w(ClosedFormW("exp", 1.0))
        r = np.random.default_rng(seed)
        a, b = r.standard_normal(300), r.exponential(size=300)
        assert luxemburg_norm(a + b, N) <= (luxemburg_norm(a, N) + luxemburg_norm(b, N)) * (1 + 1e-7)


class TestMembership:
    def test_bounded_decreases(self):
        x = sample_from_dict({"kind": "uniform"}, 10**5, 2)
        c = moment_curve(x, np.geomspace(2, 32, 32))
        for psi in (MR(0.5), MR(1), MR(2)):
            assert g0_membership(c, psi).verdict == "decreasing"

    @pytest.mark.parametrize("m", [1.0, 2.0])
    def test_gm_law_plateau_and_decrease(self, m):
        x = sample_from_dict({"kind": "weibull", "m": m}, 10**6, 3)
        # moments of a tail exp(-x**m) are resolved up to p of order m log n
        c = moment_curve(x, np.geomspace(2, m * math.log(10**6), 32))
        assert g0_membership(c, MR(m)).verdict == "plateau"
        assert g0_membership(c, MR(m / 2)).verdict == "decreasing"

    def test_ucn_bounded_family(self):
        p = np.geomspace(2, 32, 32)
        curves = [moment_curve(sample_from_dict({"kind": "uniform", "scale": s}, 10**4, 7), p) for s in (0.5, 1, 2)]
        assert ucn_diagnostic(curves, MR(1)).verdict == "decreasing"

    def test_ucn_needs_shared_grid(self):
        a = moment_curve(np.ones(5), [2.0, 3.0])
        b = moment_curve(np.ones(5), [2.0, 4.0])
        with pytest.raises(ValidationError):
            ucn_diagnostic([a, b], MR(1))


class TestTailFit:
    def test_weibull_two(self):
        f = tail_exponent_fit(sample_from_dict({"kind": "weibull", "m": 2}, 10**6, 11))
        assert f.slope == pytest.approx(2.0, abs=0.1)
        assert f.n_points >= 8 and f.u_lo < f.u_hi

    def test_exponential(self):
        f = tail_exponent_fit(sample_from_dict({"kind": "exponential"}, 10**6, 12))
        assert f.slope == pytest.approx(1.0, abs=0.1)

    def test_bounded(self):
        with pytest.raises(InsufficientTailError):
            tail_exponent_fit(sample_from_dict({"kind": "uniform"}, 10**6, 13))

    def test_too_small(self):
        with pytest.raises(InsufficientTailError):
            tail_exponent_fit(np.random.default_rng(0).standard_normal(1000))

    def test_atoms(self):
        with pytest.raises(InsufficientTailError):
            tail_exponent_fit(np.ones(10**6))

    def test_loglog_model(self):
        # P(|x| > u) = exp(-(log u)^2) for u > 1
        x = np.exp(np.sqrt(np.random.default_rng(3).standard_exponential(10**6)))
        f = tail_exponent_fit(x, model="loglog")
        assert f.slope == pytest.approx(2.0, abs=0.1)

    def test_unknown_model(self):
        with pytest.raises(ValidationError):
            tail_exponent_fit(np.ones(10**6), model="pareto")
