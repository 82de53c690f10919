import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from orlicz.errors import AliasingError, DomainError, ValidationError
from orlicz.operators import (
    GridSignal,
    fourier_coefficients,
    fourier_partial_sum,
    gm_signal,
    hilbert_transform,
    nonconvergence_experiment,
    parseval_gap,
    riesz_growth_fit,
    transfer_index,
)

M = 1 << 12
x = GridSignal.midpoints(M)


def cos_k(k):
    return GridSignal.from_function(lambda t: np.cos(2 * np.pi * k * t), M)


def sin_k(k):
    return GridSignal.from_function(lambda t: np.sin(2 * np.pi * k * t), M)


class TestSignal:
    def test_length_checks(self):
        for n in (4, 12, 100):
            with pytest.raises(ValidationError):
                GridSignal(np.zeros(n))

    def test_midpoints(self):
        assert GridSignal.midpoints(8)[0] == pytest.approx(1 / 16)


class TestPartialSums:
    def test_projection_identity(self):
        for N in (1, 5, 100):
            assert np.allclose(fourier_partial_sum(cos_k(1), N).values, cos_k(1).values, atol=1e-12)

    def test_orthogonality(self):
        assert np.allclose(fourier_partial_sum(cos_k(5), 4).values, 0, atol=1e-12)

    def test_aliasing(self):
        with pytest.raises(AliasingError):
            fourier_partial_sum(cos_k(1), M // 2)

    def test_square_wave_rate(self):
        sq = GridSignal.from_function(lambda t: np.where(t < 0.5, 1.0, -1.0), M)
        err = [(fourier_partial_sum(sq, N) - sq).lp(2) for N in (16, 64, 256)]
        # |S_N f - f|_2 ~ N^{-1/2}: each 4x in N halves the error
        assert err[0] / err[1] == pytest.approx(2.0, rel=0.1)
        assert err[1] / err[2] == pytest.approx(2.0, rel=0.1)

    def test_square_wave_coefficient_oracle(self):
        # coefficients of the square wave: 2/(i pi k) for odd k; Parseval on the tail
        sq = GridSignal.from_function(lambda t: np.where(t < 0.5, 1.0, -1.0), 1 << 16)
        N = 63
        k = np.arange(N + 2, 1 << 20, 2)
        tail = 2 * np.sum((2 / (np.pi * k)) ** 2)
        assert (fourier_partial_sum(sq, N) - sq).lp(2) ** 2 == pytest.approx(tail, rel=0.02)


signals = st.lists(st.floats(-10, 10), min_size=64, max_size=64)


@settings(max_examples=50, deadline=None)
@given(signals)
def test_parseval(v):
    assert parseval_gap(GridSignal(v)) <= 1e-10 or np.allclose(v, 0)


@settings(max_examples=50, deadline=None)
@given(signals)
def test_hilbert_isometry_on_mean_zero(v):
    v = np.asarray(v)
    f = GridSignal(v - v.mean())
    # the Nyquist mode is dropped, so compare against f without it
    c = np.fft.rfft(f.values)
    c[-1] = 0
    f0 = GridSignal(np.fft.irfft(c, n=64))
    assert hilbert_transform(f).lp(2) == pytest.approx(f0.lp(2), rel=1e-10, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(signals, st.integers(0, 31))
def test_partial_sum_idempotent_and_contractive(v, N):
    f = GridSignal(v)
    s = fourier_partial_sum(f, N)
    assert np.allclose(fourier_partial_sum(s, N).values, s.values, atol=1e-10)
    assert s.lp(2) <= f.lp(2) * (1 + 1e-12) + 1e-12


@settings(max_examples=50, deadline=None)
@given(signals)
def test_hilbert_squared_is_minus_identity(v):
    f = GridSignal(v)
    c = np.fft.rfft(f.values)
    c[0] = 0
    c[-1] = 0
    f0 = np.fft.irfft(c, n=64)
    assert np.allclose(hilbert_transform(hilbert_transform(f)).values, -f0, atol=1e-10)


class TestHilbert:
    def test_conjugate_pair(self):
        assert np.allclose(hilbert_transform(cos_k(1)).values, sin_k(1).values, atol=1e-12)
        assert np.allclose(hilbert_transform(sin_k(3)).values, -cos_k(3).values, atol=1e-12)

    def test_constant(self):
        assert np.allclose(hilbert_transform(GridSignal(np.full(M, 7.0))).values, 0, atol=1e-12)


class TestGm:
    def test_formula(self):
        for m, t, want in ((1.0, math.exp(-3), 3.0), (2.0, math.exp(-4), 2.0)):
            assert abs(math.log(t)) ** (1 / m) == pytest.approx(want)
        g = gm_signal(1.0, 8)
        assert np.allclose(g.values, np.abs(np.log(GridSignal.midpoints(8))))

    @pytest.mark.parametrize("m", [1.0, 2.0])
    def test_moments_against_gamma(self, m):
        g = gm_signal(m, 1 << 20)
        for p in (2.0, 4.0, 8.0):
            assert g.lp(p) == pytest.approx(special.gamma(1 + p / m) ** (1 / p), rel=5e-3)

    def test_bad_m(self):
        with pytest.raises(DomainError):
            gm_signal(0.0, 8)


class TestGrowth:
    def test_band_limited(self):
        f = GridSignal(cos_k(3).values + 0.5 * sin_k(7).values)
        fit = riesz_growth_fit(f, np.geomspace(2, 16, 8), [8, 16, 64])
        assert np.allclose(fit.ratio, 1.0, atol=1e-10) and abs(fit.a) < 1e-8

    def test_zero_signal(self):
        with pytest.raises(ValidationError):
            riesz_growth_fit(GridSignal(np.zeros(16)), [2.0, 4.0], [2])


class TestTransferIndex:
    def test_values(self):
        assert transfer_index(1, 1, 1, 1) == pytest.approx(0.5)
        assert transfer_index(2, 1, 1, 1) == pytest.approx(2 / 3)
        assert transfer_index(3.5, 0, 1, 1) == pytest.approx(3.5)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0, 3), st.floats(0, 3), st.floats(0.1, 3), st.floats(0.1, 3))
    def test_monotone(self, m, a1, a2, b, d):
        lo, hi = sorted((a1, a2))
        assert transfer_index(m, hi, b, d) <= transfer_index(m, lo, b, d) <= m / (b * d) * (1 + 1e-12)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            transfer_index(1, -1, 1, 1)


def test_nonconvergence_small():
    r = nonconvergence_experiment(1.0, 1 << 14, [4, 64, 1024])
    assert r.l2_drop > 5 and r.floor_ratio > 0.3
    assert len(r.gpsi) == 3 and r.to_dict()["floor_ratio"] == r.floor_ratio


def test_coefficients_shape():
    assert fourier_coefficients(cos_k(1)).shape == (M // 2 + 1,)
    assert fourier_coefficients(cos_k(1))[1] == pytest.approx(0.5, abs=1e-12)
    assert fourier_coefficients(sin_k(2))[2] == pytest.approx(-0.5j, abs=1e-12)
