import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz.convex import GridFunction, default_p_grid, w_from_psi
from orlicz.errors import DomainError, ValidationError
from orlicz.psi import (
    MR,
    Const,
    GridBacked,
    LogPower,
    Product,
    PsiSpec,
    SlowlyVaryingSpec,
    ZBeta,
    essential_order,
    log_tail_profile,
    psi_eval,
    slowly_varying_residual,
    tail_profile,
)


def square_backed():
    # p log psi(p) = p^2 / 4, the conjugate of W(z) = z^2
    p = np.geomspace(2, 256, 4096)
    return GridBacked(GridFunction(p, p * p / 4))


class TestEval:
    def test_mr_values(self):
        assert psi_eval(MR(2), 4.0) == pytest.approx(2.0)
        assert psi_eval(MR(1, 1), math.e**2) == pytest.approx(2 * math.e**2)

    def test_zbeta_value(self):
        assert psi_eval(ZBeta(1, 1), 3.0) == pytest.approx(math.e**3)

    def test_below_two_is_rejected(self):
        for spec in (MR(2), ZBeta(1, 1), square_backed()):
            with pytest.raises(DomainError):
                psi_eval(spec, 1.5)

    def test_bad_parameters(self):
        with pytest.raises(ValidationError):
            MR(0)
        with pytest.raises(ValidationError):
            ZBeta(-1, 1)
        with pytest.raises(ValidationError):
            GridBacked(GridFunction(np.linspace(2, 10, 20), -np.linspace(2, 10, 20) ** 2))

    def test_grid_backed_domain(self):
        with pytest.raises(DomainError):
            square_backed()(300.0)


@pytest.mark.parametrize("spec", [MR(0.5), MR(1), MR(2), MR(4), MR(1, 1), MR(2, 0.5), ZBeta(1, 1), ZBeta(0.25, 1),
                                  ZBeta(0.5, 0.5)])
def test_catalog_validates(spec):
    spec.validate()


def test_psi_grows_without_bound():
    p = default_p_grid()
    for spec in (MR(0.5), MR(4), ZBeta(0.5, 0.5)):
        v = spec(p)
        assert np.all(np.diff(v) > 0) and v[-1] > 2 * v[0]


@pytest.mark.parametrize("spec", [MR(2), MR(1, 0.5), ZBeta(1, 1), square_backed()])
def test_json_round_trip(spec):
    back = PsiSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    p = np.geomspace(2, 200, 40)
    assert np.allclose(back.log_psi(p), spec.log_psi(p), rtol=1e-14)


class TestTail:
    def test_zbeta_display(self):
        assert log_tail_profile(ZBeta(1, 1), math.e**4) == pytest.approx(-64.0)
        assert tail_profile(ZBeta(1, 1), math.e**4) == pytest.approx(math.exp(-64))

    def test_zbeta_exact_coefficient(self):
        # Legendre transform of p^2: (log x)^2 / 4
        assert log_tail_profile(ZBeta(1, 1), math.e**4, exact=True) == pytest.approx(-4.0)

    def test_grid_backed(self):
        assert tail_profile(square_backed(), math.e**3) == pytest.approx(math.exp(-9), rel=1e-3)

    def test_grid_backed_agrees_with_generator(self):
        gb = square_backed()
        x = np.geomspace(math.e**2.5, math.e**20, 30)
        w = w_from_psi(gb)
        assert np.allclose(tail_profile(gb, x), np.exp(-w(np.log(x))), rtol=1e-6)

    def test_mr_slope(self):
        x = np.geomspace(10, 1e4, 50)
        slope = np.polyfit(np.log(x), np.log(-log_tail_profile(MR(2), x)), 1)[0]
        assert slope == pytest.approx(2.0, abs=1e-9)

    def test_threshold(self):
        with pytest.raises(DomainError):
            tail_profile(MR(2), 3.0)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_mr_generator_closed_form(m):
    w = w_from_psi(MR(m))
    z = w.grid[len(w.grid) // 10: -len(w.grid) // 10]
    ratio = w.values[len(w.grid) // 10: -len(w.grid) // 10] * m * np.exp(1 - m * z)
    assert np.allclose(ratio, 1.0, rtol=1e-3)


class TestSlowlyVarying:
    def test_constant(self):
        assert np.all(slowly_varying_residual(Const(3.0), np.geomspace(2, 1e9, 30)) == 0)

    def test_log_power(self):
        u = math.exp(100)
        r = slowly_varying_residual(LogPower(1.0), [u])[0]
        oracle = abs(math.log(2 + u / math.log(2 + u)) / math.log(2 + u) - 1)
        assert r == pytest.approx(oracle, rel=1e-12)
        assert r == pytest.approx(math.log(100) / 100, rel=0.01)

    def test_negative_power_decays(self):
        r = slowly_varying_residual(LogPower(-1.0), np.geomspace(1e3, 1e300, 200))
        assert np.all(np.diff(r) < 0) and r[-1] < 0.01

    def test_product_and_round_trip(self):
        L = Product((Const(2.0), LogPower(0.5)))
        back = SlowlyVaryingSpec.from_dict(L.to_dict())
        u = np.geomspace(2, 1e6, 9)
        assert np.allclose(back(u), 2 * np.log(2 + u) ** 0.5)
        assert not back.is_constant
        assert Product((Const(2.0), Const(3.0))).is_constant

    def test_bad_grid(self):
        with pytest.raises(ValidationError):
            slowly_varying_residual(Const(), [1.0, 3.0])
        with pytest.raises(ValidationError):
            LogPower(1.0, C=1.0)


class TestOrder:
    def test_dominated(self):
        assert essential_order(MR(2), MR(1)).verdict == "dominated"

    def test_comparable(self):
        v = essential_order(MR(2), MR(2))
        assert v.verdict == "comparable" and v.c1 == pytest.approx(1) and v.c2 == pytest.approx(1)

    def test_dominating(self):
        assert essential_order(MR(2, 1), MR(2)).verdict == "dominating"

    def test_exponential_beats_power(self):
        assert essential_order(ZBeta(0.1, 1), MR(0.5)).verdict == "dominating"


exponents = st.sampled_from([0.5, 1.0, 2.0, 3.0, 4.0])


@settings(max_examples=30, deadline=None)
@given(exponents, exponents, st.sampled_from([0.0, 0.5, 1.0]))
def test_order_antisymmetry(m1, m2, r):
    swap = {"dominated": "dominating", "dominating": "dominated",
            "comparable": "comparable", "inconclusive": "inconclusive"}
    a, b = MR(m1, r), MR(m2)
    assert essential_order(b, a).verdict == swap[essential_order(a, b).verdict]
