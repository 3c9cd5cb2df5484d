import math

import numpy as np
import pytest
from scipy import integrate as si
from scipy.special import gamma

from saplab import functions as fn
from saplab.exponents import constant, lerner_exponent, parse_exponent
from saplab.modular import (ModularCurve, NonMonotoneError, RootFindingError,
                            envelope_tail_bound, implicit_sequence_solve, luxemburg_norm,
                            luxemburg_norm_report, modular, modular_derivative,
                            solve_unit_level, vector_norm)
from saplab.quadrature import QuadratureSpec

CHI = fn.indicator(0.0, 1.0)


def test_modular_indicator_closed_form():
    assert modular(CHI, constant(2), 1.0) == pytest.approx(1.0, abs=1e-14)
    assert modular(CHI, constant(2), 2.0) == pytest.approx(0.25, abs=1e-14)
    assert modular(fn.zero(), lerner_exponent(3), 0.7) == 0.0


def test_modular_derivative_closed_form():
    assert modular_derivative(CHI, constant(2), 1.0) == pytest.approx(-2.0, abs=1e-13)
    assert modular_derivative(CHI, constant(3), 2.0) == pytest.approx(-0.1875, abs=1e-13)
    assert modular_derivative(fn.zero(), constant(3), 2.0) == 0.0


def test_modular_lerner_refinement_oracle():
    # doubling T until two successive values agree to 1e-8
    f, p = fn.reciprocal_decay(), lerner_exponent(3)
    prev = None
    T = 250.0
    while True:
        v = modular(f, p, 1.0, QuadratureSpec(truncation_T=T, abs_tol=1e-13))
        if prev is not None and abs(v - prev) < 1e-8:
            break
        prev, T = v, 2 * T
        assert T < 1e6
    assert modular(f, p, 1.0) == pytest.approx(v, abs=1e-8)


def test_modular_lerner_against_scipy():
    f, p = fn.reciprocal_decay(), lerner_exponent(3)

    def dens(x):
        return (1.0 / (1.0 + x)) ** p(x)

    ref = 2 * (si.quad(dens, 0, 1e3, limit=500, epsabs=1e-13)[0]
               + si.quad(dens, 1e3, np.inf, limit=500, epsabs=1e-13)[0])
    assert modular(f, p, 1.0) == pytest.approx(ref, rel=1e-9)


def test_tail_bound_dominates():
    f, p = fn.reciprocal_decay(), lerner_exponent(3)
    lam, R = 0.5, 10.0
    tail = 2 * si.quad(lambda x: (1 / (lam * (1 + x))) ** p(x), R, np.inf, limit=400)[0]
    assert tail <= envelope_tail_bound(1.0, lam, p.p_minus, R)


def test_modular_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        modular(CHI, constant(2), 0.0)


def test_norm_closed_forms():
    assert luxemburg_norm(CHI, constant(3)) == pytest.approx(1.0, abs=1e-10)
    assert luxemburg_norm(fn.indicator(0, 1, 2.0), constant(2)) == pytest.approx(2.0, abs=1e-10)
    assert luxemburg_norm(fn.zero(), lerner_exponent(3)) == 0.0
    assert luxemburg_norm(fn.reciprocal_decay(), constant(2)) == pytest.approx(math.sqrt(2), rel=1e-9)
    g3 = (gamma(2.0) / 3 ** 2) ** (1 / 3)
    assert luxemburg_norm(fn.gaussian_moment(), constant(3)) == pytest.approx(g3, rel=1e-9)


def test_norm_lerner_refinement_oracle():
    f, p = fn.reciprocal_decay(), lerner_exponent(3)
    base = luxemburg_norm_report(f, p)
    tight = luxemburg_norm(f, p, QuadratureSpec().tightened(10), root_tol=1e-11)
    assert base.norm == pytest.approx(tight, abs=1e-6)
    assert abs(base.modular_at_norm - 1.0) < 1e-8
    assert base.error_bound < 1e-6


def test_norm_homogeneity():
    p = parse_exponent("clamp(lerner(3), 2.5, 3.5)")
    f = fn.bump(0.0, 2.0)
    n1 = luxemburg_norm(f, p)
    n3 = luxemburg_norm(f.scaled(3.0), p)
    assert n3 == pytest.approx(3 * n1, rel=1e-9)


def test_vector_norm():
    p = constant(2)
    assert vector_norm([CHI], p) == pytest.approx(luxemburg_norm(CHI, p))
    assert vector_norm([CHI, CHI], p) == pytest.approx(math.sqrt(2), rel=1e-9)
    assert vector_norm([CHI, fn.zero()], p) == pytest.approx(1.0, rel=1e-9)


def _power_curve(c):
    return ModularCurve(lambda lam: c / lam ** 2, lambda lam: -2 * c / lam ** 3)


def test_implicit_sequence_closed_form_roots():
    curves = [_power_curve(1 + 1 / k) for k in range(1, 8)]
    r = implicit_sequence_solve(curves, _power_curve(1.0), 1e-12)
    assert r.limit == pytest.approx(1.0, abs=1e-11)
    for k, lam in enumerate(r.lambdas, start=1):
        assert lam == pytest.approx(math.sqrt(1 + 1 / k), abs=1e-11)


def test_implicit_sequence_limit_is_lq_norm():
    w, q = fn.bump(0.0, 1.0), 3.0
    wq = si.quad(lambda x: abs(w(x)) ** q, -1, 1, epsabs=1e-14)[0] ** (1 / q)
    limit = ModularCurve.of(w, constant(q))
    r = implicit_sequence_solve([limit] * 3, limit, 1e-12)
    assert r.limit == pytest.approx(wq, rel=1e-9)
    assert max(r.deviations) < 1e-10


def test_non_monotone_curve_detected():
    bad = ModularCurve(lambda lam: 1.0 + 0.5 * math.sin(20 * lam) - 0.0 * lam)
    good = _power_curve(1.0)
    with pytest.raises((NonMonotoneError, RootFindingError)):
        implicit_sequence_solve([bad], good, 1e-10)


def test_solve_unit_level_without_root_raises():
    with pytest.raises(RootFindingError):
        solve_unit_level(ModularCurve(lambda lam: 2.0), 0.5, 2.0, max_iter=20)
