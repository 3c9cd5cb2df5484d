import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as si

from saplab import functions as fn
from saplab import sio
from saplab.quadrature import QuadratureSpec
from saplab.symbols import APPolynomial

QUAD = QuadratureSpec(abs_tol=1e-9)


@pytest.mark.parametrize("x", [-3.0, -0.4, 0.0, 1.7, 4.9])
def test_cauchy_hardy_residue_oracle(x):
    assert abs(sio.cauchy_apply(fn.cauchy_kernel(+1), x, QUAD) - 1 / (x + 1j)) < 1e-8
    assert abs(sio.cauchy_apply(fn.cauchy_kernel(-1), x, QUAD) + 1 / (x - 1j)) < 1e-8


def test_cauchy_gaussian_moment_at_zero():
    v = sio.cauchy_apply(fn.gaussian_moment(), 0.0)
    assert v == pytest.approx(-1j / math.sqrt(math.pi), abs=1e-9)


def test_projections():
    x = 0.8
    fp, fm = fn.cauchy_kernel(+1), fn.cauchy_kernel(-1)
    assert abs(sio.apply_P(fp, x, QUAD) - 1 / (x + 1j)) < 1e-8
    assert abs(sio.apply_Q(fp, x, QUAD)) < 1e-8
    assert abs(sio.apply_Q(fm, x, QUAD) - 1 / (x - 1j)) < 1e-8
    assert abs(sio.apply_P(fm, x, QUAD)) < 1e-8
    f = fn.lorentzian()
    assert sio.apply_P(f, x) + sio.apply_Q(f, x) == pytest.approx(complex(f(x)), abs=1e-12)


def test_cauchy_indicator_log_formula():
    # S chi_[0,1](x) = (1/(pi i)) log|(1 - x)/x|
    for x in [-2.0, 0.3, 0.75, 4.0]:
        ref = math.log(abs((1 - x) / x)) / (math.pi * 1j)
        assert sio.cauchy_apply(fn.indicator(0, 1), x) == pytest.approx(ref, abs=1e-9)


def test_cauchy_transform_matches_adaptive():
    phi = fn.bump(0.0, 1.0)
    ct = sio.CauchyTransform(phi)
    for x in [-5.0, -0.9, 0.0, 0.37, 1.5, 30.0]:
        assert ct(x) == pytest.approx(sio.cauchy_apply(phi, x), abs=1e-9)


def test_privalov_examples():
    phi = fn.bump(0.0, 1.0)
    r = sio.privalov_decay_check(phi, [10, 100, 1000])
    # far field (1/(pi i)) (int phi) / (t - x), so |Sf| (1+|x|) -> |int phi| / pi
    mass = si.quad(lambda t: phi(t).real, -1, 1)[0]
    assert r.products[-1] == pytest.approx(mass / math.pi, rel=2e-3)
    assert max(r.products) < 2 * mass / math.pi
    assert sio.privalov_decay_check(fn.zero(), [10, 100]).constant == 0.0
    r2 = sio.privalov_decay_check(phi.scaled(2.0), [10, 100, 1000])
    assert r2.constant == pytest.approx(2 * r.constant, rel=1e-9)


def test_discrete_cauchy_hermitian_and_involution_trend():
    S = sio.discrete_cauchy(64)
    assert np.allclose(S, S.conj().T)
    vals = [sio.involution_residual(sio.GridSpec(40, n)) for n in (128, 256, 512)]
    assert vals[0] > vals[1] > vals[2]


def test_identity_symbol_section_is_identity():
    g = sio.GridSpec(10, 101)
    A = sio.assemble_finite_section(1.0, g, "aP+Q").matrix
    assert np.allclose(A, np.eye(101), atol=1e-13)
    assert sio.sigma_min(np.eye(5)) == 1.0


def test_inverse_pair_near_identity():
    a = APPolynomial.from_terms([(1.0, 1.0)])
    g = sio.GridSpec(20, 401)
    plus = sio.assemble_finite_section(a, g, "I+PaQ")
    minus = sio.assemble_finite_section(a, g, "I-PaQ")
    r = np.linalg.norm(plus @ minus - np.eye(g.n)) / math.sqrt(g.n)
    assert r < 0.05


def test_nilpotency_for_constant_one_equals_PQ():
    g = sio.GridSpec(20, 256)
    S = sio.discrete_cauchy(g.n)
    I = np.eye(g.n)
    P, Q = (I + S) / 2, (I - S) / 2
    rep = sio.identity_residuals(1.0, g)
    assert rep.raw["nilpotency"] == pytest.approx(np.linalg.norm(P @ Q @ P @ Q), rel=1e-10)
    assert rep.normalized["nilpotency"] < 0.05


def test_matrix_symbol_residuals_decrease():
    a = APPolynomial.from_terms([(1.0, np.diag([1.0, -1.0]))])
    reps = [sio.identity_residuals(a, sio.GridSpec(20, n)) for n in (128, 256)]
    for k in ("nilpotency", "inverse_pair", "factorization", "involution"):
        assert reps[1].normalized[k] < reps[0].normalized[k], k
        assert reps[1].normalized[k] < 0.1
    assert reps[1].normalized["adjoint"] < 1e-14


def test_scalar_factorization_residual_decreases():
    from saplab.symbols import SAPSymbol
    c = APPolynomial.constant(2.0)
    s = SAPSymbol(c, c, ((fn.lorentzian(1.0),),))
    v = [sio.identity_residuals(s, sio.GridSpec(40, n)).normalized["factorization"]
         for n in (256, 512)]
    assert v[1] < v[0]


def test_constant_symbol_bounded_below():
    vals = [r.sigma_min for r in sio.sigma_min_sweep(2.0, [5, 10, 20], 0.1)]
    assert min(vals) >= 0.5 * vals[0]
    assert sio.inverse_residual(2.0, sio.GridSpec.with_spacing(10, 0.1)) < 0.05


def test_exp_symbol_sigma_min_decreasing():
    a = APPolynomial.from_terms([(1.0, 1.0)])
    vals = [r.sigma_min for r in sio.sigma_min_sweep(a, [5, 10, 20], 0.1)]
    assert vals[0] > vals[1] > vals[2]


def test_s_norm_formula_examples():
    assert sio.s_norm_formula(2.0) == 1.0
    assert sio.s_norm_formula(4.0) == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    assert sio.s_norm_formula(4 / 3) == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    with pytest.raises(ValueError):
        sio.s_norm_formula(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.01, 50.0))
def test_s_norm_duality(q):
    assert abs(sio.s_norm_formula(q) - sio.s_norm_formula(q / (q - 1))) < 1e-12 * max(
        1.0, sio.s_norm_formula(q))


def test_cutoff_examples():
    b = fn.bump(0.0, 1.5)
    assert sio.cutoff_apply(b, 2).is_zero
    f = fn.reciprocal_decay()
    g = sio.cutoff_apply(f, 1)
    xs = np.linspace(-5, 5, 101)
    inside = np.abs(xs) <= 1
    assert np.all(g(xs)[inside] == 0)
    assert np.allclose(g(xs)[~inside], f(xs)[~inside])
    gg = sio.cutoff_apply(g, 1)
    assert np.allclose(gg(xs), g(xs))


def test_export_csv(tmp_path):
    op = sio.assemble_finite_section(2.0, sio.GridSpec(2, 8), "aP+Q")
    path = tmp_path / "m.csv"
    sio.export_csv(op, path)
    rows = [list(map(float, r.split(","))) for r in path.read_text().splitlines()]
    m = np.array(rows)
    assert np.array_equal(m[:, 0::2] + 1j * m[:, 1::2], op.matrix)
