import math

import numpy as np
import pytest
from scipy import integrate as si

from saplab import functions as fn
from saplab import limits as lm
from saplab.exponents import constant, lerner_exponent
from saplab.symbols import APPolynomial, SAPSymbol
from saplab.shifts import Translation

BUMP = fn.bump(0.0, 1.0)
LERNER = lerner_exponent(3)


def test_translate_examples():
    f = fn.reciprocal_decay()
    assert lm.translate(f, 0.0) is f
    g = lm.translate(fn.indicator(0, 1), 3.0)
    assert g.support_hint == (3.0, 4.0)
    xs = np.linspace(-6, 6, 121)
    back = lm.translate(lm.translate(f, 2.5), -2.5)
    assert np.allclose(back(xs), f(xs))
    assert lm.translate(f, 2.0).audit(np.linspace(-100, 100, 4001))


def test_so_uniform_examples():
    assert lm.so_uniform_check(constant(3), [1, 2, 3], 3.0, 10.0).values == [0.0] * 3
    hs = [Translation.from_loglog(k * math.pi) for k in range(1, 5)]
    r = lm.so_uniform_check(LERNER, hs, 3.0, 10.0)
    # p varies by about R / (h log h) over [-R, R]; from k = 2 on that is below rounding
    assert all(b <= a + 1e-15 for a, b in zip(r.values, r.values[1:]))
    assert r.values[-1] < r.values[0] and r.verdict
    r = lm.so_uniform_check(np.arctan, [1, 2, 3, 4], math.pi / 2, 1.0)
    ref = [math.pi / 2 - math.atan(k - 1) for k in range(1, 5)]
    assert r.values == pytest.approx(ref, abs=1e-12)


def test_plan_validation():
    ok = lm.TranslationPlan(LERNER, lm.loglog_shifts([k * math.pi for k in range(1, 6)]), 3.0)
    assert max(ok.exponent_deviations()) < 1e-9
    with pytest.raises(lm.PlanError):
        lm.TranslationPlan(LERNER, lm.loglog_shifts([1, 2, 3]), 3.0)
    with pytest.raises(lm.PlanError):
        lm.TranslationPlan(LERNER, [5.0, 4.0], 3.0)
    with pytest.raises(lm.PlanError):
        lm.TranslationPlan(LERNER, [5.0], 9.0)
    # huge shifts are ordered by their log-log coordinate, not the proxy value
    lm.TranslationPlan(LERNER, lm.loglog_shifts([10 * math.pi, 20 * math.pi]), 3.0)
    neg = lm.loglog_shifts([math.pi, 2 * math.pi], sign=-1)
    lm.TranslationPlan(LERNER, neg, 3.0, direction=-1)


def test_extract_convergent_subsequence_bound():
    rng = np.random.default_rng(0)
    v = rng.uniform(2, 4, 5000)
    idx, q = lm.extract_convergent_subsequence(v, 8, 2.0, 4.0)
    assert idx == sorted(idx) and len(set(idx)) == 8
    for m, i in enumerate(idx, start=1):
        assert abs(v[i] - q) <= 2.0 / 2 ** m + 1e-15
    idx, q = lm.extract_convergent_subsequence(v, 6, 2.0, 4.0, target=3.0)
    assert abs(q - 3.0) <= 2.0 / 2 ** 6
    with pytest.raises(lm.PlanError):
        lm.extract_convergent_subsequence([2.1, 2.2], 5, 2.0, 4.0)


def test_limit_sequence_constant_symbol_reproduces_phi():
    one = APPolynomial.constant(1.0)
    s = SAPSymbol(one, one)
    w, ws = lm.limit_symbol_sequence(s, BUMP, [2.0, 4.0, 6.0])
    xs = np.linspace(-3, 3, 301)
    assert np.allclose(w(xs), BUMP(xs), atol=1e-12)
    for wm in ws:
        assert np.allclose(wm(xs), BUMP(xs), atol=1e-12)


def test_limit_sequence_periodic_symbol_gap_decreases():
    s = SAPSymbol(APPolynomial.constant(1.0), APPolynomial.from_terms([(math.pi, 1.0)]),
                  ((fn.lorentzian(0.5),),))
    w, ws = lm.limit_symbol_sequence(s, BUMP, [2.0 * m for m in range(1, 7)])
    gaps = lm.uniform_gap(w, ws, 5.0)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    xs = np.linspace(-20, 20, 2001)
    for wm in ws:
        assert wm.audit(xs)
    assert w.audit(xs)


def test_key_lemma_constant_exponent_noise_level():
    plan = lm.TranslationPlan(constant(3), [1.0, 2.0, 3.0, 4.0], 3.0)
    r = lm.key_lemma_experiment(plan, BUMP, root_tol=1e-10)
    assert r.verdict
    assert max(r.deviations) <= 2e-10
    # the limit is ||w||_3
    wq = si.quad(lambda x: abs(BUMP(x)) ** 3, -1, 1, epsabs=1e-14)[0] ** (1 / 3)
    assert r.target == pytest.approx(wq, rel=1e-9)


def test_key_lemma_lerner_exact_shifts():
    plan = lm.TranslationPlan(LERNER, lm.loglog_shifts([k * math.pi for k in range(1, 6)]), 3.0)
    r = lm.key_lemma_experiment(plan, BUMP)
    assert r.verdict and max(r.deviations) < 1e-6


def test_key_lemma_lerner_offset_shifts_decrease():
    ts = [k * math.pi + 1.0 / k ** 2 for k in range(1, 11)]
    plan = lm.TranslationPlan(LERNER, lm.loglog_shifts(ts), 3.0)
    r = lm.key_lemma_experiment(plan, BUMP)
    d = r.deviations
    assert r.verdict and d[-1] < d[0] / 5 and d[-1] < 1e-2


def test_key_lemma_sequence_length_mismatch():
    plan = lm.TranslationPlan(constant(3), [1.0, 2.0], 3.0)
    with pytest.raises(lm.PlanError):
        lm.key_lemma_experiment(plan, BUMP, [BUMP])


def test_tld_trivial_case():
    plan = lm.TranslationPlan(constant(3), [1.0, 2.0], 3.0)
    t = lm.tld_decomposition(BUMP, BUMP, plan, 0.8, 1, R=2.0, delta=0.01)
    assert t.T_k == 0.0 and t.T_inf == 0.0
    assert t.D == pytest.approx(0.0, abs=1e-14)
    assert t.split_holds and t.bounds_hold()


def test_tld_bounds_with_envelope():
    plan = lm.TranslationPlan(LERNER, lm.loglog_shifts([math.pi, 2 * math.pi]), 3.0)
    f = fn.reciprocal_decay()
    t = lm.tld_decomposition(f, f, plan, 0.9, 2, R=5.0, delta=0.05)
    assert t.tail_bound is not None and t.little_bound_k is not None
    assert t.T_k <= t.tail_bound and t.T_inf <= t.tail_bound
    assert t.L_k <= 6 * 0.05 * 5.0 / 0.9 and t.L_inf <= 4 * 0.05 * 5.0 / 0.9
    assert t.split_holds


def test_schedule_from_epsilon():
    R, delta = lm.schedule_from_epsilon(0.1, 1.0, 0.5, 2.0)
    # (4/(p-1)) (C/lam)^p R^(1-p) = eps/6 and 10 delta R / lam = eps/6
    assert 4 * (1 / 0.5) ** 2 / R == pytest.approx(0.1 / 6)
    assert 10 * delta * R / 0.5 == pytest.approx(0.1 / 6)


def test_level_set_intervals():
    iv = lm.level_set_intervals(BUMP, 3.0, 0.1)
    assert iv[0][0] == -3.0 and iv[-1][1] == 3.0
    for a, b in iv:
        xs = np.linspace(a, b, 50)[1:-1]
        assert np.all(np.abs(BUMP(xs)) <= 0.1 + 1e-12)


def test_apriori_examples():
    tests = [[fn.bump(0.0, 1.0)], [fn.bump(0.5, 2.0)]]
    r1 = lm.apriori_estimate_experiment(APPolynomial.constant(1.0), [10, 20], 0.1, tests, 2.0)
    assert r1.primal_test == pytest.approx(1.0, abs=1e-6)
    assert r1.adjoint_test == pytest.approx(1.0, abs=1e-6)
    assert all(s["sigma_min"] == pytest.approx(1.0, abs=1e-9) for s in r1.sweep)
    r2 = lm.apriori_estimate_experiment(APPolynomial.constant(2.0), [10, 20], 0.1, tests, 2.0)
    assert r2.primal_test >= 1.0 and r2.adjoint_test >= 1.0
    assert r2.inverse_residual < 0.05
    re = lm.apriori_estimate_experiment(APPolynomial.from_terms([(1.0, 1.0)]), [5, 10, 20], 0.1,
                                        tests, 2.0)
    s = [x["sigma_min"] for x in re.sweep]
    assert s[0] > s[1] > s[2]


def test_segment_exploration_constant_symbol():
    tests = [[fn.bump(0.0, 1.0)]]
    rows = lm.segment_exploration(APPolynomial.constant(1.0), [2.0, 3.0, 4.0], tests)
    assert [r["q"] for r in rows] == [2.0, 3.0, 4.0]
    for r in rows:
        assert r["exploration"]
        assert r["primal_test"] == pytest.approx(1.0, abs=1e-6)
        assert r["adjoint_test"] == pytest.approx(1.0, abs=1e-6)
