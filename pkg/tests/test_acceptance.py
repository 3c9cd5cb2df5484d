"""The twelve acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line, printed again in the terminal summary.
Heavy preset runs are cached so the determinism check reuses first runs.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import gamma

from saplab import cli, functions as fn, limits, sio
from saplab.exponents import constant, parse_exponent
from saplab.modular import luxemburg_norm, modular
from saplab.quadrature import QuadratureSpec
from saplab.symbols import APPolynomial, kronecker_translations, shift_defect

_FIRST_RUN = {}


def run_preset(name):
    """Result payload of a preset; the first serialised output is cached."""
    res = cli.run_config(cli.load_preset(name))
    _FIRST_RUN.setdefault(name, cli.dumps(res.payload))
    return res.payload["result"]


# --- closed-form L^q norms ------------------------------------------------------

def _lq_cases():
    qs = [1.5, 2.0, 3.0, 4.5, 7.0]
    cases = []
    for q in qs:
        cases.append((f"2*chi[-1,2] q={q}", fn.indicator(-1.0, 2.0, 2.0), q, 2.0 * 3.0 ** (1 / q)))
        cases.append((f"1/(1+|x|) q={q}", fn.reciprocal_decay(), q, (2.0 / (q - 1)) ** (1 / q)))
        lor = math.sqrt(math.pi) * gamma(q - 0.5) / gamma(q)
        cases.append((f"1/(1+x^2) q={q}", fn.lorentzian(), q, lor ** (1 / q)))
        gm = gamma((q + 1) / 2) / q ** ((q + 1) / 2)
        cases.append((f"x exp(-x^2) q={q}", fn.gaussian_moment(), q, gm ** (1 / q)))
    return cases


def test_criterion_01_constant_exponent_norms(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    cases = _lq_cases()
    for label, f, q, exact in cases:
        worst = max(worst, abs(luxemburg_norm(f, constant(q)) - exact) / exact)
    dt = time.perf_counter() - t0
    ok = len(cases) == 20 and worst <= 1e-6 and dt < 10
    acceptance(1, ok, f"20 pairs, max rel err {worst:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_02_unit_modular(acceptance):
    funcs = [fn.BUILTINS[k]() for k in sorted(fn.BUILTINS) if k != "zero"]
    exps = [constant(2.0), constant(1.5), parse_exponent("lerner(3)"),
            parse_exponent("sum(lerner(3), decay(0, 0.5))"),
            parse_exponent("clamp(lerner(3), 2.5, 3.5)")]
    worst = 0.0
    for f in funcs:
        for p in exps:
            n = luxemburg_norm(f, p)
            worst = max(worst, abs(modular(f, p, n) - 1.0))
    ok = worst <= 1e-8
    acceptance(2, ok, f"{len(funcs) * len(exps)} pairs, max |F(norm) - 1| = {worst:.2e}")
    assert ok


def test_criterion_03_hardy_eigenfunctions(acceptance):
    quad = QuadratureSpec(truncation_T=1e3, abs_tol=1e-9)
    xs = np.linspace(-5, 5, 101)
    t0 = time.perf_counter()
    e_plus = max(abs(sio.cauchy_apply(fn.cauchy_kernel(+1), x, quad) - 1 / (x + 1j)) for x in xs)
    e_minus = max(abs(sio.cauchy_apply(fn.cauchy_kernel(-1), x, quad) + 1 / (x - 1j)) for x in xs)
    dt = time.perf_counter() - t0
    ok = e_plus <= 1e-6 and e_minus <= 1e-6 and dt < 30
    acceptance(3, ok, f"max errors {e_plus:.2e}, {e_minus:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_04_discrete_involution(acceptance):
    r = run_preset("identities_scalar")
    ns = [rec["n"] for rec in r["records"]]
    # N = 1, so the sqrt(N n) normalisation is sqrt(n)
    vals = [rec["normalized"]["involution"] for rec in r["records"]]
    direct = sio.involution_residual(sio.GridSpec(40, 512))
    assert direct == pytest.approx(vals[0], rel=1e-12)
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    ok = ns == [512, 1024, 2048] and dec and vals[-1] < 1e-2
    acceptance(4, ok, "||S^2 - I||_F/sqrt(n) = " + ", ".join(f"{v:.4f}" for v in vals)
               + f" (decreasing: {dec}, final < 1e-2: {vals[-1] < 1e-2})")
    assert ok


def test_criterion_05_identity_residuals(acceptance):
    r = run_preset("identities_scalar")
    by_n = {rec["n"]: rec["normalized"] for rec in r["records"]}
    names = ["factorization", "nilpotency", "inverse_pair", "adjoint"]
    parts, ok = [], True
    for k in names:
        v1, v2 = by_n[1024][k], by_n[2048][k]
        # an exactly zero residual stays exactly zero; that counts as non-increasing
        dec = v2 < v1 or v1 == v2 == 0.0
        small = v1 < 1e-2
        ok &= dec and small
        parts.append(f"{k} {v1:.4f}->{v2:.4f}")
    acceptance(5, ok, "n=1024->2048: " + ", ".join(parts) + " (each must be < 1e-2 at n=1024)")
    assert ok


def test_criterion_06_key_lemma_lerner(acceptance):
    t0 = time.perf_counter()
    r = run_preset("key_lemma_lerner")
    dt = time.perf_counter() - t0
    d = [rec["deviation"] for rec in r["records"]]
    ok = len(d) == 10 and d[-1] < 1e-2 and d[-1] < d[0] / 5 and dt < 120
    acceptance(6, ok, f"deviation k=1 {d[0]:.3e}, k=10 {d[-1]:.3e}, {dt:.1f} s")
    assert ok


def test_criterion_07_key_lemma_symbol_pipeline(acceptance):
    r = run_preset("key_lemma_symbol")
    d = [rec["deviation"] for rec in r["records"]]
    kron_ok = r["kronecker"] == [2.0, 4.0, 6.0, 8.0, 10.0] and r["lattice"] == 2.0
    ok = r["verdict"] == "PASS" and d[-1] < 2e-2 and kron_ok
    acceptance(7, ok, f"h_m = 2m: {kron_ok}, q = {r['q']:.6f}, deviations {d[0]:.3e} -> "
               f"{d[-1]:.3e}, verdict {r['verdict']}")
    assert ok


def test_criterion_08_tld_bounds(acceptance):
    rng = np.random.default_rng(20261016)
    names = ["key_lemma_constant", "key_lemma_lerner", "key_lemma_lerner_exact",
             "key_lemma_symbol"]
    inputs = {n: cli.key_lemma_inputs(cli.load_preset(n)) for n in names}
    weights = [0.3, 0.3, 0.2, 0.2]
    violations, checked = 0, 0
    for _ in range(50):
        name = names[rng.choice(4, p=weights)]
        ki = inputs[name]
        seq = ki.w_k or [ki.w] * len(ki.plan.shifts)
        k = int(rng.integers(1, len(ki.plan.shifts) + 1))
        lam = float(rng.uniform(0.3, 3.0))
        C = max(ki.w.envelope_constant, seq[k - 1].envelope_constant)
        R = C / lam * float(rng.uniform(1.0, 20.0))
        delta = lam / 3.0 * float(rng.uniform(1e-3, 1.0))
        t = limits.tld_decomposition(ki.w, seq[k - 1], ki.plan, lam, k, R, delta, ki.quad)
        applicable = t.tail_bound is not None and t.little_bound_k is not None
        checked += applicable
        if not (applicable and t.bounds_hold() and t.split_holds):
            violations += 1
    ok = violations == 0
    acceptance(8, ok, f"50 probes, {checked} with both closed-form bounds applicable, "
               f"{violations} violations")
    assert ok


def test_criterion_09_kronecker(acceptance):
    freqs = [1.0, math.sqrt(2)]
    hs = kronecker_translations(freqs, 0.1, 5, budget=10_000_000)
    defects = [max(abs(complex(math.cos(f * h), math.sin(f * h)) - 1) for f in freqs)
               for h in hs]
    exact = kronecker_translations([math.pi], 1e-12, 5)
    d_exact = [shift_defect(APPolynomial.from_terms([(math.pi, 1.0)]), h) for h in exact]
    ok = (len(hs) == 5 and max(defects) < 0.1 and exact == [2.0, 4.0, 6.0, 8.0, 10.0]
          and max(d_exact) < 1e-12)
    acceptance(9, ok, f"{{1, sqrt2}}: h = {[round(h, 3) for h in hs]}, max defect "
               f"{max(defects):.3f}; {{pi}}: {exact}, max defect {max(d_exact):.1e}")
    assert ok


def test_criterion_10_invertibility_separation(acceptance):
    two = [rec["sigma_min"] for rec in run_preset("finite_section_two")["records"]]
    ex = [rec["sigma_min"] for rec in run_preset("finite_section_exp")["records"]]
    ok2 = min(two) >= 0.5 * two[0]
    okx = all(b < a for a, b in zip(ex, ex[1:]))
    ok = ok2 and okx
    acceptance(10, ok, "a=2: " + ", ".join(f"{v:.4f}" for v in two)
               + "; a=e^{ix}: " + ", ".join(f"{v:.2e}" for v in ex))
    assert ok


def test_criterion_11_s_norm_formula(acceptance):
    qs = np.concatenate([np.linspace(1.05, 1.95, 10), np.linspace(2.5, 30.0, 10)])
    worst = max(abs(sio.s_norm_formula(q) - sio.s_norm_formula(q / (q - 1))) for q in qs)
    ok = sio.s_norm_formula(2.0) == 1.0 and worst < 1e-12
    acceptance(11, ok, f"v(2) = {sio.s_norm_formula(2.0)!r}, max duality gap {worst:.1e} over 20 q")
    assert ok


def test_criterion_12_determinism(acceptance):
    names = cli.preset_names()
    differing = []
    for n in names:
        if n not in _FIRST_RUN:
            run_preset(n)
        second = cli.dumps(cli.run_config(cli.load_preset(n)).payload)
        if second != _FIRST_RUN[n]:
            differing.append(n)
    ok = not differing
    acceptance(12, ok, f"{len(names)} presets rerun, differing: {differing or 'none'}")
    assert ok
