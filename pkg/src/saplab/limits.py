"""Translation-limit experiments.

Given ``w`` and a sequence ``w_k`` with ``w_k -> w`` uniformly on compacts and
a common envelope ``C/(1+|x|)``, and shifts ``h_k`` with ``p(h_k) -> q`` for a
slowly oscillating ``p``, the norms of ``V_{h_k} w_k`` in the variable space
should tend to ``||w||_q``. By a change of variables

    ||V_{h_k} w_k||_{p(.)}  is the root of  int |w_k(x)/lam|^p(x + h_k) dx = 1,

which is what :func:`key_lemma_experiment` solves for each ``k``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .exponents import VariableExponent, constant
from .functions import FunctionHandle
from .modular import (ModularCurve, envelope_tail_bound, implicit_sequence_solve, modular,
                      vector_norm)
from .quadrature import QuadratureSpec, geometric_breaks, integrate, pieces_between, tail_pieces, tail_power
from .shifts import Translation
from .sio import CauchyTransform, GridSpec, assemble_finite_section, inverse_residual, sigma_min
from .symbols import APPolynomial, SAPSymbol, evaluate_ap

log = logging.getLogger(__name__)

ShiftLike = Union[float, Translation]


class PlanError(ValueError):
    """A translation plan is inconsistent (e.g. ``p(h_k)`` does not approach ``q``)."""


def _as_translation(h: ShiftLike) -> Translation:
    return h if isinstance(h, Translation) else Translation.of(h)


def _order_key(h: Translation, direction: int = 1) -> Tuple[int, float]:
    # huge shifts are ordered by log log |h|, beyond every directly stored value
    if h.is_huge:
        return (direction * h.sign, direction * h.sign * h.loglog)
    return (0, direction * h.value)


# --- translations ------------------------------------------------------------

def translate(f: FunctionHandle, h: float) -> FunctionHandle:
    """``V_h f = f(. - h)`` with shifted metadata.

    ``1 + |x| <= (1 + |h|)(1 + |x - h|)``, so the envelope constant grows to
    ``C (1 + |h|)``.
    """
    h = float(h)
    if h == 0.0:
        return f
    ev = f.evaluator
    env = None if f.envelope_constant is None else f.envelope_constant * (1.0 + abs(h))
    supp = None if f.support_hint is None else (f.support_hint[0] + h, f.support_hint[1] + h)
    return FunctionHandle(lambda x: ev(np.asarray(x) - h), env, supp, f"V_{h:g}{f.label}",
                          tuple(c + h for c in f.breakpoints))


@dataclass
class UniformSeries:
    values: List[float]
    verdict: bool
    threshold: float


def so_uniform_check(f, shifts: Sequence[ShiftLike], g: float, R: float,
                     sampling: int = 4001, threshold: float = 1e-2) -> UniformSeries:
    """``sup_{[-R, R]} |f(x + h_k) - g|`` per ``k`` on a uniform sample.

    ``f`` may be a :class:`VariableExponent` (evaluated in log-log coordinates
    for huge shifts) or any vectorised callable.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    xs = np.linspace(-R, R, sampling)
    vals = []
    for h in shifts:
        tr = _as_translation(h)
        if isinstance(f, VariableExponent):
            y = f.translate(tr)(xs)
        else:
            if tr.is_huge:
                raise ValueError("huge shifts need a VariableExponent")
            y = np.asarray(f(xs + tr.value))
        vals.append(float(np.max(np.abs(y - g))))
    tail_ok = len(vals) < 2 or vals[-1] <= vals[0]
    return UniformSeries(vals, bool(tail_ok and vals[-1] < threshold), threshold)


# --- translation plans -------------------------------------------------------

@dataclass
class TranslationPlan:
    """Shifts ``h_k`` along which ``p(h_k) -> q``.

    Validation requires strictly monotone shifts, a final ``|p(h_k) - q|``
    below ``tol`` and a last deviation no larger than the first.
    """

    p: VariableExponent
    shifts: List[Translation]
    q: float
    direction: int = 1
    tol: float = 1e-2

    def __post_init__(self):
        self.shifts = [_as_translation(h) for h in self.shifts]
        if self.direction not in (1, -1):
            raise PlanError("direction must be +1 or -1")
        if not self.shifts:
            raise PlanError("a plan needs at least one shift")
        keys = [_order_key(h, self.direction) for h in self.shifts]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise PlanError("shifts must be strictly monotone towards the plan direction")
        if not self.p.p_minus <= self.q <= self.p.p_plus:
            raise PlanError(f"target q={self.q} outside the exponent bounds")
        dev = self.exponent_deviations()
        if dev[-1] > self.tol:
            raise PlanError(f"p(h_k) does not approach q={self.q}: final |p(h_k) - q| = {dev[-1]:.3g}")
        if len(dev) > 1 and dev[-1] > dev[0] + 1e-12:
            raise PlanError("|p(h_k) - q| increases over the plan")

    def exponent_values(self) -> List[float]:
        return [self.p.at(h) for h in self.shifts]

    def exponent_deviations(self) -> List[float]:
        return [abs(v - self.q) for v in self.exponent_values()]


def loglog_shifts(ts: Sequence[float], sign: int = 1, lattice: Optional[float] = None
                  ) -> List[Translation]:
    return [Translation.from_loglog(float(t), sign, lattice) for t in ts]


def lattice_candidates(p: VariableExponent, t_range: Tuple[float, float], count: int,
                       lattice: Optional[float] = None, sign: int = 1
                       ) -> Tuple[List[Translation], np.ndarray]:
    """Candidate shifts ``+-exp(exp(t))`` on an even ``t`` grid, snapped to a
    lattice of common periods, and their exponent values."""
    ts = np.linspace(t_range[0], t_range[1], count)
    hs = loglog_shifts(ts, sign, lattice)
    return hs, np.array([p.at(h) for h in hs])


def extract_convergent_subsequence(values: Sequence[float], count: int, lo: float, hi: float,
                                   target: Optional[float] = None) -> Tuple[List[int], float]:
    """Indices ``i_1 < i_2 < ...`` with ``values[i_m]`` in nested halvings of ``[lo, hi]``.

    At each level the half holding more of the remaining candidates is kept
    (or the half containing ``target``). Returns the indices and the centre
    of the final interval, the limit estimate ``q``; ``|values[i_m] - q|`` is
    at most ``(hi - lo) / 2^m``.
    """
    v = np.asarray(values, dtype=float)
    a, b = float(lo), float(hi)
    idx: List[int] = []
    start = 0
    for _ in range(count):
        mid = 0.5 * (a + b)
        rest = v[start:]
        left = np.flatnonzero((rest >= a) & (rest <= mid))
        right = np.flatnonzero((rest > mid) & (rest <= b))
        if target is not None:
            pick_left = target <= mid
        else:
            pick_left = left.size >= right.size
        chosen = left if pick_left else right
        if chosen.size == 0:
            raise PlanError(f"candidates exhausted after {len(idx)} terms")
        a, b = (a, mid) if pick_left else (mid, b)
        i = start + int(chosen[0])
        idx.append(i)
        start = i + 1
    return idx, 0.5 * (a + b)


# --- limit symbol sequences --------------------------------------------------

def _entry(values: np.ndarray, alpha: int, beta: int, conj: bool, transpose: bool):
    e = values[:, beta, alpha] if transpose else values[:, alpha, beta]
    return np.conj(e) if conj else e


def limit_symbol_sequence(s: SAPSymbol, phi: FunctionHandle, shifts: Sequence[ShiftLike],
                          entry: Tuple[int, int] = (0, 0), direction: int = 1,
                          conjugate: bool = False) -> Tuple[FunctionHandle, List[FunctionHandle]]:
    """``w = (b P + Q) phi`` and ``w_m(x) = a_ab(x + h_m) (P phi)(x) + (Q phi)(x)``.

    ``b`` is the entry of ``a_r`` (``direction=+1``) or ``a_l`` (``-1``). The
    conjugated variant uses ``conj(a_ab)`` at ``+inf`` and ``conj(a_ba)`` at
    ``-inf``. Envelopes are ``(sup|entry| + 1) C~`` with ``C~`` the common
    envelope of ``P phi`` and ``Q phi``.
    """
    if not shifts:
        raise ValueError("limit_symbol_sequence needs a translation sequence")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    al, be = entry
    if not (0 <= al < s.size and 0 <= be < s.size):
        raise ValueError(f"entry {entry} out of range for size {s.size}")
    transpose = conjugate and direction < 0
    rep = s.a_r if direction > 0 else s.a_l
    ct = CauchyTransform(phi)
    hd = ct.handles()
    Pphi, Qphi = hd["P"], hd["Q"]
    c_pq = Pphi.envelope_constant

    def rep_entry(x):
        return _entry(evaluate_ap(rep, np.atleast_1d(x)), al, be, conjugate, transpose)

    w = FunctionHandle(lambda x: rep_entry(x) * Pphi(x) + Qphi(x),
                       (rep.sup_bound() + 1.0) * c_pq, None, f"w[{phi.label}]")
    env_m = (s.sup_bound() + 1.0) * c_pq
    ws = []
    for h in shifts:
        tr = _as_translation(h)
        ev = s.shifted(tr)

        def wm(x, ev=ev):
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            out = _entry(ev(xs), al, be, conjugate, transpose) * Pphi(xs) + Qphi(xs)
            return out if np.ndim(x) else out[0]

        ws.append(FunctionHandle(wm, env_m, None, f"w_m[{phi.label}; {tr.describe()}]"))
    return w, ws


def uniform_gap(w: FunctionHandle, ws: Sequence[FunctionHandle], R: float,
                sampling: int = 4001) -> List[float]:
    """``sup_{[-R, R]} |w_m - w|`` per ``m`` on a uniform sample."""
    xs = np.linspace(-R, R, sampling)
    base = w(xs)
    return [float(np.max(np.abs(wm(xs) - base))) for wm in ws]


# --- T / L / D decomposition --------------------------------------------------

@dataclass
class TLDReport:
    lam: float
    k: int
    R: float
    delta: float
    T_k: float
    T_inf: float
    L_k: float
    L_inf: float
    D: float
    F_k: float
    F_inf: float
    error: float
    tail_bound: Optional[float]
    little_bound_k: Optional[float]
    little_bound_inf: Optional[float]
    sup_gap: float

    @property
    def total(self) -> float:
        return self.T_k + self.T_inf + self.L_k + self.L_inf + self.D

    @property
    def split_holds(self) -> bool:
        return self.total + self.error >= abs(self.F_k - self.F_inf)

    def bounds_hold(self) -> bool:
        ok = True
        if self.tail_bound is not None:
            ok &= self.T_k <= self.tail_bound + self.error and self.T_inf <= self.tail_bound + self.error
        if self.little_bound_k is not None:
            ok &= self.L_k <= self.little_bound_k + self.error
            ok &= self.L_inf <= self.little_bound_inf + self.error
        return bool(ok)


def schedule_from_epsilon(eps: float, C: float, lam: float, p_minus: float
                          ) -> Tuple[float, float]:
    """``(R, delta)`` making the tail terms below ``eps/3`` and the little terms
    below ``eps/3``:

    ``(4/(p_- - 1)) (C/lam)^p_- R^(1 - p_-) = eps/6`` and ``10 delta R / lam = eps/6``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = 1.0 / (p_minus - 1.0)
    R = (24.0 * a) ** a * (C / lam) ** (p_minus * a) * (1.0 / eps) ** a
    return R, eps * lam / (60.0 * R)


def level_set_intervals(w: FunctionHandle, R: float, level: float, sampling: int = 20001
                        ) -> List[Tuple[float, float]]:
    """Maximal intervals of ``[-R, R]`` on which ``|w| <= level``."""
    xs = np.linspace(-R, R, sampling)
    g = np.abs(w(xs)) - level

    def fn(x):
        return float(abs(w(np.array([x]))[0]) - level)

    inside = g <= 0
    out = []
    i = 0
    n = len(xs)
    while i < n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        a = -R if i == 0 else brentq(fn, xs[i - 1], xs[i], xtol=1e-14)
        b = R if j == n - 1 else brentq(fn, xs[j], xs[j + 1], xtol=1e-14)
        if b > a:
            out.append((a, b))
        i = j + 1
    return out


def _complement(intervals, R):
    out, cur = [], -R
    for a, b in intervals:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if cur < R:
        out.append((cur, R))
    return out


def tld_decomposition(w: FunctionHandle, w_k: FunctionHandle, plan: TranslationPlan,
                      lam: float, k: int, R: float, delta: float,
                      quad: QuadratureSpec = QuadratureSpec(), sampling: int = 4001) -> TLDReport:
    """Tail, little and difference terms bounding ``|F(lam, k) - F(lam, inf)|``.

    ``k`` is 1-based into ``plan.shifts``. The closed-form bounds are
    reported only where they apply: the tail bound needs ``R >= C/lam``, the
    little bounds need ``3 delta / lam <= 1`` and ``sup_{[-R,R]} |w_k - w| < delta``.
    """
    if not (R > 0 and delta > 0 and lam > 0):
        raise ValueError("lam, R and delta must be positive")
    if not 1 <= k <= len(plan.shifts):
        raise ValueError(f"k={k} outside the plan (1..{len(plan.shifts)})")
    h = plan.shifts[k - 1]
    pk = plan.p.translate(h)
    q = plan.q

    def dens_k(x):
        a = np.abs(w_k(x)) / lam
        return np.where(a > 0, np.exp(pk(x) * np.log(np.where(a > 0, a, 1.0))), 0.0)

    def dens_inf(x):
        return (np.abs(w(x)) / lam) ** q

    def both(x):
        return np.stack([dens_k(x), dens_inf(x)])

    def integ(pieces):
        if not pieces:
            return np.zeros(2), 0.0
        r = integrate(both, pieces, quad.abs_tol, quad.max_refinements, quad.order)
        return np.asarray(r.value, dtype=float), r.error

    T = max(quad.truncation_T, 2.0 * R)
    breaks = [b for b in geometric_breaks(T) if abs(b) > R]
    tails = (pieces_between(-T, -R, breaks) + pieces_between(R, T, breaks)
             + tail_pieces(T, tail_power(plan.p.p_minus)))
    little = level_set_intervals(w, R, 2.0 * delta)
    rest = _complement(little, R)
    tv, te = integ(tails)
    lv, le = integ([pc for a, b in little for pc in pieces_between(a, b)])
    rv, re_ = integ([pc for a, b in rest for pc in pieces_between(a, b)])
    F_k = modular(w_k, pk, lam, quad, full_output=True)
    F_inf = modular(w, constant(q), lam, quad, full_output=True)

    C = max(w.envelope_constant or 0.0, w_k.envelope_constant or 0.0)
    tail_bound = envelope_tail_bound(C, lam, plan.p.p_minus, R) if C and R >= C / lam else None
    xs = np.linspace(-R, R, sampling)
    gap = float(np.max(np.abs(w_k(xs) - w(xs))))
    lk = li = None
    if 3.0 * delta / lam <= 1.0 and gap < delta:
        lk, li = 6.0 * delta * R / lam, 4.0 * delta * R / lam
    err = te + le + re_ + F_k.error + F_inf.error
    return TLDReport(lam, k, R, delta, float(tv[0]), float(tv[1]), float(lv[0]), float(lv[1]),
                     float(abs(rv[0] - rv[1])), F_k.value, F_inf.value, err,
                     tail_bound, lk, li, gap)


# --- key lemma -----------------------------------------------------------------

@dataclass
class KeyLemmaRecord:
    k: int
    h: float
    loglog_h: Optional[float]
    p_hk: float
    measured: float
    target: float
    deviation: float


@dataclass
class KeyLemmaReport:
    records: List[KeyLemmaRecord]
    target: float
    q: float
    verdict: bool
    tol: float
    tld: List[dict] = field(default_factory=list)

    @property
    def deviations(self) -> List[float]:
        return [r.deviation for r in self.records]

    def to_dict(self) -> dict:
        return {"q": self.q, "target": self.target, "tol": self.tol, "verdict": self.verdict,
                "records": [asdict(r) for r in self.records], "tld": self.tld}


WSeq = Union[None, Sequence[FunctionHandle], Callable[[int], FunctionHandle]]


def key_lemma_experiment(plan: TranslationPlan, w: FunctionHandle, w_k: WSeq = None,
                         quad: QuadratureSpec = QuadratureSpec(), root_tol: float = 1e-10,
                         tol: float = 1e-2, tld_eps: Optional[float] = None) -> KeyLemmaReport:
    """Norms ``||V_{h_k} w_k||_{p(.)}`` against ``||w||_q``.

    ``w_k`` is ``None`` for the constant sequence, a list aligned with the
    plan, or a callable of the 1-based index. The verdict requires the final
    deviation below ``tol`` and not above the first one (deviations all at
    root-finding noise level count as decreasing).
    """
    n = len(plan.shifts)
    if w_k is None:
        seq = [w] * n
    elif callable(w_k):
        seq = [w_k(k) for k in range(1, n + 1)]
    else:
        seq = list(w_k)
    if len(seq) != n:
        raise PlanError(f"{len(seq)} functions for {n} shifts")

    curves = [ModularCurve.of(f, plan.p.translate(h), quad, label=f"F(., {k})")
              for k, (f, h) in enumerate(zip(seq, plan.shifts), start=1)]
    limit = ModularCurve.of(w, constant(plan.q), quad, label="F(., inf)")
    sol = implicit_sequence_solve(curves, limit, root_tol)
    p_vals = plan.exponent_values()
    recs = [KeyLemmaRecord(k, h.value, h.loglog, pv, lam, sol.limit, dev)
            for k, (h, pv, lam, dev) in enumerate(zip(plan.shifts, p_vals, sol.lambdas,
                                                      sol.deviations), start=1)]
    devs = sol.deviations
    noise = 4.0 * root_tol * max(1.0, sol.limit)
    trend = devs[-1] < devs[0] or max(devs) <= noise
    report = KeyLemmaReport(recs, sol.limit, plan.q, bool(devs[-1] < tol and trend), tol)
    if tld_eps is not None:
        C = max(w.envelope_constant or 0.0, *(f.envelope_constant or 0.0 for f in seq))
        R, delta = schedule_from_epsilon(tld_eps, C, sol.limit, plan.p.p_minus)
        for k, f in enumerate(seq, start=1):
            t = tld_decomposition(w, f, plan, sol.limit, k, R, delta, quad)
            report.tld.append({"k": k, "R": R, "delta": delta, "T_k": t.T_k, "T_inf": t.T_inf,
                               "L_k": t.L_k, "L_inf": t.L_inf, "D": t.D,
                               "abs_dF": abs(t.F_k - t.F_inf), "split_holds": t.split_holds})
    return report


# --- a-priori estimates ---------------------------------------------------------

@dataclass
class AprioriReport:
    q: float
    primal_test: float
    adjoint_test: float
    sweep: List[dict]
    inverse_residual: Optional[float] = None


def _apply_matrix_symbol(a: APPolynomial, xs: np.ndarray, vec: np.ndarray, adjoint: bool):
    vals = evaluate_ap(a, xs)
    if adjoint:
        vals = np.conj(np.swapaxes(vals, 1, 2))
    return np.einsum("nab,bn->an", vals, vec)


def _test_ratio(a: APPolynomial, phis: Sequence[Sequence[FunctionHandle]], q: float,
                quad: QuadratureSpec, root_tol: float, adjoint: bool) -> float:
    """``min ||A phi|| / ||phi||`` with ``A = aP + Q`` or ``P a* I + Q``."""
    expo = constant(q)
    ratios = []
    for vec in phis:
        N = len(vec)
        if N != a.size:
            raise ValueError(f"test vector length {N} != symbol size {a.size}")
        Q = [CauchyTransform(f).handles()["Q"] for f in vec]
        if adjoint:
            # P(a* phi): a* phi is compactly supported, transform it directly
            supp = (min(f.support_hint[0] for f in vec), max(f.support_hint[1] for f in vec))
            comps = []
            for al in range(N):
                def g(x, al=al):
                    xs = np.atleast_1d(x)
                    v = np.stack([f(xs) for f in vec])
                    return _apply_matrix_symbol(a, xs, v, True)[al]
                gh = FunctionHandle(g, None, supp, f"(a*phi)_{al}")
                comps.append(CauchyTransform(gh).handles()["P"])
            outs = [FunctionHandle(lambda x, c=c, qq=qq: c(x) + qq(x), c.envelope_constant +
                                   qq.envelope_constant, None, "Bphi") for c, qq in zip(comps, Q)]
        else:
            P = [CauchyTransform(f).handles()["P"] for f in vec]
            env = a.sup_bound() * max(pp.envelope_constant for pp in P) + max(
                qq.envelope_constant for qq in Q)
            outs = []
            for al in range(N):
                def g(x, al=al):
                    xs = np.atleast_1d(x)
                    v = np.stack([pp(xs) for pp in P])
                    return _apply_matrix_symbol(a, xs, v, False)[al] + Q[al](xs)
                outs.append(FunctionHandle(g, env, None, "Aphi"))
        num = vector_norm(outs, expo, quad, root_tol)
        den = vector_norm(list(vec), expo, quad, root_tol)
        ratios.append(num / den)
    return float(min(ratios))


def apriori_estimate_experiment(a_r: APPolynomial, half_widths: Sequence[float],
                                spacing: float, tests: Sequence[Sequence[FunctionHandle]],
                                q: float, quad: QuadratureSpec = QuadratureSpec(),
                                root_tol: float = 1e-10) -> AprioriReport:
    """Lower constants for ``a_r P + Q`` on ``L^q`` and its adjoint ``P a_r* I + Q``
    on ``L^q'``: over a test set, and as ``sigma_min`` of finite sections.

    The sections are ``l2`` surrogates; positive, ``T``-stable constants on
    both sides are the numerical analogue of invertibility.
    """
    if not tests:
        raise ValueError("empty test set")
    qd = q / (q - 1.0)
    primal = _test_ratio(a_r, tests, q, quad, root_tol, adjoint=False)
    adj = _test_ratio(a_r, tests, qd, quad, root_tol, adjoint=True)
    sweep = []
    for T in half_widths:
        g = GridSpec.with_spacing(T, spacing)
        sweep.append({"T": float(T), "n": g.n,
                      "sigma_min": sigma_min(assemble_finite_section(a_r, g, "aP+Q")),
                      "sigma_min_adjoint": sigma_min(assemble_finite_section(a_r, g, "Pa*I+Q"))})
    inv = None
    if a_r.size == 1 and all(f == 0.0 for f in a_r.frequencies):
        c = complex(a_r.coefficients[0][0, 0])
        g = GridSpec.with_spacing(half_widths[0], spacing)
        inv = inverse_residual(c, g)
    return AprioriReport(q, primal, adj, sweep, inv)



def segment_exploration(a_r: APPolynomial, q_values: Sequence[float],
                        tests: Sequence[Sequence[FunctionHandle]],
                        quad: QuadratureSpec = QuadratureSpec(), root_tol: float = 1e-10
                        ) -> List[dict]:
    """Test-set constants of ``a_r P + Q`` and its adjoint for each ``q`` in a segment.

    Exploration only: positive constants at sampled ``q`` do not establish
    invertibility on the whole segment.
    """
    out = []
    for q in q_values:
        if not q > 1:
            raise ValueError(f"q must exceed 1, got {q}")
        qd = q / (q - 1.0)
        out.append({"q": float(q),
                    "primal_test": _test_ratio(a_r, tests, q, quad, root_tol, adjoint=False),
                    "adjoint_test": _test_ratio(a_r, tests, qd, quad, root_tol, adjoint=True),
                    "exploration": True})
    return out
