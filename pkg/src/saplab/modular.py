"""Modulars ``F(lambda) = int |f/lambda|^p(x) dx`` and Luxemburg norms.

The norm is the root of ``F(lambda) = 1``. ``F`` is strictly decreasing for
nonzero ``f``, so a bracket always exists; inside it we take Newton steps on
``G(mu) = log F(exp(mu))``, which is exactly linear for constant exponents,
and fall back to bisection whenever a step leaves the bracket or stalls.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exponents import VariableExponent
from .functions import FunctionHandle
from .quadrature import (QuadratureSpec, geometric_breaks, integrate, pieces_between,
                         tail_pieces, tail_power)


class RootFindingError(RuntimeError):
    """Bracketing or root refinement failed (pathological input)."""


class NonMonotoneError(ValueError):
    """A curve expected to be strictly decreasing was not on the probe grid."""


@dataclass
class ModularValue:
    value: float
    derivative: float
    error: float
    tail_bound: Optional[float] = None
    converged: bool = True


def _check_inputs(f: FunctionHandle, lam: float):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not f.is_integrable:
        raise ValueError(f"{f.label}: need an envelope constant or a support hint to "
                         "integrate over the whole line")


def _pieces(f: FunctionHandle, p: VariableExponent, quad: QuadratureSpec):
    """Pieces of the direct window and of the mapped tails."""
    if f.support_hint is not None:
        a, b = f.support_hint
        return pieces_between(a, b, f.breakpoints), []
    T = quad.truncation_T
    breaks = list(f.breakpoints) + geometric_breaks(T)
    return pieces_between(-T, T, breaks), tail_pieces(T, tail_power(p.p_minus))


def envelope_tail_bound(C: float, lam: float, p_minus: float, R: float) -> float:
    """``(2/(p_- - 1)) (C/lam)^p_- R^(1 - p_-)``, bounding the modular outside ``[-R, R]``.

    Valid when ``R >= C/lam`` so that ``|f/lam| <= 1`` there.
    """
    return 2.0 / (p_minus - 1.0) * (C / lam) ** p_minus * R ** (1.0 - p_minus)


def modular(f: FunctionHandle, p: VariableExponent, lam: float,
            quad: QuadratureSpec = QuadratureSpec(), full_output: bool = False):
    """``int |f(x)/lam|^p(x) dx`` (and, with ``full_output``, its derivative).

    Compactly supported ``f`` is integrated over its support; otherwise over
    ``[-T, T]`` directly and the tails after a power substitution. The
    envelope tail bound is reported alongside when it applies.
    """
    _check_inputs(f, lam)
    if f.is_zero:
        res = ModularValue(0.0, 0.0, 0.0, 0.0)
        return res if full_output else 0.0

    def integrand(x):
        a = np.abs(f(x)) / lam
        q = p(x)
        out = np.zeros((2,) + x.shape)
        pos = a > 0
        with np.errstate(over="ignore"):
            v = np.exp(q[pos] * np.log(a[pos]))
        out[0, pos] = v
        out[1, pos] = -q[pos] / lam * v
        return out

    window, tails = _pieces(f, p, quad)
    r = integrate(integrand, window, quad.abs_tol, quad.max_refinements, quad.order)
    if tails:
        rt = integrate(integrand, tails, quad.abs_tol, quad.tail_refinements, quad.order)
        r.value = r.value + rt.value
        r.error += rt.error
        r.converged = r.converged and rt.converged
    tail = None
    if f.support_hint is None and f.envelope_constant is not None:
        C, T = f.envelope_constant, quad.truncation_T
        if T >= C / lam:
            tail = envelope_tail_bound(C, lam, p.p_minus, T)
    res = ModularValue(float(r.value[0]), float(r.value[1]), r.error, tail, r.converged)
    return res if full_output else res.value


def modular_derivative(f: FunctionHandle, p: VariableExponent, lam: float,
                       quad: QuadratureSpec = QuadratureSpec()) -> float:
    """``-int (p(x)/lam) |f(x)/lam|^p(x) dx``; never positive."""
    return modular(f, p, lam, quad, full_output=True).derivative


# --- curves and the root finder ---------------------------------------------

CurveFn = Callable[[float], float]


class ModularCurve:
    """``lam -> F(lam)`` with an optional derivative and a thread-safe memo."""

    def __init__(self, fn: CurveFn, derivative: Optional[CurveFn] = None, label: str = "F",
                 joint: Optional[Callable[[float], Tuple[float, float]]] = None):
        self._fn = fn
        self._derivative = derivative
        self._joint = joint
        self.label = label
        self._cache: Dict[float, Tuple[float, Optional[float]]] = {}
        self._lock = threading.Lock()

    @classmethod
    def of(cls, f: FunctionHandle, p: VariableExponent,
           quad: QuadratureSpec = QuadratureSpec(), label: Optional[str] = None) -> "ModularCurve":
        def joint(lam):
            r = modular(f, p, lam, quad, full_output=True)
            return r.value, r.derivative
        return cls(lambda lam: joint(lam)[0], lambda lam: joint(lam)[1],
                   label or f"F[{f.label}; {p.label}]", joint)

    @property
    def has_derivative(self) -> bool:
        return self._derivative is not None or self._joint is not None

    def evaluate(self, lam: float) -> Tuple[float, Optional[float]]:
        with self._lock:
            hit = self._cache.get(lam)
        if hit is not None:
            return hit
        if self._joint is not None:
            val = tuple(float(v) for v in self._joint(lam))
        else:
            d = None if self._derivative is None else float(self._derivative(lam))
            val = (float(self._fn(lam)), d)
        with self._lock:
            self._cache[lam] = val
        return val

    def __call__(self, lam: float) -> float:
        return self.evaluate(lam)[0]


@dataclass
class RootResult:
    root: float
    value: float
    derivative: Optional[float]
    iterations: int
    evaluations: int


def _bracket(curve: ModularCurve, lo: float, hi: float, budget: int = 200):
    n = 0
    f_lo = curve(lo)
    while not f_lo > 1.0:
        if f_lo == 1.0:
            return lo, lo, n
        lo /= 4.0
        f_lo = curve(lo)
        n += 1
        if n > budget or lo == 0.0:
            raise RootFindingError(f"{curve.label}: no lower bracket (F stays <= 1 down to {lo})")
    f_hi = curve(hi)
    while not f_hi < 1.0:
        if f_hi == 1.0:
            return hi, hi, n
        hi *= 4.0
        f_hi = curve(hi)
        n += 1
        if n > budget or not math.isfinite(hi):
            raise RootFindingError(f"{curve.label}: no upper bracket (F stays >= 1 up to {hi})")
    return lo, hi, n


def solve_unit_level(curve: ModularCurve, lo: float, hi: float, root_tol: float = 1e-10,
                     start: Optional[float] = None, max_iter: int = 200) -> RootResult:
    """Root of ``F(lam) = 1`` for decreasing ``F``, starting from ``[lo, hi]``.

    The bracket is expanded geometrically until ``F(lo) > 1 > F(hi)``.
    """
    if not root_tol > 0:
        raise ValueError("root_tol must be positive")
    if not 0 < lo <= hi:
        raise ValueError(f"bad initial bracket [{lo}, {hi}]")
    lo, hi, evals = _bracket(curve, lo, hi)
    if lo == hi:
        v, d = curve.evaluate(lo)
        return RootResult(lo, v, d, 0, evals)
    a, b = math.log(lo), math.log(hi)
    ga, gb = math.log(curve(lo)), math.log(curve(hi))
    mu = math.log(start) if start is not None and lo < start < hi else None
    width = b - a
    for it in range(1, max_iter + 1):
        if mu is None or not a < mu < b:
            # false position in log-log coordinates, then bisection as backstop
            mu = a + ga * (b - a) / (ga - gb) if math.isfinite(ga - gb) else 0.5 * (a + b)
            if not a < mu < b:
                mu = 0.5 * (a + b)
        lam = math.exp(mu)
        F, dF = curve.evaluate(lam)
        evals += 1
        if abs(F - 1.0) <= root_tol:
            return RootResult(lam, F, dF, it, evals)
        g = math.log(F) if F > 0 else -math.inf
        if g > 0:
            a, ga = mu, g
        else:
            b, gb = mu, g
        if b - a <= 4e-16 * max(1.0, abs(mu)):
            raise RootFindingError(
                f"{curve.label}: bracket collapsed at lambda={lam:.17g} with "
                f"|F-1|={abs(F - 1.0):.3g} > {root_tol:.3g} (quadrature noise?)")
        nxt = None
        if dF is not None and F > 0 and dF < 0 and math.isfinite(g):
            nxt = mu - g / (lam * dF / F)
        elif math.isfinite(g):
            nxt = a + ga * (b - a) / (ga - gb) if math.isfinite(ga - gb) else None
        if it % 3 == 0:
            if b - a > 0.5 * width:
                nxt = 0.5 * (a + b)
            width = b - a
        mu = nxt
    raise RootFindingError(f"{curve.label}: no convergence in {max_iter} iterations")


# --- norms ---------------------------------------------------------------

@dataclass
class NormResult:
    norm: float
    modular_at_norm: float
    error_bound: float
    iterations: int = 0
    quadrature_error: float = 0.0


def _initial_bracket(m1: float, p: VariableExponent) -> Tuple[float, float]:
    """Norm bounds from ``m1 = F(1)``: between ``m1^(1/p+)`` and ``m1^(1/p-)``."""
    lo = m1 ** (1.0 / p.p_plus)
    hi = m1 ** (1.0 / p.p_minus)
    lo, hi = min(lo, hi), max(lo, hi)
    return lo / 2.0, hi * 2.0


def luxemburg_norm_report(f: FunctionHandle, p: VariableExponent,
                          quad: QuadratureSpec = QuadratureSpec(),
                          root_tol: float = 1e-10) -> NormResult:
    if not root_tol > 0:
        raise ValueError("root_tol must be positive")
    curve = ModularCurve.of(f, p, quad)
    if f.is_zero:
        return NormResult(0.0, 0.0, 0.0)
    _check_inputs(f, 1.0)
    m1 = curve(1.0)
    if m1 == 0.0:
        return NormResult(0.0, 0.0, 0.0)
    if not math.isfinite(m1):
        lo, hi = 1.0, 4.0
    else:
        lo, hi = _initial_bracket(m1, p)
    r = solve_unit_level(curve, lo, hi, root_tol)
    full = modular(f, p, r.root, quad, full_output=True)
    slope = abs(full.derivative) if full.derivative else math.inf
    err = (abs(full.value - 1.0) + full.error) / slope
    return NormResult(r.root, full.value, err, r.iterations, full.error)


def luxemburg_norm(f: FunctionHandle, p: VariableExponent,
                   quad: QuadratureSpec = QuadratureSpec(), root_tol: float = 1e-10) -> float:
    """``inf {lam > 0 : F(lam) <= 1}``; zero for the zero function."""
    return luxemburg_norm_report(f, p, quad, root_tol).norm


def vector_norm(fs: Sequence[FunctionHandle], p: VariableExponent,
                quad: QuadratureSpec = QuadratureSpec(), root_tol: float = 1e-10) -> float:
    """``(sum_alpha ||f_alpha||^2)^(1/2)`` for a vector of functions."""
    if not fs:
        raise ValueError("vector_norm needs at least one component")
    return float(math.hypot(*[luxemburg_norm(f, p, quad, root_tol) for f in fs]))


# --- implicit sequences ---------------------------------------------------

@dataclass
class ImplicitSequenceResult:
    lambdas: List[float]
    limit: float
    deviations: List[float] = field(default_factory=list)


_PROBE = np.array([0.8, 1.0, 1.25])


def _check_monotone(curve: ModularCurve, center: float, probe: np.ndarray):
    vals = [curve(float(center * s)) for s in probe]
    if any(not b < a for a, b in zip(vals, vals[1:])):
        raise NonMonotoneError(
            f"{curve.label} is not strictly decreasing near lambda={center:.6g}: "
            + ", ".join(f"{v:.6g}" for v in vals))


def implicit_sequence_solve(curves: Sequence[ModularCurve], limit_curve: ModularCurve,
                            root_tol: float = 1e-10, initial: float = 1.0,
                            probe: Sequence[float] = tuple(_PROBE)) -> ImplicitSequenceResult:
    """Roots ``F(lam(k), k) = 1`` for each curve plus the limit ``F(lam_inf, inf) = 1``.

    Each solve is warm-started from the previous root; every curve is
    checked for strict decrease on ``probe`` times its root.
    """
    pr = np.asarray(probe, dtype=float)
    lim = solve_unit_level(limit_curve, initial / 2.0, initial * 2.0, root_tol).root
    _check_monotone(limit_curve, lim, pr)
    lambdas = []
    prev = lim
    for c in curves:
        r = solve_unit_level(c, prev / 1.5, prev * 1.5, root_tol, start=prev)
        _check_monotone(c, r.root, pr)
        lambdas.append(r.root)
        prev = r.root
    return ImplicitSequenceResult(lambdas, lim, [abs(x - lim) for x in lambdas])
