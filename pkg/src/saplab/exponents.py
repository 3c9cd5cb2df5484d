"""Variable exponents ``p: R -> (1, inf)`` and slow-oscillation diagnostics.

Exponents are small expression trees so that translated copies ``p(. + h)``
can be evaluated stably even when ``h`` is astronomically large (the Lerner
exponent only sees ``log log |x + h|``).

Expression grammar (used by config files)::

    expr := constant(q) | lerner(alpha) | decay(q, amp)
          | sum(expr, expr, ...) | scale(c, expr) | clamp(expr, lo, hi)

``decay(q, amp)`` is ``q + amp / (1 + x^2)``. Numeric arguments are
arithmetic over ``pi``, ``e``, ``sqrt``, ``exp`` and ``log``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .shifts import Translation


class _Node:
    def eval(self, x: np.ndarray, shift: Optional[Translation]) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class _Const(_Node):
    q: float

    def eval(self, x, shift):
        return np.full(np.shape(x), self.q, dtype=float)


@dataclass(frozen=True)
class _Lerner(_Node):
    alpha: float

    def eval(self, x, shift):
        x = np.asarray(x, dtype=float)
        if shift is None or not shift.is_huge:
            y = x if shift is None else x + shift.value
            ay = np.abs(y)
            big = ay >= math.e
            arg = np.zeros_like(ay)
            arg[big] = np.log(np.log(ay[big]))
            return self.alpha + np.sin(arg)
        # log log|x+h| = t + log1p(log1p(x/h) / log|h|) with log|h| = exp(t)
        t = shift.loglog
        log_h = math.exp(t) if t < 700.0 else math.inf
        inv_h = math.exp(-log_h) if log_h < 745.0 else 0.0
        with np.errstate(under="ignore"):
            ratio = shift.sign * x * inv_h
        return self.alpha + np.sin(t + np.log1p(np.log1p(ratio) / log_h))


@dataclass(frozen=True)
class _Decay(_Node):
    q: float
    amp: float

    def eval(self, x, shift):
        y = np.asarray(x, dtype=float) + (0.0 if shift is None else shift.value)
        with np.errstate(over="ignore"):
            return self.q + self.amp / (1.0 + y * y)


@dataclass(frozen=True)
class _Sum(_Node):
    terms: Tuple[_Node, ...]

    def eval(self, x, shift):
        return sum(t.eval(x, shift) for t in self.terms)


@dataclass(frozen=True)
class _Scale(_Node):
    c: float
    inner: _Node

    def eval(self, x, shift):
        return self.c * self.inner.eval(x, shift)


@dataclass(frozen=True)
class _Clamp(_Node):
    inner: _Node
    lo: float
    hi: float

    def eval(self, x, shift):
        return np.clip(self.inner.eval(x, shift), self.lo, self.hi)


@dataclass(frozen=True)
class _Dual(_Node):
    inner: _Node

    def eval(self, x, shift):
        v = self.inner.eval(x, shift)
        return v / (v - 1.0)


@dataclass(frozen=True)
class _Shifted(_Node):
    inner: _Node
    by: Translation

    def eval(self, x, shift):
        if shift is not None:
            raise ValueError("nested translations of an exponent are not supported")
        return self.inner.eval(x, self.by)


@dataclass(frozen=True)
class _Callable(_Node):
    fn: Callable[[np.ndarray], np.ndarray]

    def eval(self, x, shift):
        y = np.asarray(x, dtype=float) + (0.0 if shift is None else shift.value)
        return np.asarray(self.fn(y), dtype=float)


@dataclass(frozen=True)
class VariableExponent:
    """A variable exponent with declared essential bounds.

    The bounds are trusted (essential inf/sup are not computable from point
    values); :meth:`audit` checks them on a grid. ``class_e`` records the
    user-asserted boundedness of the Cauchy singular integral operator on the
    corresponding variable Lebesgue space; ``slowly_oscillating`` records SO
    membership, again asserted rather than proved.
    """

    node: _Node
    p_minus: float
    p_plus: float
    label: str = "p"
    class_e: bool = False
    slowly_oscillating: bool = False

    def __post_init__(self):
        if not (1.0 < self.p_minus <= self.p_plus < math.inf):
            raise ValueError(
                f"exponent bounds must satisfy 1 < p_minus <= p_plus < inf, "
                f"got [{self.p_minus}, {self.p_plus}] for {self.label}")

    @classmethod
    def from_callable(cls, fn, p_minus: float, p_plus: float, label: str = "p", *,
                      class_e: bool = False, slowly_oscillating: bool = False):
        return cls(_Callable(fn), p_minus, p_plus, label, class_e, slowly_oscillating)

    def __call__(self, x):
        out = self.node.eval(np.asarray(x, dtype=float), None)
        return out[()] if np.ndim(x) == 0 else out

    def at(self, h: Translation) -> float:
        """``p(h)``, stable for huge ``h``."""
        return float(self.node.eval(np.zeros(1), h)[0])

    def translate(self, h: Translation) -> "VariableExponent":
        """The exponent ``x -> p(x + h)``; bounds are unchanged."""
        return VariableExponent(_Shifted(self.node, h), self.p_minus, self.p_plus,
                                f"{self.label}(.+h)", self.class_e, self.slowly_oscillating)

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def audit(self, grid: Sequence[float], atol: float = 1e-12) -> bool:
        v = self(np.asarray(grid, dtype=float))
        return bool(np.all((v >= self.p_minus - atol) & (v <= self.p_plus + atol)))


def constant(q: float) -> VariableExponent:
    return VariableExponent(_Const(float(q)), float(q), float(q), f"constant({q})",
                            class_e=True, slowly_oscillating=True)


def lerner_exponent(alpha: float) -> VariableExponent:
    """``alpha + sin(log log |x|)`` for ``|x| >= e`` and ``alpha`` otherwise.

    Continuous, even, slowly oscillating, with no limit at infinity; the
    liminf/limsup at +-infinity are ``alpha -+ 1``.
    """
    if not alpha > 2:
        raise ValueError(f"Lerner exponent needs alpha > 2, got {alpha}")
    return VariableExponent(_Lerner(float(alpha)), alpha - 1.0, alpha + 1.0,
                            f"lerner({alpha})", class_e=True, slowly_oscillating=True)


def decay_exponent(q: float, amp: float) -> VariableExponent:
    lo, hi = sorted((q, q + amp))
    return VariableExponent(_Decay(float(q), float(amp)), lo, hi, f"decay({q},{amp})",
                            class_e=True, slowly_oscillating=True)


def sum_exponents(*parts: VariableExponent) -> VariableExponent:
    if not parts:
        raise ValueError("sum of no exponents")
    return VariableExponent(
        _Sum(tuple(p.node for p in parts)),
        sum(p.p_minus for p in parts), sum(p.p_plus for p in parts),
        "sum(" + ",".join(p.label for p in parts) + ")",
        slowly_oscillating=all(p.slowly_oscillating for p in parts))


def clamp_exponent(p: VariableExponent, lo: float, hi: float) -> VariableExponent:
    lo_b, hi_b = _clamp_bounds(p.p_minus, p.p_plus, lo, hi)
    return VariableExponent(_Clamp(p.node, lo, hi), lo_b, hi_b, f"clamp({p.label},{lo},{hi})",
                            False, p.slowly_oscillating)


def scale_exponent(c: float, p: VariableExponent) -> VariableExponent:
    lo, hi = sorted((c * p.p_minus, c * p.p_plus))
    return VariableExponent(_Scale(c, p.node), lo, hi, f"scale({c},{p.label})",
                            False, p.slowly_oscillating)


def dual(p: VariableExponent) -> VariableExponent:
    """The conjugate exponent ``p' = p / (p - 1)``.

    ``t -> t/(t-1)`` is decreasing, so the bounds swap roles.
    """
    return VariableExponent(_Dual(p.node), p.p_plus / (p.p_plus - 1.0),
                            p.p_minus / (p.p_minus - 1.0), f"dual({p.label})",
                            p.class_e, p.slowly_oscillating)


def _clamp_bounds(pm, pp, lo, hi):
    if lo > hi:
        raise ValueError("clamp needs lo <= hi")
    return min(max(pm, lo), hi), min(max(pp, lo), hi)


# --- expression grammar ---------------------------------------------------

_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b,
           ast.Pow: lambda a, b: a ** b}


def _number(node: ast.AST) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        try:
            return float(_BINOPS[type(node.op)](_number(node.left), _number(node.right)))
        except (ZeroDivisionError, OverflowError) as exc:
            raise ValueError(f"bad arithmetic in {ast.unparse(node)!r}: {exc}") from None
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        try:
            return _FUNCS[node.func.id](_number(node.args[0]))
        except (ValueError, OverflowError) as exc:
            raise ValueError(f"bad argument in {ast.unparse(node)!r}: {exc}") from None
    raise ValueError(f"expected a number, got {ast.unparse(node)!r}")


def parse_number(value) -> float:
    """A number, or an arithmetic string over ``pi``, ``e``, ``sqrt``, ``exp``, ``log``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number or numeric expression, got {value!r}")
    try:
        tree = ast.parse(value.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse number {value!r}: {exc.msg}") from None
    return _number(tree.body)


def _compile(node: ast.AST):
    """Compile an expression to ``(node, lo, hi, slowly_oscillating)``.

    Sub-expressions may leave ``(1, inf)``: ``sum(lerner(3), constant(0.5))``
    is a valid exponent although ``constant(0.5)`` alone is not. Only the
    top level is validated.
    """
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)) or node.keywords:
        raise ValueError(f"expected an exponent expression, got {ast.unparse(node)!r}")
    name, args = node.func.id, node.args

    def arity(n):
        if len(args) != n:
            raise ValueError(f"{name} takes {n} argument(s), got {len(args)}")

    if name == "constant":
        arity(1)
        q = _number(args[0])
        return _Const(q), q, q, True
    if name == "lerner":
        arity(1)
        alpha = _number(args[0])
        if not alpha > 2:
            raise ValueError(f"Lerner exponent needs alpha > 2, got {alpha}")
        return _Lerner(alpha), alpha - 1.0, alpha + 1.0, True
    if name == "decay":
        arity(2)
        q, amp = _number(args[0]), _number(args[1])
        lo, hi = sorted((q, q + amp))
        return _Decay(q, amp), lo, hi, True
    if name == "sum":
        if not args:
            raise ValueError("sum of no exponents")
        parts = [_compile(a) for a in args]
        return (_Sum(tuple(p[0] for p in parts)), sum(p[1] for p in parts),
                sum(p[2] for p in parts), all(p[3] for p in parts))
    if name == "scale":
        arity(2)
        c = _number(args[0])
        inner = _compile(args[1])
        lo, hi = sorted((c * inner[1], c * inner[2]))
        return _Scale(c, inner[0]), lo, hi, inner[3]
    if name == "clamp":
        arity(3)
        inner = _compile(args[0])
        lo, hi = _number(args[1]), _number(args[2])
        lo_b, hi_b = _clamp_bounds(inner[1], inner[2], lo, hi)
        return _Clamp(inner[0], lo, hi), lo_b, hi_b, inner[3]
    raise ValueError(f"unknown exponent constructor {name!r}")


def parse_exponent(text: str) -> VariableExponent:
    """Parse an expression such as ``"clamp(sum(lerner(3), decay(0, 0.5)), 2, 4)"``.

    Bare ``constant``, ``lerner`` and ``decay`` expressions carry the
    asserted boundedness flag; composites do not.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse exponent {text!r}: {exc.msg}") from None
    node, lo, hi, so = _compile(tree.body)
    return VariableExponent(node, lo, hi, text.strip(),
                            class_e=isinstance(node, (_Const, _Lerner, _Decay)),
                            slowly_oscillating=so)


# --- oscillation -----------------------------------------------------------

def _spread(values: np.ndarray) -> float:
    if np.iscomplexobj(values) and np.any(np.imag(values) != 0):
        pts = np.column_stack([values.real, values.imag])
        pts = np.unique(pts, axis=0)
        if len(pts) <= 2:
            return float(np.ptp(pts[:, 0] + 1j * pts[:, 1])) if len(pts) == 2 else 0.0
        from scipy.spatial import ConvexHull, QhullError
        try:
            hull = pts[ConvexHull(pts).vertices]
        except QhullError:
            hull = pts
        d = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())
    v = np.real(values)
    return float(v.max() - v.min())


def _sample_osc(f, x: float, n: int) -> float:
    seg = np.linspace(x, 2.0 * x, n)
    pts = np.concatenate([-seg[::-1], seg])
    return _spread(np.asarray(f(pts)))


def oscillation(f, x: float, sampling: int = 256, tol: float = 1e-4,
                budget: int = 1 << 20) -> float:
    """``osc(f, [-2x, -x] U [x, 2x])`` by uniform sampling with doubling.

    The point count per segment doubles until two successive values agree
    to ``tol`` or ``budget`` points are reached.
    """
    if not x > 0:
        raise ValueError("oscillation abscissa must be positive")
    if sampling < 2:
        raise ValueError("sampling must be at least 2")
    n = sampling
    prev = _sample_osc(f, x, n)
    while 2 * n <= budget:
        n *= 2
        cur = _sample_osc(f, x, n)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    return prev


@dataclass
class OscillationSeries:
    abscissae: List[float]
    values: List[float]
    so_consistent: bool
    threshold: float = 1e-2

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.abscissae, self.abscissae[1:])):
            raise ValueError("abscissae must be strictly increasing")
        if any(v < 0 for v in self.values):
            raise ValueError("oscillation values are nonnegative")


def so_diagnostic(f, abscissae: Sequence[float], sampling: int = 256,
                  threshold: float = 1e-2, tail: int = 3) -> OscillationSeries:
    """Oscillation series with a heuristic slow-oscillation verdict.

    SO-consistent means the last ``tail`` values are non-increasing and the
    final one is below ``threshold``. This is a diagnostic, not a proof.
    """
    xs = [float(x) for x in abscissae]
    if not xs:
        raise ValueError("empty abscissae")
    if any(x <= 0 for x in xs):
        raise ValueError("abscissae must be positive")
    values = [oscillation(f, x, sampling) for x in xs]
    t = values[-tail:]
    monotone = all(b <= a + 1e-12 for a, b in zip(t, t[1:]))
    return OscillationSeries(xs, values, bool(monotone and values[-1] < threshold), threshold)


# --- limits at infinity ----------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """Increasing window right-endpoints for estimating liminf/limsup.

    With ``loglog=True`` the endpoints are ``log log |x|`` coordinates and the
    exponent is evaluated through :meth:`VariableExponent.at`, so windows can
    reach far beyond the float range.
    """

    endpoints: Tuple[float, ...]
    loglog: bool = False
    samples_per_window: int = 2048
    tail_fraction: float = 0.5

    def __post_init__(self):
        e = self.endpoints
        if len(e) < 2:
            raise ValueError("a sampling plan needs at least two endpoints")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("plan endpoints must be strictly increasing")
        if not self.loglog and e[0] <= 0:
            raise ValueError("plan endpoints must be positive")
        if self.loglog and e[0] <= 0:
            raise ValueError("log-log endpoints must be positive")
        if not 0 < self.tail_fraction <= 1:
            raise ValueError("tail_fraction must be in (0, 1]")


def limit_at_infinity_bounds(p: VariableExponent, direction: int, plan: SamplingPlan
                             ) -> Tuple[float, float]:
    """Estimated ``(liminf, limsup)`` of ``p`` at ``direction * infinity``.

    Extremes are taken over the trailing ``tail_fraction`` of the windows and
    clipped to the declared bounds.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    e = plan.endpoints
    n_win = len(e) - 1
    first = n_win - max(1, int(math.ceil(plan.tail_fraction * n_win)))
    lo, hi = math.inf, -math.inf
    for a, b in zip(e[first:-1], e[first + 1:]):
        grid = np.linspace(a, b, plan.samples_per_window)
        if plan.loglog:
            vals = np.array([p.at(Translation.from_loglog(t, direction)) for t in grid])
        else:
            vals = p(direction * grid)
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    lo = min(max(lo, p.p_minus), p.p_plus)
    hi = min(max(hi, p.p_minus), p.p_plus)
    return lo, hi
