"""Complex-valued functions on the real line with decay/support metadata.

A :class:`FunctionHandle` wraps a vectorised evaluator together with the two
pieces of metadata the rest of the package relies on to integrate over the
whole line: an envelope constant ``C`` with ``|f(x)| <= C / (1 + |x|)`` and a
support interval outside of which ``f`` vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FunctionHandle:
    """A function ``R -> C`` evaluated on numpy arrays.

    ``breakpoints`` lists points where the function (or a low derivative) is
    discontinuous; quadrature routines split their panels there.
    """

    evaluator: Evaluator
    envelope_constant: Optional[float] = None
    support_hint: Optional[Tuple[float, float]] = None
    label: str = "f"
    breakpoints: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.envelope_constant is not None and self.envelope_constant < 0:
            raise ValueError("envelope constant must be nonnegative")
        if self.support_hint is not None:
            a, b = self.support_hint
            if not a <= b:
                raise ValueError(f"bad support interval {self.support_hint}")

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.asarray(self.evaluator(x_arr))
        if out.shape != x_arr.shape:
            out = np.broadcast_to(out, x_arr.shape)
        if self.support_hint is not None:
            a, b = self.support_hint
            out = np.where((x_arr < a) | (x_arr > b), 0.0, out)
        if np.ndim(x) == 0:
            return out[()]
        return out

    @property
    def is_integrable(self) -> bool:
        return self.support_hint is not None or self.envelope_constant is not None

    @property
    def is_zero(self) -> bool:
        return self.support_hint is not None and self.support_hint[0] == self.support_hint[1]

    def scaled(self, c: complex, label: Optional[str] = None) -> "FunctionHandle":
        env = None if self.envelope_constant is None else abs(c) * self.envelope_constant
        ev = self.evaluator
        return replace(self, evaluator=lambda x: c * ev(x), envelope_constant=env,
                       label=label or f"{c}*{self.label}")

    def conjugate(self) -> "FunctionHandle":
        ev = self.evaluator
        return replace(self, evaluator=lambda x: np.conj(ev(x)), label=f"conj({self.label})")

    def audit(self, grid: Sequence[float], atol: float = 1e-12) -> bool:
        """Check the declared envelope on ``grid`` (support is enforced on evaluation)."""
        x = np.asarray(grid, dtype=float)
        if self.envelope_constant is None:
            return True
        vals = np.abs(np.asarray(self(x)))
        return bool(np.all(vals <= self.envelope_constant / (1.0 + np.abs(x)) + atol))


def zero(label: str = "0") -> FunctionHandle:
    return FunctionHandle(lambda x: np.zeros_like(x, dtype=complex), envelope_constant=0.0,
                          support_hint=(0.0, 0.0), label=label)


def indicator(a: float = 0.0, b: float = 1.0, height: complex = 1.0) -> FunctionHandle:
    """``height`` times the characteristic function of ``[a, b]``."""
    if not a < b:
        raise ValueError("indicator needs a < b")
    return FunctionHandle(
        lambda x: np.full_like(x, height, dtype=complex),
        envelope_constant=abs(height) * (1.0 + max(abs(a), abs(b))),
        support_hint=(a, b),
        label=f"{height}*chi[{a},{b}]",
        breakpoints=(a, b),
    )


def bump(center: float = 0.0, radius: float = 1.0, height: complex = 1.0) -> FunctionHandle:
    """Smooth compactly supported bump ``height * exp(1 - 1/(1 - t^2))``, ``t = (x-c)/r``.

    Normalised so that its maximum equals ``|height|``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")

    def ev(x):
        t = (x - center) / radius
        out = np.zeros_like(t, dtype=complex)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - ti * ti))
        return out

    return FunctionHandle(
        ev,
        envelope_constant=abs(height) * (1.0 + abs(center) + radius),
        support_hint=(center - radius, center + radius),
        label=f"bump({center},{radius},{height})",
    )


def reciprocal_decay(c: complex = 1.0) -> FunctionHandle:
    """``c / (1 + |x|)``; the extremal member of the envelope class."""
    return FunctionHandle(lambda x: c / (1.0 + np.abs(x)) + 0j, envelope_constant=abs(c),
                          label=f"{c}/(1+|x|)", breakpoints=(0.0,))


def lorentzian(c: complex = 1.0) -> FunctionHandle:
    """``c / (1 + x^2)``; ``(1 + |x|)/(1 + x^2)`` peaks at ``(1 + sqrt 2)/2``."""
    return FunctionHandle(lambda x: c / (1.0 + x * x) + 0j,
                          envelope_constant=abs(c) * 0.5 * (1.0 + math.sqrt(2.0)),
                          label=f"{c}/(1+x^2)")


def cauchy_kernel(sign: int = +1) -> FunctionHandle:
    """``1/(x + i)`` for ``sign=+1`` and ``1/(x - i)`` for ``sign=-1``.

    ``|1/(x+-i)| = 1/sqrt(1+x^2) <= sqrt(2)/(1+|x|)``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return FunctionHandle(lambda x: 1.0 / (x + sign * 1j), envelope_constant=math.sqrt(2.0),
                          label="1/(x+i)" if sign > 0 else "1/(x-i)")


def gaussian_moment() -> FunctionHandle:
    """``x exp(-x^2)``; ``max |x|(1+|x|) exp(-x^2) < 1``."""
    return FunctionHandle(lambda x: x * np.exp(-x * x) + 0j, envelope_constant=1.0,
                          label="x*exp(-x^2)")


def from_callable(fn: Evaluator, *, envelope_constant=None, support_hint=None,
                  label="f", breakpoints=()) -> FunctionHandle:
    return FunctionHandle(fn, envelope_constant=envelope_constant, support_hint=support_hint,
                          label=label, breakpoints=tuple(breakpoints))


BUILTINS = {
    "zero": lambda: zero(),
    "indicator": indicator,
    "bump": bump,
    "reciprocal_decay": reciprocal_decay,
    "lorentzian": lorentzian,
    "cauchy_plus": lambda: cauchy_kernel(+1),
    "cauchy_minus": lambda: cauchy_kernel(-1),
    "gaussian_moment": gaussian_moment,
}


def function_from_spec(spec: dict) -> FunctionHandle:
    """Build a built-in function from ``{"kind": name, **params}``."""
    params = dict(spec)
    kind = params.pop("kind", None)
    if kind not in BUILTINS:
        raise ValueError(f"unknown function kind {kind!r}; expected one of {sorted(BUILTINS)}")
    for key in ("height", "c"):
        if isinstance(params.get(key), list):
            re, im = params[key]
            params[key] = complex(re, im)
    return BUILTINS[kind](**params)
