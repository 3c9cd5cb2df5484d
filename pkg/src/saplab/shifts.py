"""Translations ``h`` that may be too large for a float.

The Lerner exponent depends on ``h`` only through ``log log |h|``, and an
almost-periodic polynomial only through the phases ``exp(i lambda h)``. A
:class:`Translation` therefore carries ``log log |h|`` exactly and, when ``h``
is known to lie on a lattice of common periods, the phases exactly as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

# finite stand-in for |h| once exp(exp(t)) overflows
PROXY = 1e300
_DIRECT_LIMIT = 1e15


@dataclass(frozen=True)
class Translation:
    """A real shift ``h``.

    ``value`` is ``h`` itself, or ``sign * PROXY`` when ``|h|`` overflows.
    ``loglog`` is ``log log |h|`` (only for ``|h| > e``). ``lattice`` records
    that ``h`` is an integer multiple of that period.
    """

    value: float
    loglog: Optional[float] = None
    lattice: Optional[float] = None

    @classmethod
    def of(cls, h: float, lattice: Optional[float] = None) -> "Translation":
        h = float(h)
        t = math.log(math.log(abs(h))) if abs(h) > math.e else None
        return cls(h, t, lattice)

    @classmethod
    def from_loglog(cls, t: float, sign: int = 1, lattice: Optional[float] = None) -> "Translation":
        """The shift ``sign * exp(exp(t))``.

        With a lattice the shift is understood as the nearest lattice point;
        that moves ``log log |h|`` by less than ``lattice / (|h| log |h|)``,
        below double precision once ``|h|`` exceeds ``1e15``.
        """
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if t <= 0:
            raise ValueError("log-log coordinate must be positive (|h| > e)")
        log_h = math.exp(t) if t < 700.0 else math.inf
        if log_h < math.log(PROXY):
            mag = math.exp(log_h)
            if lattice is not None and mag < _DIRECT_LIMIT:
                mag = lattice * max(1, round(mag / lattice))
                t = math.log(math.log(mag)) if mag > math.e else t
            return cls(sign * mag, t, lattice)
        return cls(sign * PROXY, t, lattice)

    @property
    def sign(self) -> int:
        return 1 if self.value >= 0 else -1

    @property
    def is_huge(self) -> bool:
        """True when ``value`` alone does not resolve ``h`` to unit precision."""
        return abs(self.value) > _DIRECT_LIMIT

    @property
    def log_abs(self) -> float:
        if self.loglog is not None:
            return math.exp(self.loglog) if self.loglog < 700.0 else math.inf
        return math.log(abs(self.value))

    def phase(self, frequency: float) -> complex:
        """``exp(i * frequency * h)``, exact on a commensurate lattice."""
        if frequency == 0.0:
            return 1.0 + 0j
        if self.lattice is not None:
            r = frequency * self.lattice / (2.0 * math.pi)
            if abs(r - round(r)) <= 1e-12 * max(1.0, abs(r)):
                return 1.0 + 0j
        if self.is_huge:
            raise ValueError(
                f"phase of frequency {frequency} is not resolvable for a shift of size "
                f"exp(exp({self.loglog})) without a commensurate lattice")
        arg = frequency * self.value
        return complex(math.cos(arg), math.sin(arg))

    def negated(self) -> "Translation":
        return Translation(-self.value, self.loglog, self.lattice)

    def describe(self) -> dict:
        out = {"h": self.value, "loglog": self.loglog}
        if self.lattice is not None:
            out["lattice"] = self.lattice
        return out
