"""Almost-periodic polynomials, semi-almost-periodic symbols, Kronecker shifts.

Matrix norms (Wiener norm, shift defect) are Frobenius norms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exponents import parse_number
from .functions import FunctionHandle, lorentzian
from .shifts import Translation


class BudgetExhausted(RuntimeError):
    """Raised when a search runs out of candidates before finding enough hits."""


def _as_matrix(coef, size: Optional[int] = None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(coef, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"coefficient must be square, got shape {m.shape}")
    if size is not None and m.shape[0] != size:
        raise ValueError(f"coefficient size {m.shape[0]} != {size}")
    return m


@dataclass(frozen=True)
class APPolynomial:
    """``a(x) = sum_j A_j exp(i lambda_j x)`` with ``N x N`` coefficients."""

    frequencies: Tuple[float, ...]
    coefficients: Tuple[np.ndarray, ...]
    size: int = 1

    def __post_init__(self):
        if len(self.frequencies) != len(self.coefficients):
            raise ValueError("one coefficient per frequency")
        if len(set(self.frequencies)) != len(self.frequencies):
            raise ValueError("frequencies must be pairwise distinct")
        for c in self.coefficients:
            if c.shape != (self.size, self.size):
                raise ValueError(f"coefficient shape {c.shape} does not match size {self.size}")

    @classmethod
    def from_terms(cls, terms: Sequence[Tuple[float, object]], size: Optional[int] = None
                   ) -> "APPolynomial":
        if not terms and size is None:
            size = 1
        mats = [_as_matrix(c, size) for _, c in terms]
        n = size if size is not None else mats[0].shape[0]
        for m in mats:
            m.setflags(write=False)
        return cls(tuple(float(f) for f, _ in terms), tuple(mats), n)

    @classmethod
    def constant(cls, value, size: Optional[int] = None) -> "APPolynomial":
        return cls.from_terms([(0.0, value)], size)

    @classmethod
    def zero(cls, size: int = 1) -> "APPolynomial":
        return cls((), (), size)

    def __call__(self, x):
        return evaluate_ap(self, x)

    def shifted_phases(self, h: Translation) -> "APPolynomial":
        """``a(. + h)`` as another polynomial (coefficients times phases)."""
        return APPolynomial(self.frequencies,
                            tuple(c * h.phase(f) for f, c in zip(self.frequencies, self.coefficients)),
                            self.size)

    def conjugate_transpose(self) -> "APPolynomial":
        """``a^*(x) = sum_j A_j^* exp(-i lambda_j x)``."""
        return APPolynomial(tuple(-f for f in self.frequencies),
                            tuple(c.conj().T for c in self.coefficients), self.size)

    def entry(self, alpha: int, beta: int) -> "APPolynomial":
        terms = [(f, c[alpha, beta]) for f, c in zip(self.frequencies, self.coefficients)]
        return APPolynomial.from_terms(terms, 1)

    def sup_bound(self) -> float:
        return wiener_norm(self)


def evaluate_ap(a: APPolynomial, x):
    """Values ``a(x)``: an ``N x N`` matrix for scalar ``x``, else shape ``(len(x), N, N)``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((xs.size, a.size, a.size), dtype=complex)
    for f, c in zip(a.frequencies, a.coefficients):
        out += np.exp(1j * f * xs)[:, None, None] * c
    return out[0] if np.ndim(x) == 0 else out


def wiener_norm(a: APPolynomial) -> float:
    return float(sum(np.linalg.norm(c) for c in a.coefficients))


def shift_defect(a: APPolynomial, h: Union[float, Translation]) -> float:
    """Upper bound ``sum_j ||A_j|| |exp(i lambda_j h) - 1|`` on ``||a(.+h) - a||_inf``."""
    tr = h if isinstance(h, Translation) else Translation.of(h)
    return float(sum(np.linalg.norm(c) * abs(tr.phase(f) - 1.0)
                     for f, c in zip(a.frequencies, a.coefficients)))


# --- transition functions -----------------------------------------------------

@dataclass(frozen=True)
class TransitionFunction:
    """``u`` with ``0 <= u <= 1``, ``u(-inf) = 0`` and ``u(+inf) = 1``."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    name: str = "tanh"
    scale: float = 1.0

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def audit(self, grid) -> bool:
        v = self(np.asarray(grid, dtype=float))
        return bool(np.all((v >= 0) & (v <= 1)))

    def to_dict(self) -> dict:
        return {"name": self.name, "scale": self.scale}


def tanh_transition(scale: float = 1.0) -> TransitionFunction:
    """The default ``(1 + tanh(x/scale)) / 2``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return TransitionFunction(lambda x: 0.5 * (1.0 + np.tanh(x / scale)), "tanh", scale)


def arctan_transition(scale: float = 1.0) -> TransitionFunction:
    if scale <= 0:
        raise ValueError("scale must be positive")
    return TransitionFunction(lambda x: 0.5 + np.arctan(x / scale) / np.pi, "arctan", scale)


TRANSITIONS = {"tanh": tanh_transition, "arctan": arctan_transition}


# --- SAP symbols ------------------------------------------------------------

Decaying = Optional[FunctionHandle]


@dataclass(frozen=True)
class SAPSymbol:
    """``a = (1 - u) a_l + u a_r + a_0`` with AP representatives ``a_l``, ``a_r``.

    ``a_0`` is an ``N x N`` nested tuple of function handles vanishing at
    infinity (``None`` entries are zero); ``a0_spec`` keeps the JSON form for
    serialisation when the entries come from built-ins.
    """

    a_l: APPolynomial
    a_r: APPolynomial
    a_0: Optional[Tuple[Tuple[Decaying, ...], ...]] = None
    u: TransitionFunction = field(default_factory=tanh_transition)
    label: str = "a"
    a0_spec: Optional[list] = None

    def __post_init__(self):
        if self.a_l.size != self.a_r.size:
            raise ValueError("a_l and a_r must have the same size")
        if self.a_0 is not None:
            n = self.size
            if len(self.a_0) != n or any(len(row) != n for row in self.a_0):
                raise ValueError("a_0 must be N x N")

    @property
    def size(self) -> int:
        return self.a_r.size

    @classmethod
    def from_ap(cls, a: APPolynomial, label: str = "a") -> "SAPSymbol":
        return cls(a, a, None, tanh_transition(), label)

    def a0_values(self, xs: np.ndarray) -> np.ndarray:
        n = self.size
        out = np.zeros((xs.size, n, n), dtype=complex)
        if self.a_0 is None:
            return out
        for i in range(n):
            for j in range(n):
                fh = self.a_0[i][j]
                if fh is not None:
                    with np.errstate(over="ignore", under="ignore"):
                        out[:, i, j] = fh(xs)
        return out

    def __call__(self, x):
        return evaluate_sap(self, x)

    def shifted(self, h: Translation) -> Callable[[np.ndarray], np.ndarray]:
        """Evaluator ``x -> a(x + h)``, exact in the AP phases on a lattice."""
        al, ar = self.a_l.shifted_phases(h), self.a_r.shifted_phases(h)

        def ev(x):
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            y = xs + h.value
            uu = self.u(y)[:, None, None]
            return (1.0 - uu) * evaluate_ap(al, xs) + uu * evaluate_ap(ar, xs) + self.a0_values(y)

        return ev

    def sup_bound(self) -> float:
        """Crude bound on ``sup |a(x)|`` (Frobenius)."""
        bound = max(wiener_norm(self.a_l), wiener_norm(self.a_r))
        if self.a_0 is not None:
            c0 = 0.0
            for row in self.a_0:
                for fh in row:
                    if fh is not None:
                        c0 += (fh.envelope_constant or 0.0) ** 2
            bound += math.sqrt(c0)
        return bound


def evaluate_sap(s: SAPSymbol, x):
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    uu = s.u(xs)[:, None, None]
    out = (1.0 - uu) * evaluate_ap(s.a_l, xs) + uu * evaluate_ap(s.a_r, xs) + s.a0_values(xs)
    return out[0] if np.ndim(x) == 0 else out


def ap_representatives(s: SAPSymbol) -> Tuple[APPolynomial, APPolynomial]:
    """``(a_l, a_r)`` as stored at construction (they are unique)."""
    return s.a_l, s.a_r


def symbol_matrix_function(a) -> Tuple[Callable[[np.ndarray], np.ndarray], int, str]:
    """Normalise a symbol-like object to ``(evaluator -> (n, N, N), N, label)``."""
    if isinstance(a, SAPSymbol):
        return (lambda x: evaluate_sap(a, np.atleast_1d(x))), a.size, a.label
    if isinstance(a, APPolynomial):
        return (lambda x: evaluate_ap(a, np.atleast_1d(x))), a.size, "ap"
    if callable(a):
        probe = np.asarray(a(np.zeros(1)))
        n = probe.shape[-1] if probe.ndim == 3 else 1
        if probe.ndim == 3:
            return (lambda x: np.asarray(a(np.atleast_1d(x)), dtype=complex)), n, "callable"
        return (lambda x: np.asarray(a(np.atleast_1d(x)), dtype=complex)[:, None, None]), 1, "callable"
    m = _as_matrix(a)
    return (lambda x: np.broadcast_to(m, (np.atleast_1d(x).size,) + m.shape)), m.shape[0], "const"


# --- Kronecker translations -------------------------------------------------

def common_period(frequencies: Sequence[float], max_denominator: int = 1000,
                  rtol: float = 1e-12) -> Optional[float]:
    """Smallest ``h > 0`` with every ``lambda_j h`` in ``2 pi Z``, if one exists.

    Frequencies are treated as commensurate when all ratios to the first
    nonzero one are rationals with denominator at most ``max_denominator``.
    """
    nz = [f for f in frequencies if f != 0.0]
    if not nz:
        return None
    base = abs(nz[0])
    ratios = []
    for f in nz:
        r = abs(f) / base
        fr = Fraction(r).limit_denominator(max_denominator)
        if abs(float(fr) - r) > rtol * max(1.0, r):
            return None
        ratios.append(fr)
    lcm_den = reduce(lambda a, b: a * b // math.gcd(a, b), (fr.denominator for fr in ratios), 1)
    return 2.0 * math.pi / base * lcm_den


def _defects(freqs: np.ndarray, h: np.ndarray) -> np.ndarray:
    # |exp(i t) - 1| = 2 |sin(t / 2)|
    return (2.0 * np.abs(np.sin(0.5 * np.outer(h, freqs)))).max(axis=1)


def kronecker_translations(frequencies: Sequence[float], eps: float, count: int,
                           direction: int = 1, budget: int = 10_000_000,
                           step: float = 1e-3, min_gap: float = 1.0,
                           block: int = 200_000) -> List[float]:
    """Shifts ``h_m`` with ``max_j |exp(i lambda_j h_m) - 1| < eps``.

    Commensurate frequencies give exact multiples of the common period.
    Otherwise candidates ``h = k * step`` (``k = 1, 2, ...``) are scanned in
    blocks; a hit is accepted when it lies at least ``min_gap`` beyond the
    previous one (or beyond ``0`` for the first, which rules out the trivial
    tiny shifts), until ``count`` shifts are found or ``budget``
    candidates are spent. Direction ``-1`` negates the shifts.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not len(frequencies):
        raise ValueError("frequencies must be nonempty")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if count < 1:
        raise ValueError("count must be positive")
    freqs = np.asarray(frequencies, dtype=float)

    period = common_period(frequencies)
    if period is not None:
        hs = period * np.arange(1, count + 1)
        if np.all(_defects(freqs, hs) < eps):
            return [direction * float(h) for h in hs]

    hits: List[float] = []
    last = 0.0
    k0 = 1
    while k0 <= budget and len(hits) < count:
        k1 = min(budget, k0 + block - 1)
        hs = np.arange(k0, k1 + 1, dtype=float) * step
        ok = np.flatnonzero(_defects(freqs, hs) < eps)
        for i in ok:
            h = float(hs[i])
            if h - last >= min_gap:
                hits.append(h)
                last = h
                if len(hits) == count:
                    break
        k0 = k1 + 1
    if len(hits) < count:
        raise BudgetExhausted(
            f"found {len(hits)} of {count} translations with eps={eps} "
            f"within {budget} candidates (step {step})")
    return [direction * h for h in hits]


def kronecker_lattice(frequencies: Sequence[float]) -> Optional[float]:
    """Lattice period usable for exact translations in log-log coordinates."""
    return common_period(frequencies)


# --- JSON schema -------------------------------------------------------------

def _coef_to_json(c: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in c]


def _coef_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 0:
        return np.array([[complex(arr)]])
    if arr.ndim == 1 and arr.shape == (2,):
        return np.array([[complex(arr[0], arr[1])]])
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    raise ValueError(f"cannot read coefficient {obj!r}")


def _frequency_from_json(v) -> float:
    if isinstance(v, dict):
        if set(v) != {"pi"}:
            raise ValueError(f"frequency objects take only 'pi', got {sorted(v)}")
        return parse_number(v["pi"]) * math.pi
    return parse_number(v)


def ap_to_dict(a: APPolynomial) -> dict:
    return {"size": a.size,
            "terms": [{"frequency": f, "coefficient": _coef_to_json(c)}
                      for f, c in zip(a.frequencies, a.coefficients)]}


def ap_from_dict(d: dict) -> APPolynomial:
    size = int(d.get("size", 1))
    terms = [(_frequency_from_json(t["frequency"]), _coef_from_json(t["coefficient"]))
             for t in d.get("terms", [])]
    if not terms:
        return APPolynomial.zero(size)
    return APPolynomial.from_terms(terms, size)


A0_BUILTINS = {"lorentzian": lambda scale=1.0: lorentzian(scale)}


def _a0_from_spec(spec, size):
    if spec is None:
        return None
    if len(spec) != size or any(len(row) != size for row in spec):
        raise ValueError("a_0 must be an N x N array of entries")
    rows = []
    for row in spec:
        out = []
        for ent in row:
            if ent is None:
                out.append(None)
                continue
            params = dict(ent)
            name = params.pop("name")
            if name not in A0_BUILTINS:
                raise ValueError(f"unknown a_0 built-in {name!r}")
            if isinstance(params.get("scale"), list):
                params["scale"] = complex(*params["scale"])
            out.append(A0_BUILTINS[name](**params))
        rows.append(tuple(out))
    return tuple(rows)


def symbol_to_dict(s: SAPSymbol) -> dict:
    return {"a_l": ap_to_dict(s.a_l), "a_r": ap_to_dict(s.a_r), "a_0": s.a0_spec,
            "u": s.u.to_dict(), "label": s.label}


def symbol_from_dict(d: dict) -> SAPSymbol:
    """Read a symbol document.

    ``{"a_l": AP, "a_r": AP, "a_0": [[entry|null]]|null, "u": {"name", "scale"}}``
    where ``AP = {"size": N, "terms": [{"frequency": f | {"pi": r},
    "coefficient": c}]}`` and ``c`` is a number, ``[re, im]`` or an ``N x N``
    array of ``[re, im]`` pairs. ``a_0`` entries are ``{"name": "lorentzian",
    "scale": s}``.
    """
    unknown = set(d) - {"a_l", "a_r", "a_0", "u", "label"}
    if unknown:
        raise ValueError(f"unknown symbol fields {sorted(unknown)}")
    a_l = ap_from_dict(d["a_l"])
    a_r = ap_from_dict(d["a_r"])
    u_spec = dict(d.get("u") or {"name": "tanh"})
    name = u_spec.pop("name", "tanh")
    if name not in TRANSITIONS:
        raise ValueError(f"unknown transition {name!r}")
    a0 = _a0_from_spec(d.get("a_0"), a_r.size)
    return SAPSymbol(a_l, a_r, a0, TRANSITIONS[name](**u_spec), d.get("label", "a"), d.get("a_0"))


def symbol_like_from_dict(d: dict):
    """``{"ap": AP}`` gives an :class:`APPolynomial`, anything else a :class:`SAPSymbol`."""
    if "ap" in d:
        if set(d) != {"ap"}:
            raise ValueError("an 'ap' symbol document takes no other fields")
        return ap_from_dict(d["ap"])
    return symbol_from_dict(d)
