"""The Cauchy singular integral operator ``S``, projections ``P``, ``Q``, and
finite sections of ``aP + Q`` on uniform grids.

``(Sf)(x) = (1/(pi i)) PV int f(t) / (t - x) dt``, ``P = (I + S)/2``,
``Q = (I - S)/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import svdvals, toeplitz

from .functions import FunctionHandle, zero
from .quadrature import (QuadratureSpec, geometric_breaks, integrate, pieces_between,
                         tail_pieces)
from .symbols import symbol_matrix_function


# --- pointwise principal values -------------------------------------------

def _near_pieces(x: float, rho: float, breakpoints: Sequence[float]):
    # the symmetric-difference integrand has kinks where x +- s hits a breakpoint
    kinks = [abs(c - x) for c in breakpoints if 0 < abs(c - x) < rho]
    return pieces_between(0.0, rho, kinks)


def cauchy_apply(f: FunctionHandle, x: float, quad: QuadratureSpec = QuadratureSpec(),
                 full_output: bool = False):
    """``(Sf)(x)`` by singularity subtraction on a symmetric window.

    Over ``|t - x| < rho`` the principal value equals
    ``int_0^rho (f(x + s) - f(x - s)) / s ds`` (no log term for a symmetric
    window); the far field is integrated directly, with mapped tails when
    ``f`` is not compactly supported.
    """
    if not f.is_integrable:
        raise ValueError(f"{f.label}: Cauchy transform needs decay or support metadata")
    x = float(x)
    rho = quad.pv_window
    T = quad.truncation_T
    if f.support_hint is None and not abs(x) + rho < T:
        raise ValueError(f"x={x} outside the evaluable region |x| < T - pv_window")
    if f.is_zero:
        return (0j, 0.0) if full_output else 0j

    def near(s):
        return (f(x + s) - f(x - s)) / s

    def far(t):
        return f(t) / (t - x)

    r1 = integrate(near, _near_pieces(x, rho, f.breakpoints), quad.abs_tol / 2,
                   quad.max_refinements, quad.order)
    if f.support_hint is not None:
        a, b = f.support_hint
        pieces = []
        if a < x - rho:
            pieces += pieces_between(a, min(b, x - rho), f.breakpoints)
        if b > x + rho:
            pieces += pieces_between(max(a, x + rho), b, f.breakpoints)
    else:
        breaks = [c for c in list(f.breakpoints) + geometric_breaks(T)
                  if not x - rho < c < x + rho]
        pieces = (pieces_between(-T, x - rho, breaks) + pieces_between(x + rho, T, breaks)
                  + tail_pieces(T, 1.0))
    value = complex(r1.value)
    err = r1.error
    if pieces:
        r2 = integrate(far, pieces, quad.abs_tol / 2, quad.max_refinements, quad.order)
        value += complex(r2.value)
        err += r2.error
    value /= math.pi * 1j
    err /= math.pi
    return (value, err) if full_output else value


def apply_P(f: FunctionHandle, x: float, quad: QuadratureSpec = QuadratureSpec()) -> complex:
    return 0.5 * (complex(f(float(x))) + cauchy_apply(f, x, quad))


def apply_Q(f: FunctionHandle, x: float, quad: QuadratureSpec = QuadratureSpec()) -> complex:
    return 0.5 * (complex(f(float(x))) - cauchy_apply(f, x, quad))


# --- vectorised transform for compactly supported functions ------------------

class CauchyTransform:
    """Fixed-rule ``S phi`` for a smooth ``phi`` supported in ``[a, b]``.

    Near the support: ``int (phi(t) - phi(x))/(t - x) dt + phi(x) log((b-x)/(x-a))``
    on a composite Gauss-Legendre rule (the first integrand is smooth). Far
    away: the multipole series ``-sum_k m_k / x^(k+1)`` about the centre.
    """

    def __init__(self, phi: FunctionHandle, panels: int = 64, order: int = 16,
                 multipole_terms: int = 40):
        if phi.support_hint is None:
            raise ValueError("CauchyTransform needs a compactly supported function")
        self.phi = phi
        # P phi and Q phi evaluate S phi at the same nodes back to back
        self._memo: Dict[bytes, np.ndarray] = {}
        a, b = phi.support_hint
        self.a, self.b = a, b
        self.zero = phi.is_zero
        if self.zero:
            return
        nodes, weights = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        self.t = (edges[:-1, None] + half[:, None] * (nodes + 1.0)).ravel()
        self.w = (half[:, None] * weights).ravel()
        self.ft = np.asarray(phi(self.t), dtype=complex)
        self.c = 0.5 * (a + b)
        self.r = 0.5 * (b - a)
        u = self.t - self.c
        k = np.arange(multipole_terms)
        self.moments = (self.w * self.ft) @ (u[:, None] ** k)
        self.far = 2.0 * self.r

    def __call__(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        key = xs.tobytes()
        hit = self._memo.get(key)
        if hit is not None:
            return hit.copy() if np.ndim(x) else hit[0]
        out = self._evaluate(xs)
        if len(self._memo) >= 64:
            self._memo.pop(next(iter(self._memo)))
        self._memo[key] = out
        return out.copy() if np.ndim(x) else out[0]

    def _evaluate(self, xs: np.ndarray) -> np.ndarray:
        out = np.zeros(xs.shape, dtype=complex)
        if self.zero:
            return out
        y = xs - self.c
        far = np.abs(y) > self.far
        if far.any():
            # 1/(t - x) = -(1/y) sum_k (u/y)^k with u = t - c, y = x - c
            yf = y[far]
            inv = 1.0 / yf
            acc = np.zeros(yf.shape, dtype=complex)
            powk = inv.copy()
            for m in self.moments:
                acc += m * powk
                powk = powk * inv
            out[far] = -acc
        near = ~far
        if near.any():
            xn = xs[near]
            fx = np.asarray(self.phi(xn), dtype=complex)
            for lo in range(0, xn.size, 512):
                sl = slice(lo, lo + 512)
                d = self.t[None, :] - xn[sl, None]
                with np.errstate(divide="ignore", invalid="ignore"):
                    g = (self.ft[None, :] - fx[sl, None]) / d
                g = np.where(d == 0, 0.0, g)
                out_sl = g @ self.w
                inside = (xn[sl] > self.a) & (xn[sl] < self.b)
                xi = xn[sl][inside]
                out_sl[inside] += fx[sl][inside] * np.log((self.b - xi) / (xi - self.a))
                idx = np.flatnonzero(near)[sl]
                out[idx] = out_sl
        out /= math.pi * 1j
        return out

    def privalov_constant(self, extra: int = 2001) -> float:
        """``sup |S phi(x)| (1 + |x|)`` over a dense grid near the support plus
        the far-field limit ``|int phi| / pi`` (approached from below)."""
        if self.zero:
            return 0.0
        span = 4.0 * max(self.r, 1.0) + abs(self.c)
        xs = np.concatenate([np.linspace(-span, span, extra),
                             self.c + np.geomspace(self.far, 1e6, 200),
                             self.c - np.geomspace(self.far, 1e6, 200)])
        vals = np.abs(self(xs)) * (1.0 + np.abs(xs))
        asym = abs(self.moments[0]) / math.pi * (1.0 + 0.0)
        return float(max(vals.max(), asym))

    def handles(self) -> Dict[str, FunctionHandle]:
        """``S phi``, ``P phi`` and ``Q phi`` as function handles with envelopes.

        With ``C_S`` the Privalov constant and ``C`` the envelope of ``phi``,
        ``|P phi|, |Q phi| <= ((C + C_S)/2) / (1 + |x|)``.
        """
        c_s = 1.05 * self.privalov_constant()
        c_phi = self.phi.envelope_constant or 0.0
        c_pq = 0.5 * (c_phi + c_s)
        phi = self.phi
        lab = phi.label
        bps = tuple(phi.support_hint or ())
        return {
            "S": FunctionHandle(self, c_s, None, f"S{lab}", bps),
            "P": FunctionHandle(lambda x: 0.5 * (phi(x) + self(x)), c_pq, None, f"P{lab}", bps),
            "Q": FunctionHandle(lambda x: 0.5 * (phi(x) - self(x)), c_pq, None, f"Q{lab}", bps),
        }


@dataclass
class PrivalovReport:
    constant: float
    probes: List[float]
    products: List[float]


def privalov_decay_check(f: FunctionHandle, probes: Sequence[float],
                         quad: QuadratureSpec = QuadratureSpec()) -> PrivalovReport:
    """Fitted ``C = max |Sf(x)| (1 + |x|)`` over ``probes`` (adaptive quadrature)."""
    if f.support_hint is None:
        raise ValueError("Privalov check needs a compactly supported function")
    xs = [float(x) for x in probes]
    prods = [abs(cauchy_apply(f, x, quad)) * (1.0 + abs(x)) for x in xs]
    return PrivalovReport(max(prods) if prods else 0.0, xs, prods)


# --- finite sections ---------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``n`` points on ``[-T, T]``."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("grid half-width must be positive")
        if self.n < 8:
            raise ValueError("grid needs at least 8 points")

    @classmethod
    def with_spacing(cls, T: float, spacing: float) -> "GridSpec":
        return cls(T, int(round(2.0 * T / spacing)) + 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.T / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.n)


KINDS = ("S", "P", "Q", "aP+Q", "PaI+Q", "Pa*I+Q", "I+PaQ", "I-PaQ", "I+QaP", "I-QaP")


@dataclass
class FiniteSectionOperator:
    matrix: np.ndarray
    grid: GridSpec
    size: int
    kind: str
    label: str = "a"

    def __post_init__(self):
        m = self.size * self.grid.n
        if self.matrix.shape != (m, m):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({m}, {m})")

    def __matmul__(self, other: "FiniteSectionOperator") -> np.ndarray:
        return self.matrix @ other.matrix


def discrete_cauchy(n: int) -> np.ndarray:
    """Odd/even PV rule: ``S[i, j] = 2 / (pi i (j - i))`` for odd ``j - i``.

    The spacing cancels; the matrix is Hermitian, matching ``S* = S``.
    """
    d = np.arange(n)
    col = np.zeros(n, dtype=complex)
    odd = d % 2 == 1
    col[odd] = 2.0 / (math.pi * 1j * (-d[odd]))  # S[i, 0] with j - i = -i
    row = np.zeros(n, dtype=complex)
    row[odd] = 2.0 / (math.pi * 1j * d[odd])
    return toeplitz(col, row)


def _multiplication(a, grid: GridSpec, conjugate: bool = False):
    ev, N, label = symbol_matrix_function(a)
    vals = np.asarray(ev(grid.points), dtype=complex).reshape(grid.n, N, N)
    if conjugate:
        vals = np.conj(np.swapaxes(vals, 1, 2))
    n = grid.n
    M = np.zeros((N * n, N * n), dtype=complex)
    idx = np.arange(n)
    for al in range(N):
        for be in range(N):
            M[al * n + idx, be * n + idx] = vals[:, al, be]
    return M, N, label


def _projections(N: int, n: int):
    S = np.kron(np.eye(N), discrete_cauchy(n))
    I = np.eye(N * n, dtype=complex)
    return S, 0.5 * (I + S), 0.5 * (I - S), I


def assemble_finite_section(a, grid: GridSpec, kind: str = "aP+Q") -> FiniteSectionOperator:
    """Dense section of an operator built from ``S`` and multiplication by ``a``.

    Layout is component-major: unknown ``(alpha, i)`` sits at ``alpha*n + i``.
    """
    if kind not in KINDS:
        raise ValueError(f"unsupported kind {kind!r}; expected one of {KINDS}")
    if a is None:
        a = 1.0
    A, N, label = _multiplication(a, grid, conjugate=(kind == "Pa*I+Q"))
    S, P, Q, I = _projections(N, grid.n)
    mats = {
        "S": lambda: S,
        "P": lambda: P,
        "Q": lambda: Q,
        "aP+Q": lambda: A @ P + Q,
        "PaI+Q": lambda: P @ A + Q,
        "Pa*I+Q": lambda: P @ A + Q,
        "I+PaQ": lambda: I + P @ A @ Q,
        "I-PaQ": lambda: I - P @ A @ Q,
        "I+QaP": lambda: I + Q @ A @ P,
        "I-QaP": lambda: I - Q @ A @ P,
    }
    return FiniteSectionOperator(mats[kind](), grid, N, kind, label)


@dataclass
class ResidualReport:
    """Frobenius residuals divided by ``sqrt(N n)`` (``= ||I||_F``); raw values kept."""

    grid: GridSpec
    normalized: Dict[str, float]
    raw: Dict[str, float] = field(default_factory=dict)


def identity_residuals(a, grid: GridSpec) -> ResidualReport:
    """Residuals of ``S^2 = I``, ``(PaQ)^2 = 0``, ``(I+PaQ)(I-PaQ) = I``,
    ``PaI+Q = (I+PaQ)(aP+Q)(I-QaP)`` and ``(aP+Q)^* = Pa*I+Q``."""
    A, N, _ = _multiplication(a if a is not None else 1.0, grid)
    S, P, Q, I = _projections(N, grid.n)
    PaQ = P @ A @ Q
    QaP = Q @ A @ P
    aPQ = A @ P + Q
    astar = np.conj(A.T)
    raw = {
        "involution": np.linalg.norm(S @ S - I),
        "nilpotency": np.linalg.norm(PaQ @ PaQ),
        "inverse_pair": np.linalg.norm((I + PaQ) @ (I - PaQ) - I),
        "factorization": np.linalg.norm((I + PaQ) @ aPQ @ (I - QaP) - (P @ A + Q)),
        "adjoint": np.linalg.norm(np.conj(aPQ.T) - (P @ astar + Q)),
    }
    scale = math.sqrt(N * grid.n)
    raw = {k: float(v) for k, v in raw.items()}
    return ResidualReport(grid, {k: v / scale for k, v in raw.items()}, raw)


def involution_residual(grid: GridSpec) -> float:
    """``||S_n^2 - I||_F / sqrt(n)``."""
    S = discrete_cauchy(grid.n)
    return float(np.linalg.norm(S @ S - np.eye(grid.n)) / math.sqrt(grid.n))


def sigma_min(op) -> float:
    """Smallest singular value (an l2 surrogate for the injection modulus)."""
    m = op.matrix if isinstance(op, FiniteSectionOperator) else np.asarray(op)
    return float(svdvals(m).min())


@dataclass
class SweepRecord:
    T: float
    n: int
    sigma_min: float
    residuals: Dict[str, float] = field(default_factory=dict)


def sigma_min_sweep(a, half_widths: Sequence[float], spacing: float, kind: str = "aP+Q",
                    residuals: bool = False) -> List[SweepRecord]:
    """``sigma_min`` of sections at fixed spacing and growing ``T``."""
    out = []
    for T in half_widths:
        g = GridSpec.with_spacing(T, spacing)
        op = assemble_finite_section(a, g, kind)
        res = identity_residuals(a, g).normalized if residuals else {}
        out.append(SweepRecord(float(T), g.n, sigma_min(op), res))
    return out


def s_norm_formula(q: float) -> float:
    """``tan(pi/(2q))`` for ``q <= 2`` and ``cot(pi/(2q))`` for ``q >= 2``."""
    if not 1.0 < q < math.inf:
        raise ValueError(f"q must lie in (1, inf), got {q}")
    if q == 2.0:
        return 1.0
    t = math.pi / (2.0 * q)
    return math.tan(t) if q < 2.0 else 1.0 / math.tan(t)


# --- cutoffs -------------------------------------------------------------

@dataclass(frozen=True)
class CutoffFamily:
    """``psi_n(x) = 1 - chi_[-1,1](x/n)``."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("cutoff index must be >= 1")

    def __call__(self, x):
        return np.where(np.abs(np.asarray(x, dtype=float)) <= self.n, 0.0, 1.0)


def cutoff_apply(f: FunctionHandle, n: int) -> FunctionHandle:
    """``psi_n f``; exactly the zero function when ``f`` lives inside ``[-n, n]``."""
    psi = CutoffFamily(n)
    if f.support_hint is not None:
        a, b = f.support_hint
        if -n <= a and b <= n:
            return zero(f"psi_{n}*{f.label}")
    ev = f.evaluator
    bps = tuple(sorted(set(f.breakpoints) | {-float(n), float(n)}))
    return FunctionHandle(lambda x: psi(x) * ev(x), f.envelope_constant, f.support_hint,
                          f"psi_{n}*{f.label}", bps)


def export_csv(op: FiniteSectionOperator, path) -> None:
    """Dense row-major matrix, real and imaginary parts interleaved."""
    m = op.matrix
    inter = np.empty((m.shape[0], 2 * m.shape[1]))
    inter[:, 0::2] = m.real
    inter[:, 1::2] = m.imag
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in inter:
            w.writerow([repr(float(v)) for v in row])


def inverse_residual(c: complex, grid: GridSpec) -> float:
    """``||(cP+Q)(c^-1 P+Q) - I||_F / sqrt(n)`` for a constant ``c``."""
    A = assemble_finite_section(c, grid).matrix
    B = assemble_finite_section(1.0 / c, grid).matrix
    return float(np.linalg.norm(A @ B - np.eye(grid.n)) / math.sqrt(grid.n))
