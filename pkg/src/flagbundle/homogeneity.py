"""Disc automorphisms acting on flag operators, and the weak-homogeneity criterion.

Bidiagonal operators ``T`` with shift diagonals and multiplier couplings are
weakly homogeneous exactly when every coupling symbol is zero-free on the closed
disc.  For polynomial symbols this is decided from root moduli; a similarity
witness between ``phi(T)`` and ``T`` is built from composition and
multiplication operators and checked numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .intertwine import assemble_blocks, invert_unipotent, solve_symbols
from .op_model import (FlagOperator, block_corner_index, composition_op, mobius_calculus,
                       mobius_series, mobius_taylor, multiplier, poly_of_matrix, series_mul,
                       spectral_norm, trim_poly)
from .kernel_space import DomainError

BOUNDARY_TOL = 1e-9
AGREEMENT_TOL = 1e-9
WITNESS_TOL = 1e-5
GROUP_TOL = 1e-12


class ConsistencyError(ArithmeticError):
    """Two routes to the same quantity disagree beyond tolerance."""

    def __init__(self, message: str, discrepancy: float):
        super().__init__(message)
        self.discrepancy = discrepancy


class CertificateRefused(ValueError):
    """The weak-homogeneity certificate is negative, so no witness is attempted."""


# ---------------------------------------------------------------- Mobius group

@dataclass(frozen=True)
class MobiusElement:
    """``phi(z) = e^{i theta} (alpha - z) / (1 - conj(alpha) z)`` with ``|alpha| < 1``."""

    alpha: complex = 0j
    theta: float = 0.0

    def __post_init__(self):
        a = complex(self.alpha)
        if not abs(a) < 1:
            raise DomainError(f"|alpha| must be < 1, got {abs(a)}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def unit(self) -> complex:
        return complex(np.exp(1j * self.theta))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.unit * (self.alpha - z) / (1 - np.conj(self.alpha) * z)

    def derivative(self, z, k: int = 1):
        """``phi^{(k)}(z)`` for ``k >= 1``."""
        z = np.asarray(z, dtype=complex)
        ab = np.conj(self.alpha)
        return (self.unit * (abs(self.alpha) ** 2 - 1) * math.factorial(k) * ab ** (k - 1)
                / (1 - ab * z) ** (k + 1))

    @classmethod
    def from_zero_and_slope(cls, zero: complex, slope0: complex) -> "MobiusElement":
        """The element vanishing at ``zero`` with derivative ``slope0`` at the origin."""
        zero = complex(zero)
        u = slope0 / (abs(zero) ** 2 - 1)
        return cls(zero, float(np.angle(u)))

    def inverse(self) -> "MobiusElement":
        return MobiusElement(self.unit * self.alpha, -self.theta)

    def compose(self, other: "MobiusElement") -> "MobiusElement":
        """``self o other``."""
        zero = other.inverse()(self.alpha)
        slope0 = self.derivative(other(0.0)) * other.derivative(0.0)
        return MobiusElement.from_zero_and_slope(complex(zero), complex(slope0))

    def conjugate(self) -> "MobiusElement":
        """``z -> conj(phi(conj z))``."""
        return MobiusElement(np.conj(self.alpha), -self.theta)

    def series(self, N: int) -> np.ndarray:
        return mobius_series(self.alpha, self.theta, N)

    @property
    def is_involution(self) -> bool:
        return self.theta == 0.0

    @property
    def is_rotation(self) -> bool:
        return self.alpha == 0


# ---------------------------------------------------------------- series helpers

def series_inverse(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f[0] == 0:
        raise ZeroDivisionError("series with zero constant term is not invertible")
    h = np.zeros_like(f)
    h[0] = 1.0 / f[0]
    for k in range(1, f.size):
        h[k] = -np.dot(f[1:k + 1], h[k - 1::-1]) / f[0]
    return h


def series_compose_poly(p, f: np.ndarray) -> np.ndarray:
    """``p o f`` for a polynomial ``p`` and a power series ``f`` (same length as ``f``)."""
    N = f.size
    out = np.zeros(N, dtype=complex)
    for c in np.asarray(p, dtype=complex)[::-1]:
        out = series_mul(out, f, N)
        out[0] += c
    return out


def _mobius_taylor_series(phi: MobiusElement, f: np.ndarray, k: int) -> np.ndarray:
    """Series of ``phi^{(k)}(f) / k!`` for a power series ``f`` with ``|f(0)| < 1``."""
    N = f.size
    ab = np.conj(phi.alpha)
    den = -ab * f
    den[0] += 1.0
    inv = series_inverse(den)
    if k == 0:
        num = -f.copy()
        num[0] += phi.alpha
        return phi.unit * series_mul(num, inv, N)
    out = np.zeros(N, dtype=complex)
    out[0] = 1.0
    for _ in range(k + 1):
        out = series_mul(out, inv, N)
    return phi.unit * (abs(phi.alpha) ** 2 - 1) * ab ** (k - 1) * out


def _symbol_matmul(P: Dict, Q: Dict, n: int, N: int) -> Dict:
    out = {}
    for i in range(1, n + 1):
        for k in range(i, n + 1):
            acc = np.zeros(N, dtype=complex)
            hit = False
            for j in range(i, k + 1):
                if (i, j) in P and (j, k) in Q:
                    acc = acc + series_mul(P[(i, j)], Q[(j, k)], N)
                    hit = True
            if hit:
                out[(i, k)] = acc
    return out


# ---------------------------------------------------------------- Mobius image

@dataclass(frozen=True, eq=False)
class MobiusImage:
    """``phi(T)`` by two routes for a bidiagonal ``T``.

    ``symbols[(i, j)]`` are power series ``u`` with block ``(i, j)`` of the
    image equal to ``u(T_ii) C_ij``; ``rational`` is the resolvent evaluation of
    the assembled matrix and ``structured`` the blockwise expansion.
    """

    base: FlagOperator
    element: MobiusElement
    symbols: Dict[Tuple[int, int], np.ndarray]
    blocks: Dict[Tuple[int, int], np.ndarray]
    structured: np.ndarray
    rational: np.ndarray
    agreement: float
    corner: int

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def sizes(self) -> List[int]:
        return self.base.sizes

    @property
    def assembled(self) -> np.ndarray:
        return self.rational

    def block(self, i: int, j: int) -> np.ndarray:
        return self.blocks[(i, j)]


def _require_bidiagonal(T: FlagOperator) -> None:
    if not T.is_ofb or T.higher:
        raise ValueError("operator must be bidiagonal (no entries above the superdiagonal)")


def _eval_symbol(T: FlagOperator, i: int, j: int, u: np.ndarray) -> np.ndarray:
    u = trim_poly(u, 1e-300)
    return poly_of_matrix(u, T.block(i, i)) @ T.chain(i, j)


def mobius_of_flag(T, phi: MobiusElement, corner: Optional[int] = None,
                   tol: float = AGREEMENT_TOL) -> MobiusImage:
    """``phi(T)`` from the resolvent and from the block expansion, cross-checked.

    For a bidiagonal ``T`` block ``(i, i + k)`` of ``phi(T)`` is
    ``phi^{(k)}(T_ii)/k!`` times the coupling chain.  A :class:`MobiusImage` is
    accepted as input too (the group acts on its symbols).

    Raises
    ------
    ConsistencyError
        If the two routes differ by more than ``tol`` (relative, compressed corner).
    """
    if isinstance(T, MobiusImage):
        base, prev = T.base, T
        source = T.rational
    else:
        _require_bidiagonal(T)
        base, prev = T, None
        source = T.assembled
    n, N = base.n, max(base.sizes)
    rational = mobius_calculus(source, phi.alpha, phi.theta)
    if prev is None:
        blocks = {}
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                blocks[(i, j)] = mobius_taylor(base.block(i, i), phi.alpha, phi.theta, j - i) @ base.chain(i, j)
        s = np.zeros(N, dtype=complex)
        if N > 1:
            s[1] = 1.0
        symbols = {(i, j): _mobius_taylor_series(phi, s, j - i)
                   for i in range(1, n + 1) for j in range(i, n + 1)}
    else:
        # phi(f I + M) = sum_k phi^{(k)}(f)/k! M^k with M strictly upper
        f = prev.symbols[(1, 1)]
        M = {k: v for k, v in prev.symbols.items() if k[0] < k[1]}
        I = {(i, i): np.eye(1, N, dtype=complex)[0] for i in range(1, n + 1)}
        symbols: Dict = {}
        P = I
        for k in range(n):
            c = _mobius_taylor_series(phi, f, k)
            for key, v in P.items():
                symbols[key] = symbols.get(key, 0) + series_mul(c, v, N)
            P = _symbol_matmul(P, M, n, N)
        blocks = {key: _eval_symbol(base, key[0], key[1], v) for key, v in symbols.items()}
    structured = assemble_blocks(blocks, base.sizes)
    d = base.degree_budget() if corner is None else int(corner)
    idx = block_corner_index(base.sizes, d)
    diff = spectral_norm((structured - rational)[np.ix_(idx, idx)])
    agree = diff / max(spectral_norm(rational), 1e-300)
    if not agree < tol:
        raise ConsistencyError(f"block expansion and resolvent differ by {agree:.3g}", agree)
    return MobiusImage(base, phi, symbols, blocks, structured, rational, agree, d)


# ---------------------------------------------------------------- certificate

@dataclass(frozen=True)
class SymbolCertificate:
    level: int
    coeffs: Tuple[complex, ...]
    roots: Tuple[complex, ...]
    min_root_modulus: float
    grid_min_modulus: float
    closed_form_roots: bool
    verdict: str              # non-vanishing, interior-root, boundary-root
    diagnosis: str


@dataclass(frozen=True)
class WeakHomCertificate:
    symbols: Tuple[SymbolCertificate, ...]
    verdict: str              # weakly-homogeneous, not-weakly-homogeneous
    assumptions: Tuple[str, ...]
    witness_residual: Optional[float] = None
    witness_note: str = ""

    @property
    def positive(self) -> bool:
        return self.verdict == "weakly-homogeneous"

    @property
    def offending_levels(self) -> List[int]:
        return [s.level for s in self.symbols if s.verdict != "non-vanishing"]


ASSUMED = ("multiplier algebra of every block space equals the bounded analytic functions",
           "every block space is invariant under disc automorphisms")


def _roots(c: np.ndarray) -> Tuple[np.ndarray, bool]:
    deg = c.size - 1
    if deg == 0:
        return np.zeros(0, dtype=complex), True
    if deg == 1:
        return np.array([-c[0] / c[1]]), True
    if deg == 2:
        a, b, e = c[2], c[1], c[0]
        disc = np.sqrt(b * b - 4 * a * e + 0j)
        q = -0.5 * (b + (disc if np.real(np.conj(b) * disc) >= 0 else -disc))
        if q == 0:
            return np.zeros(2, dtype=complex), True
        return np.array([q / a, e / q]), True
    return np.roots(c[::-1]), False


def _closed_disc_min(c: np.ndarray, density: int) -> float:
    r = np.linspace(0.0, 1.0, density + 1)
    a = np.linspace(0.0, 2 * np.pi, 4 * density, endpoint=False)
    z = r[:, None] * np.exp(1j * a[None, :])
    return float(np.min(np.abs(np.polyval(c[::-1], z))))


def certify_symbol(level: int, coeffs, density: int = 64) -> SymbolCertificate:
    c = trim_poly(np.asarray(coeffs, dtype=complex))
    if np.all(c == 0):
        raise ValueError(f"coupling symbol at level {level} is the zero polynomial")
    roots, exact = _roots(c)
    mods = np.abs(roots)
    mn = float(mods.min()) if mods.size else math.inf
    inner = mods[mods < 1 - BOUNDARY_TOL]
    edge = mods[(mods >= 1 - BOUNDARY_TOL) & (mods <= 1 + BOUNDARY_TOL)]
    if inner.size:
        verdict = "interior-root"
        diag = f"symbol vanishes inside the disc (root modulus {inner.min():.6g})"
    elif edge.size:
        verdict = "boundary-root"
        diag = "symbol vanishes on the unit circle (root modulus 1)"
    else:
        verdict = "non-vanishing"
        diag = "all roots outside the closed disc" if mods.size else "non-zero constant"
    return SymbolCertificate(level, tuple(complex(x) for x in c), tuple(complex(x) for x in roots),
                             mn, _closed_disc_min(c, density), exact, verdict, diag)


def _coupling_polys(T: FlagOperator) -> List[np.ndarray]:
    syms = list(T.coupling_symbols) or [None] * (T.n - 1)
    out = []
    for i, s in enumerate(syms, start=1):
        if s is None:
            raise ValueError(f"coupling at level {i} is not given by a polynomial symbol")
        out.append(np.asarray(s, dtype=complex))
    return out


def weakhom_certificate(T: FlagOperator, density: int = 64) -> WeakHomCertificate:
    """Decide zero-freeness of every coupling symbol on the closed disc from its roots.

    A root with modulus within ``1e-9`` of 1 counts as a zero on the circle.  The
    grid minimum of ``|psi|`` over the closed disc is reported as corroboration.

    Raises
    ------
    ValueError
        A symbol is the zero polynomial or is not given as a polynomial.
    """
    certs = tuple(certify_symbol(i, c, density) for i, c in enumerate(_coupling_polys(T), start=1))
    ok = all(c.verdict == "non-vanishing" for c in certs)
    return WeakHomCertificate(certs, "weakly-homogeneous" if ok else "not-weakly-homogeneous", ASSUMED)


# ---------------------------------------------------------------- witness

@dataclass(frozen=True, eq=False)
class WeakHomWitness:
    """``X`` with ``X phi(T) = T X``, assembled from three factors.

    ``W`` is block diagonal with ``W T = T' W`` (``T'`` the bidiagonal part of
    ``phi(T)``), ``Y`` is unipotent with ``Y T' = phi(T) Y`` and ``X = (Y W)^{-1}``.
    """

    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    residual: float
    factor_residuals: Dict[str, float]
    corner: int
    element: MobiusElement
    provenance: str = "composition and multiplication operators after unipotent reduction"


def _tilde(c: np.ndarray) -> np.ndarray:
    # coefficients of z -> conj(f(conj z))
    return np.conj(np.asarray(c, dtype=complex))


def _frame_factors(T: FlagOperator, phi: MobiusElement, N: int) -> List[np.ndarray]:
    """Series ``g_i`` with ``W_i K_i(., conj w) = g_i(w) K_i(., conj chi(w))``, ``chi = phi^{-1}``.

    The coupling relation forces ``g_i = g_{i+1} psi~(chi) phi'(chi) / psi~`` with
    ``psi~(w) = conj(psi(conj w))`` and ``g_n = 1``.
    """
    chi = phi.inverse()
    chi_s = chi.series(N)
    # phi'(chi(w)) = 1 / chi'(w) = (1 - conj(a) w)^2 / (e^{i t}(|a|^2 - 1))
    ab = np.conj(chi.alpha)
    dphi_chi = np.zeros(N, dtype=complex)
    dphi_chi[: min(3, N)] = np.array([1.0, -2 * ab, ab * ab])[: min(3, N)]
    dphi_chi /= chi.unit * (abs(chi.alpha) ** 2 - 1)
    g = [None] * T.n
    g[-1] = np.eye(1, N, dtype=complex)[0]
    for i, psi in reversed(list(enumerate(_coupling_polys(T)))):
        pt = _tilde(trim_poly(psi))
        num = series_mul(series_compose_poly(pt, chi_s), dphi_chi, N)
        den = np.zeros(N, dtype=complex)
        den[: pt.size] = pt
        g[i] = series_mul(g[i + 1], series_mul(num, series_inverse(den), N), N)
    return g


def weakhom_witness(T: FlagOperator, phi: MobiusElement, corner: Optional[int] = None,
                    tol: float = WITNESS_TOL) -> WeakHomWitness:
    """Similarity ``X`` with ``X phi(T) = T X`` for a bidiagonal operator on kernel spaces.

    The residual ``||X phi(T) - T X|| / (||X|| ||T||)`` is measured on the corner
    compressed by a quarter of the truncation, because composition operators are
    full matrices whose truncation error sits in the trailing rows and columns.

    Raises
    ------
    CertificateRefused
        When the certificate is negative.
    ConsistencyError
        Residual above ``tol``; the certificate itself is not revoked.
    """
    _require_bidiagonal(T)
    cert = weakhom_certificate(T)
    if not cert.positive:
        raise CertificateRefused(
            f"coupling symbols vanish on the closed disc at levels {cert.offending_levels}")
    n, sizes = T.n, T.sizes
    N = max(sizes)
    img = mobius_of_flag(T, phi)

    # block-diagonal factor: W_i = (M_{g~_i} C_{chi~})^*, inverse (C_{phi~} M_{1/g~_i})^*
    g = _frame_factors(T, phi, N)
    chi_t = phi.inverse().conjugate()
    phi_t = phi.conjugate()
    Wb, Wib = {}, {}
    for i, sp in enumerate(T.spaces, start=1):
        gi = _tilde(g[i - 1])[: sp.N]
        Cc = composition_op(sp, chi_t.alpha, chi_t.theta).entries
        Cp = composition_op(sp, phi_t.alpha, phi_t.theta).entries
        Wb[(i, i)] = (multiplier(sp, sp, gi).entries @ Cc).conj().T
        Wib[(i, i)] = (Cp @ multiplier(sp, sp, series_inverse(gi)).entries).conj().T
    W = assemble_blocks(Wb, sizes)
    W_inv = assemble_blocks(Wib, sizes)

    # unipotent factor in the symbol ring: rescale the superdiagonal phi' to 1
    p = img.symbols[(1, 2)] if n > 1 else None
    # when phi(T) is already bidiagonal the unipotent factor is the identity
    bidiagonal = all(not np.any(u) for (i, j), u in img.symbols.items() if j - i >= 2)
    if n > 1 and not bidiagonal:
        pinv = series_inverse(p)
        phis = {}
        for (i, j), u in img.symbols.items():
            if j - i >= 2:
                v = u
                for _ in range(j - i):
                    v = series_mul(v, pinv, N)
                phis[(i, j)] = v
        xs = solve_symbols(phis, n, N)
        Yb = {}
        for (i, j), x in xs.items():
            y = x
            for _ in range(j - i):
                y = series_mul(y, p, N)
            Yb[(i, j)] = _eval_symbol(T, i, j, y)
        Y = assemble_blocks(Yb, sizes, identity=True)
        Y_inv = invert_unipotent(Y, sizes)
    else:
        Y = Y_inv = np.eye(sum(sizes), dtype=complex)

    d = N // 4 if corner is None else int(corner)
    idx = block_corner_index(sizes, d)
    A, P = T.assembled, img.rational
    Tp = A.copy()
    off = np.concatenate(([0], np.cumsum(sizes))).astype(int)
    for i in range(1, n + 1):
        for j in range(i, min(i + 1, n) + 1):
            Tp[off[i - 1]:off[i], off[j - 1]:off[j]] = img.blocks[(i, j)]

    def rel(M, L, R):
        R_ = (M @ L - R @ M)[np.ix_(idx, idx)]
        return spectral_norm(R_) / max(spectral_norm(M) * max(spectral_norm(L), spectral_norm(R)), 1e-300)

    X = W_inv @ Y_inv
    res = rel(X, P, A)
    # a product of two truncated composition operators is only reliable on a
    # leading block that shrinks like (1 - |alpha|) / (1 + |alpha|)
    a = abs(phi.alpha)
    inner = block_corner_index(sizes, N - max(int(N * (1 - a) / (2 * (1 + a))), 1))
    factors = {"block_diagonal": rel(W, A, Tp), "unipotent": rel(Y, Tp, P),
               "inverse": spectral_norm((W @ W_inv - np.eye(W.shape[0]))[np.ix_(inner, inner)])}
    if not res < tol:
        raise ConsistencyError(f"witness residual {res:.3g} exceeds {tol:g} (truncation shortfall)", res)
    return WeakHomWitness(X, W, Y, res, factors, d, phi)
