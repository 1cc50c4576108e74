"""Truncated operator matrices and block flag operators.

Every matrix is stored in orthonormal coordinates of its kernel spaces, so the
adjoint is the conjugate transpose.  Backward shifts and adjoint multipliers are
upper triangular in this basis; compressing an upper-triangular infinite matrix
to its leading corner is multiplicative, which is why most identities below hold
to machine precision at truncation.  Identities that involve composition
operators are checked on a leading corner (see :func:`corner`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .kernel_space import DimensionError, DomainError, KernelSpace

PSD_TOL = 1e-10
FLAG_TOL = 1e-10


class FlagViolation(ValueError):
    """The block data does not define a flag operator."""

    def __init__(self, message: str, residual: float = float("nan"), level: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.level = level


class NotHypercontractionError(ValueError):
    """The alternating defect sum is not positive semidefinite."""

    def __init__(self, order: int, min_eig: float):
        super().__init__(
            f"defect sum of order {order} is not positive semidefinite "
            f"(most negative eigenvalue {min_eig:.6g})")
        self.order = order
        self.min_eig = min_eig


class SingularityError(ArithmeticError):
    """A resolvent that must exist could not be formed."""


# ---------------------------------------------------------------- matrices

@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A truncated operator ``domain -> codomain`` in orthonormal coordinates."""

    entries: np.ndarray
    domain: KernelSpace
    codomain: KernelSpace

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex, copy=True)
        if e.shape != (self.codomain.N, self.domain.N):
            raise DimensionError(
                f"entries have shape {e.shape}, expected "
                f"({self.codomain.N}, {self.domain.N})")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.codomain, self.domain)

    @property
    def H(self) -> "OperatorMatrix":
        return self.adjoint()

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries, other.domain, self.codomain)
        return self.entries @ np.asarray(other)

    def scaled(self, c: complex) -> "OperatorMatrix":
        return OperatorMatrix(c * self.entries, self.domain, self.codomain)

    def norm(self) -> float:
        return spectral_norm(self.entries)

    def apply_monomial(self, coeffs) -> np.ndarray:
        """Apply to a vector given in monomial coordinates; result in monomial coordinates."""
        x = self.domain.to_orthonormal(coeffs)
        return self.codomain.to_monomial(self.entries @ x)


def spectral_norm(M: np.ndarray) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def corner(M: np.ndarray, d: int) -> np.ndarray:
    """Leading ``(rows - d) x (cols - d)`` block; truncation corrupts the trailing ``d``."""
    d = max(int(d), 0)
    r, c = M.shape
    return M[: max(r - d, 0), : max(c - d, 0)]


def block_corner_index(sizes: Sequence[int], d: int) -> np.ndarray:
    """Indices of the leading ``N_i - d`` coordinates of every block of a direct sum."""
    idx = []
    start = 0
    for n in sizes:
        idx.extend(range(start, start + max(n - d, 0)))
        start += n
    return np.asarray(idx, dtype=int)


def poly_of_matrix(coeffs, M: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_k c_k M^k`` by Horner's rule."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    n = M.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for ck in c[::-1]:
        out = out @ M
        out[np.diag_indices(n)] += ck
    return out


def trim_poly(coeffs, tol: float = 0.0) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    nz = np.nonzero(np.abs(c) > tol)[0]
    return c[: nz[-1] + 1] if nz.size else c[:1] * 0


# ---------------------------------------------------------------- basic operators

def backward_shift(space: KernelSpace) -> OperatorMatrix:
    """``M_z^*``: ``e_{k+1} -> sqrt(a_k / a_{k+1}) e_k`` and ``e_0 -> 0``."""
    if space.N < 2:
        raise DimensionError("backward shift needs truncation >= 2")
    a = space.a
    B = np.zeros((space.N, space.N), dtype=complex)
    B[np.arange(space.N - 1), np.arange(1, space.N)] = np.sqrt(a[:-1] / a[1:])
    return OperatorMatrix(B, space, space)


def multiplier(from_space: KernelSpace, to_space: KernelSpace, psi) -> OperatorMatrix:
    """Matrix of multiplication by the polynomial ``psi`` from one space into another.

    Entry ``(j + m, j)`` is ``psi_m sqrt(a^from_j / a^to_{j+m})``; products landing
    beyond the codomain truncation are dropped.  Infinite-dimensional boundedness
    is not certified here.
    """
    c = np.atleast_1d(np.asarray(psi, dtype=complex))
    if c.size > min(from_space.N, to_space.N):
        raise DimensionError("symbol degree must be below both truncations")
    M = np.zeros((to_space.N, from_space.N), dtype=complex)
    af, at = from_space.a, to_space.a
    for m, cm in enumerate(c):
        if cm == 0:
            continue
        j = np.arange(0, min(from_space.N, to_space.N - m))
        M[j + m, j] = cm * np.sqrt(af[j] / at[j + m])
    return OperatorMatrix(M, from_space, to_space)


def mobius_series(alpha: complex, theta: float, N: int) -> np.ndarray:
    """Taylor coefficients of ``e^{i theta} (alpha - z) / (1 - conj(alpha) z)`` up to ``z^{N-1}``."""
    alpha = complex(alpha)
    if abs(alpha) >= 1:
        raise DomainError(f"|alpha| must be < 1, got {abs(alpha)}")
    u = np.exp(1j * theta)
    c = np.empty(N, dtype=complex)
    c[0] = u * alpha
    if N > 1:
        m = np.arange(1, N)
        c[1:] = u * (abs(alpha) ** 2 - 1) * np.conj(alpha) ** (m - 1)
    return c


def series_mul(f: np.ndarray, g: np.ndarray, N: int) -> np.ndarray:
    return np.convolve(f[:N], g[:N])[:N]


def composition_op(space: KernelSpace, alpha: complex, theta: float = 0.0) -> OperatorMatrix:
    """``C_phi f = f o phi`` for the disc automorphism with parameters ``(alpha, theta)``.

    Column ``k`` holds the orthonormal coordinates of ``sqrt(a_k) phi^k``.
    """
    N = space.N
    phi = mobius_series(alpha, theta, N)
    C = np.zeros((N, N), dtype=complex)
    power = np.zeros(N, dtype=complex)
    power[0] = 1.0
    for k in range(N):
        C[:, k] = power
        power = series_mul(power, phi, N)
    sa = space.sqrt_a
    C = C * (sa[None, :] / sa[:, None])
    return OperatorMatrix(C, space, space)


# ---------------------------------------------------------------- Mobius calculus

def _as_array(T) -> np.ndarray:
    if isinstance(T, OperatorMatrix):
        return T.entries
    if isinstance(T, FlagOperator):
        return T.assembled
    return np.asarray(T, dtype=complex)


def _rewrap(T, M: np.ndarray):
    if isinstance(T, OperatorMatrix):
        return OperatorMatrix(M, T.domain, T.codomain)
    return M


def _resolvent(A: np.ndarray, alpha: complex):
    n = A.shape[0]
    try:
        lu = sla.lu_factor(np.eye(n) - np.conj(alpha) * A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularityError(str(exc)) from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-300):
        raise SingularityError("I - conj(alpha) T is singular")
    return lu


def mobius_taylor(T, alpha: complex, theta: float, k: int):
    """``phi^{(k)}(T) / k!`` for ``phi(z) = e^{i theta}(alpha - z)/(1 - conj(alpha) z)``.

    For ``k >= 1`` this is ``e^{i theta} (|alpha|^2 - 1) conj(alpha)^{k-1} (I - conj(alpha) T)^{-(k+1)}``.
    """
    A = _as_array(T)
    n = A.shape[0]
    u = np.exp(1j * theta)
    lu = _resolvent(A, alpha)
    if k == 0:
        M = u * sla.lu_solve(lu, alpha * np.eye(n) - A)
        return _rewrap(T, M)
    R = sla.lu_solve(lu, np.eye(n, dtype=complex))
    Rp = np.linalg.matrix_power(R, k + 1)
    M = u * (abs(alpha) ** 2 - 1) * np.conj(alpha) ** (k - 1) * Rp
    return _rewrap(T, M)


def mobius_calculus(T, alpha: complex, theta: float = 0.0, order: int = 0):
    """``phi(T)``, ``phi'(T)`` or ``phi''(T)`` by exact rational evaluation.

    Parameters
    ----------
    T : OperatorMatrix, FlagOperator or ndarray
        Square operator with ``I - conj(alpha) T`` invertible.
    order : {0, 1, 2}

    Returns
    -------
    Same kind as ``T`` for operator matrices; a plain array otherwise.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    out = mobius_taylor(T, alpha, theta, order)
    if order == 2:
        out = _rewrap(T, 2.0 * _as_array(out))
    return out


# ---------------------------------------------------------------- hypercontractions

def defect_sum(T, k: int) -> np.ndarray:
    """``sum_j (-1)^j C(k, j) T*^j T^j``."""
    A = _as_array(T)
    n = A.shape[0]
    out = np.zeros((n, n), dtype=complex)
    P = np.eye(n, dtype=complex)
    for j in range(k + 1):
        out += (-1) ** j * math.comb(k, j) * (P.conj().T @ P)
        P = A @ P
    return 0.5 * (out + out.conj().T)


def _psd_sqrt(S: np.ndarray, order: int, d: int = 0) -> np.ndarray:
    ev, V = np.linalg.eigh(S)
    check = np.linalg.eigvalsh(corner(S, d)) if d else ev
    lo = float(check.min()) if check.size else 0.0
    if lo < -PSD_TOL:
        raise NotHypercontractionError(order, lo)
    return (V * np.sqrt(np.clip(ev, 0.0, None))) @ V.conj().T


def defect_operator(T, k: int):
    """Positive square root of the order-``k`` defect sum.

    Raises
    ------
    NotHypercontractionError
        When the sum has an eigenvalue below ``-1e-10``; carries that eigenvalue.
    """
    if k < 0:
        raise ValueError("order must be non-negative")
    D = _psd_sqrt(defect_sum(T, k), k)
    return _rewrap(T, D)


def hypercontraction_order(T, max_k: int = 8, compress: bool = True) -> int:
    """Largest ``m <= max_k`` with every defect sum of order ``1..m`` positive semidefinite.

    Each order-``k`` sum is tested on the corner compressed by ``k``.
    """
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    m = 0
    for k in range(1, max_k + 1):
        S = defect_sum(T, k)
        S = corner(S, k) if compress else S
        if S.size and np.linalg.eigvalsh(S).min() < -PSD_TOL:
            break
        m = k
    return m


@dataclass(frozen=True)
class AglerEmbedding:
    """Sequence ``f_k = D_m T^k x`` with the weights ``C(m + k - 1, k)``."""

    vectors: np.ndarray          # shape (K, N), same coordinates as the input
    weights: np.ndarray
    weighted_norm_sq: float
    input_norm_sq: float

    @property
    def defect(self) -> float:
        return abs(self.weighted_norm_sq - self.input_norm_sq)


def agler_embedding(T: OperatorMatrix, m: int, x, coords: str = "monomial",
                    length: Optional[int] = None) -> AglerEmbedding:
    """Embed ``x`` as ``{D_m T^k x}_k``; isometric for ``m``-hypercontractions.

    Parameters
    ----------
    coords : {"monomial", "orthonormal"}
        Coordinate system of ``x`` and of the returned vectors.
    """
    space = T.domain
    if coords == "monomial":
        v = space.to_orthonormal(x)
    elif coords == "orthonormal":
        v = np.asarray(x, dtype=complex)
    else:
        raise ValueError(f"unknown coordinate system {coords!r}")
    D = defect_operator(T.entries, m)
    K = space.N if length is None else int(length)
    out = np.zeros((K, space.N), dtype=complex)
    y = v.copy()
    for k in range(K):
        out[k] = D @ y
        y = T.entries @ y
    wts = np.array([math.comb(m + k - 1, k) for k in range(K)], dtype=float)
    wn = float(np.sum(wts * np.sum(np.abs(out) ** 2, axis=1)))
    if coords == "monomial":
        out = np.array([space.to_monomial(f) for f in out])
    return AglerEmbedding(out, wts, wn, float(np.vdot(v, v).real))


# ---------------------------------------------------------------- flag operators

ConditionAData = Dict[Tuple[int, int], np.ndarray]


def normalize_condition_a(data, n: int) -> ConditionAData:
    """Validate Condition (A) polynomials keyed by 1-based ``(i, j)`` with ``j - i >= 2``."""
    out: ConditionAData = {}
    for key, coeffs in (data or {}).items():
        i, j = (int(t) for t in key)
        if not (1 <= i and j <= n and j - i >= 2):
            raise FlagViolation(f"condition (A) key ({i},{j}) needs 1 <= i, j <= {n}, j - i >= 2")
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise FlagViolation(f"condition (A) entry ({i},{j}) must be a coefficient list")
        out[(i, j)] = c
    return dict(sorted(out.items()))


@dataclass(frozen=True, eq=False)
class FlagOperator:
    """Block upper-triangular operator with flag structure.

    Levels are 1-based: ``block(i, j)`` is ``T_{i,j}`` and ``couplings[i-1]`` is
    ``T_{i,i+1}``.  ``frame_seed`` is a matrix ``Q`` with ``t_n(w) = Q @ (w^k)_k`` a
    holomorphic eigen-section of the last diagonal block (orthonormal coordinates).
    """

    spaces: Tuple[KernelSpace, ...]
    diagonals: Tuple[OperatorMatrix, ...]
    couplings: Tuple[OperatorMatrix, ...]
    condition_a: ConditionAData
    higher: Dict[Tuple[int, int], OperatorMatrix]
    frame_seed: np.ndarray
    coupling_symbols: Tuple[Optional[np.ndarray], ...] = ()
    _assembled: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.diagonals)

    @property
    def sizes(self) -> List[int]:
        return [s.N for s in self.spaces]

    @property
    def offsets(self) -> List[int]:
        return list(np.concatenate(([0], np.cumsum(self.sizes)))[:-1].astype(int))

    @property
    def is_ofb(self) -> bool:
        return not self.condition_a

    def block(self, i: int, j: int) -> np.ndarray:
        """``T_{i,j}`` as an array (zero block when absent)."""
        if j == i:
            return self.diagonals[i - 1].entries
        if j == i + 1:
            return self.couplings[i - 1].entries
        if (i, j) in self.higher:
            return self.higher[(i, j)].entries
        return np.zeros((self.sizes[i - 1], self.sizes[j - 1]), dtype=complex)

    def chain(self, i: int, j: int) -> np.ndarray:
        """``T_{i,i+1} T_{i+1,i+2} ... T_{j-1,j}`` (identity when ``i == j``)."""
        M = np.eye(self.sizes[i - 1], dtype=complex)
        for k in range(i, j):
            M = M @ self.couplings[k - 1].entries
        return M

    @property
    def assembled(self) -> np.ndarray:
        if self._assembled is None:
            off = self.offsets + [sum(self.sizes)]
            A = np.zeros((off[-1], off[-1]), dtype=complex)
            for i in range(1, self.n + 1):
                for j in range(i, self.n + 1):
                    A[off[i - 1]:off[i], off[j - 1]:off[j]] = self.block(i, j)
            A.setflags(write=False)
            object.__setattr__(self, "_assembled", A)
        return self._assembled

    def norm(self) -> float:
        return spectral_norm(self.assembled)

    def split(self, v: np.ndarray) -> List[np.ndarray]:
        off = self.offsets + [sum(self.sizes)]
        return [v[off[i]:off[i + 1]] for i in range(self.n)]

    def degree_budget(self) -> int:
        """Total monomial degree carried by polynomial data (corner size for checks)."""
        d = 0
        for s in self.coupling_symbols:
            d += 0 if s is None else max(len(trim_poly(s)) - 1, 0)
        for c in self.condition_a.values():
            d += max(len(trim_poly(c)) - 1, 0)
        return d + 1


def _coerce_coupling(spec, src: KernelSpace, dst: KernelSpace) -> Tuple[OperatorMatrix, Optional[np.ndarray]]:
    # a coupling T_{i,i+1} maps space i+1 into space i; multiplier symbols act i -> i+1
    if isinstance(spec, OperatorMatrix):
        return OperatorMatrix(spec.entries, src, dst), None
    arr = np.asarray(spec, dtype=complex)
    if arr.ndim == 2:
        return OperatorMatrix(arr, src, dst), None
    psi = np.atleast_1d(arr)
    return multiplier(dst, src, psi).adjoint(), psi


def kernel_frame_seed(space: KernelSpace) -> np.ndarray:
    """``K(., conj w) = sum_k sqrt(a_k) w^k e_k``: the seed is ``diag(sqrt(a_k))``."""
    return np.diag(space.sqrt_a).astype(complex)


def krylov_frame_seed(T: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Seed ``[v, Rv, R^2 v, ...]`` with ``v`` spanning ``ker T`` and ``R`` a right inverse.

    Then ``(T - w) sum_k w^k R^k v = 0`` up to the truncation tail.  Used for
    diagonal blocks that are not given as plain shifts on a kernel space.
    """
    T = np.asarray(T, dtype=complex)
    U, s, Vh = np.linalg.svd(T)
    if s[-1] > tol * max(s[0], 1.0):
        raise FlagViolation("diagonal block has trivial kernel at 0; cannot seed a frame")
    v = Vh[-1].conj()
    # fix the phase so that the seed is deterministic
    p = np.argmax(np.abs(v))
    v = v * (abs(v[p]) / v[p])
    R = np.linalg.pinv(T, rcond=tol)
    N = T.shape[0]
    Q = np.zeros((N, N), dtype=complex)
    x = v
    for k in range(N):
        Q[:, k] = x
        x = R @ x
    return Q


def assemble_flag(diagonals: Sequence[KernelSpace], couplings: Sequence = (),
                  condition_a=None, check: bool = True,
                  diagonal_matrices: Optional[Sequence[np.ndarray]] = None,
                  frame_seed: Optional[np.ndarray] = None) -> FlagOperator:
    """Build ``T`` with ``T_{i,i} = M_z^*`` on each space and the given couplings.

    Parameters
    ----------
    diagonals : list of KernelSpace
    couplings : list
        Each entry is a polynomial symbol ``psi`` (then ``T_{i,i+1} = M_psi^*`` with
        ``M_psi : H_i -> H_{i+1}``) or an explicit matrix ``H_{i+1} -> H_i``.
    condition_a : dict, optional
        ``{(i, j): coeffs}`` giving ``T_{i,j} = phi_{i,j}(T_{i,i}) T_{i,i+1} ... T_{j-1,j}``.
    diagonal_matrices : list of arrays, optional
        Replace the backward shifts (used for conjugated copies).

    Raises
    ------
    FlagViolation
        Zero coupling, or an intertwining residual above ``1e-10`` on the compressed corner.
    """
    spaces = tuple(diagonals)
    n = len(spaces)
    if n < 1:
        raise FlagViolation("need at least one diagonal block")
    if len(couplings) != n - 1:
        raise FlagViolation(f"{n} blocks need {n - 1} couplings, got {len(couplings)}")
    if diagonal_matrices is None:
        diags = tuple(backward_shift(s) for s in spaces)
    else:
        diags = tuple(OperatorMatrix(D, s, s) for D, s in zip(diagonal_matrices, spaces))
    cpl, syms = [], []
    for i, spec in enumerate(couplings):
        op, sym = _coerce_coupling(spec, spaces[i + 1], spaces[i])
        cpl.append(op)
        syms.append(sym)
    cond = normalize_condition_a(condition_a, n)
    higher = {}
    for (i, j), c in cond.items():
        M = poly_of_matrix(c, diags[i - 1].entries)
        for k in range(i, j):
            M = M @ cpl[k - 1].entries
        higher[(i, j)] = OperatorMatrix(M, spaces[j - 1], spaces[i - 1])
    if frame_seed is None:
        frame_seed = (kernel_frame_seed(spaces[-1]) if diagonal_matrices is None
                      else krylov_frame_seed(diags[-1].entries))
    T = FlagOperator(spaces, diags, tuple(cpl), cond, higher,
                     np.asarray(frame_seed, dtype=complex), tuple(syms))
    if check:
        rep = verify_flag(T)
        for lvl, nz in enumerate(rep.nonzero, start=1):
            if not nz:
                raise FlagViolation(f"coupling T_{{{lvl},{lvl + 1}}} is zero", 0.0, lvl)
        for lvl, r in enumerate(rep.intertwining, start=1):
            if not r < FLAG_TOL:
                raise FlagViolation(
                    f"coupling T_{{{lvl},{lvl + 1}}} does not intertwine "
                    f"(residual {r:.3g})", r, lvl)
    return T


@dataclass(frozen=True)
class FlagReport:
    """Structural residuals of a flag operator (all on compressed corners)."""

    intertwining: List[float]
    nonzero: List[bool]
    condition_a: Dict[Tuple[int, int], float]
    commutators: Dict[Tuple[int, int], float]
    tolerance: float = FLAG_TOL

    @property
    def ok(self) -> bool:
        return (all(self.nonzero)
                and all(r < self.tolerance for r in self.intertwining)
                and all(r < self.tolerance for r in self.condition_a.values())
                and all(r < self.tolerance for r in self.commutators.values()))


def _rel(num: float, den: float) -> float:
    return num / den if den > 0 else num


def verify_flag(T: FlagOperator) -> FlagReport:
    """Per-coupling intertwining residuals, non-zero flags and Condition (A) residuals.

    Residuals are relative spectral norms on the corner compressed by the
    coupling's symbol degree plus one.
    """
    inter, nonzero = [], []
    for i in range(1, T.n):
        C = T.block(i, i + 1)
        sym = T.coupling_symbols[i - 1] if T.coupling_symbols else None
        d = 1 + (0 if sym is None else max(len(trim_poly(sym)) - 1, 0))
        R = T.block(i, i) @ C - C @ T.block(i + 1, i + 1)
        scale = spectral_norm(C) * max(spectral_norm(T.block(i, i)), spectral_norm(T.block(i + 1, i + 1)), 1e-300)
        inter.append(_rel(spectral_norm(corner(R, d)), scale))
        nonzero.append(bool(np.any(np.abs(C) > 0)))
    cond, comm = {}, {}
    for (i, j), c in T.condition_a.items():
        D = T.block(i, i)
        P = poly_of_matrix(c, D)
        comm[(i, j)] = _rel(spectral_norm(P @ D - D @ P), spectral_norm(P) * spectral_norm(D))
        expect = P @ T.chain(i, j)
        got = T.block(i, j)
        cond[(i, j)] = _rel(spectral_norm(got - expect), max(spectral_norm(expect), 1e-300))
    return FlagReport(inter, nonzero, cond, comm)


def conjugate_flag(T: FlagOperator, unitaries: Sequence[np.ndarray]) -> FlagOperator:
    """``U T U^*`` for a block-diagonal unitary ``U = diag(U_1, ..., U_n)``.

    The result keeps the same block structure; its frame seed is ``U_n Q``.
    """
    if len(unitaries) != T.n:
        raise DimensionError("need one unitary per block")
    Us = [np.asarray(U, dtype=complex) for U in unitaries]
    diags = tuple(OperatorMatrix(Us[i] @ T.block(i + 1, i + 1) @ Us[i].conj().T, s, s)
                  for i, s in enumerate(T.spaces))
    cpl = tuple(OperatorMatrix(Us[i] @ T.block(i + 1, i + 2) @ Us[i + 1].conj().T,
                               T.spaces[i + 1], T.spaces[i]) for i in range(T.n - 1))
    higher = {k: OperatorMatrix(Us[k[0] - 1] @ v.entries @ Us[k[1] - 1].conj().T, v.domain, v.codomain)
              for k, v in T.higher.items()}
    return FlagOperator(T.spaces, diags, cpl, dict(T.condition_a), higher,
                        Us[-1] @ T.frame_seed, T.coupling_symbols)


def ofb_truncation(T: FlagOperator) -> FlagOperator:
    """Same diagonal blocks and couplings with every higher entry removed."""
    return FlagOperator(T.spaces, T.diagonals, T.couplings, {}, {}, T.frame_seed,
                        T.coupling_symbols)


def flag_from_blocks(T_like: FlagOperator, higher: Dict[Tuple[int, int], np.ndarray],
                     condition_a: Optional[ConditionAData] = None) -> FlagOperator:
    """Copy of ``T_like`` with the given higher entries (no Condition (A) re-evaluation)."""
    hi = {k: OperatorMatrix(v, T_like.spaces[k[1] - 1], T_like.spaces[k[0] - 1])
          for k, v in higher.items()}
    return FlagOperator(T_like.spaces, T_like.diagonals, T_like.couplings,
                        dict(condition_a or {}), hi, T_like.frame_seed, T_like.coupling_symbols)


def random_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]
