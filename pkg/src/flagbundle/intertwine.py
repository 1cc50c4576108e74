"""Unipotent intertwiners between a flag operator and its higher-entry completions.

Every block of interest has the form ``u(T_ii) C_ij`` with ``C_ij`` the coupling
chain ``T_{i,i+1} ... T_{j-1,j}`` and ``u`` a power series.  Because the couplings
intertwine the diagonal blocks, ``u(T_ii) C_ij v(T_jj) C_jk = (u v)(T_ii) C_ik``, so
such blocks multiply like upper-triangular matrices over the commutative ring of
power series.  Writing ``T = zI + J`` and ``T~ = zI + Phi`` in that ring
(``J`` the superdiagonal of ones, ``Phi_{ij}`` the Condition (A) symbols), the
equation ``X T = T~ X`` reduces to ``X J = Phi X``, solved row by row below.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .op_model import (FlagOperator, FlagViolation, block_corner_index, ofb_truncation,
                       poly_of_matrix, spectral_norm, trim_poly, verify_flag)

LEVEL_TOL = 1e-8
INTERTWINE_TOL = 1e-9
COMPOSE_TOL = 1e-8

Symbols = Dict[Tuple[int, int], np.ndarray]


class ConstructionError(ArithmeticError):
    """A level of the recursive construction failed its consistency check."""

    def __init__(self, message: str, level: Optional[int] = None, residual: float = float("nan")):
        super().__init__(message)
        self.level = level
        self.residual = residual


class CompositionError(ArithmeticError):
    """A composed witness does not intertwine its target pair."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class UnipotentWitness:
    """``X = I + K`` with ``K`` strictly upper block-triangular and ``X T = T~ X``.

    Attributes
    ----------
    K : dict
        ``{(i, j): K_ij}`` for ``i < j`` (1-based, arrays ``N_i x N_j``).
    symbols : dict
        Power series ``u_ij`` with ``K_ij = u_ij(T_ii) C_ij``.
    X, X_inv : ndarray
        Assembled witness and its finite Neumann inverse.
    residual : float
        ``||X T - T~ X|| / ||T||`` on the compressed corner.
    level_residuals : dict
        Per-row residual of the intertwining equation (row ``i`` of the block system).
    provenance : str
    """

    K: Dict[Tuple[int, int], np.ndarray]
    symbols: Symbols
    X: np.ndarray
    X_inv: np.ndarray
    sizes: Tuple[int, ...]
    residual: float
    level_residuals: Dict[int, float] = field(default_factory=dict)
    commutation: Dict[Tuple[int, int], float] = field(default_factory=dict)
    provenance: str = ""

    @property
    def n(self) -> int:
        return len(self.sizes)

    def inverse_residual(self) -> float:
        return spectral_norm(self.X @ self.X_inv - np.eye(self.X.shape[0]))


# ---------------------------------------------------------------- series arithmetic

def _series(c, L: int) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=complex))[:L]
    out = np.zeros(L, dtype=complex)
    out[: c.size] = c
    return out


def _smul(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.convolve(f, g)[: f.size]


def solve_symbols(phi: Symbols, n: int, length: int) -> Symbols:
    """Symbols ``u_ij`` of the unipotent solution of ``X J = Phi X``.

    Row ``i`` is fixed by its last entry ``u_in = phi_in`` (``1`` when ``i = n - 1``)
    and the recursion ``u_{i,m} = u_{i+1,m+1} + sum_{j=i+2}^{m+1} phi_ij u_{j,m+1}``,
    which only reads rows below ``i``; rows are solved from the bottom up.
    """
    one = _series([1.0], length)
    zero = np.zeros(length, dtype=complex)
    ph = {k: _series(v, length) for k, v in phi.items()}
    u: Symbols = {(i, i): one for i in range(1, n + 1)}
    for i in range(n - 1, 0, -1):
        u[(i, n)] = one if i == n - 1 else ph.get((i, n), zero)
        for m in range(n - 1, i, -1):
            acc = u[(i + 1, m + 1)].copy()
            for j in range(i + 2, m + 2):
                if (i, j) in ph:
                    acc = acc + _smul(ph[(i, j)], u[(j, m + 1)])
            u[(i, m)] = acc
    return {k: v for k, v in u.items() if k[0] < k[1]}


def _series_degree(c: np.ndarray) -> int:
    return max(len(trim_poly(c, 1e-15)) - 1, 0)


# ---------------------------------------------------------------- matrices

def _offsets(sizes: Sequence[int]):
    return np.concatenate(([0], np.cumsum(sizes))).astype(int)


def assemble_blocks(blocks: Dict[Tuple[int, int], np.ndarray], sizes: Sequence[int],
                    identity: bool = False) -> np.ndarray:
    off = _offsets(sizes)
    M = np.eye(off[-1], dtype=complex) if identity else np.zeros((off[-1], off[-1]), dtype=complex)
    for (i, j), B in blocks.items():
        M[off[i - 1]:off[i], off[j - 1]:off[j]] += B
    return M


def _check_strict_upper(K: np.ndarray, sizes: Sequence[int], tol: float) -> None:
    off = _offsets(sizes)
    scale = max(spectral_norm(K), 1.0)
    for i in range(len(sizes)):
        for j in range(i + 1):
            blk = K[off[i]:off[i + 1], off[j]:off[j + 1]]
            if blk.size and np.max(np.abs(blk)) > tol * scale:
                raise ValueError(
                    f"block ({i + 1},{j + 1}) of X - I is non-zero: pattern is not nilpotent")


def invert_unipotent(X: np.ndarray, sizes: Sequence[int], tol: float = 1e-14) -> np.ndarray:
    """``X^{-1} = sum_{j<n} (-K)^j`` for ``X = I + K`` with ``K`` strictly block upper.

    Raises
    ------
    ValueError
        If ``K`` has a non-zero block on or below the block diagonal.
    """
    X = np.asarray(X, dtype=complex)
    I = np.eye(X.shape[0], dtype=complex)
    K = X - I
    _check_strict_upper(K, sizes, tol)
    R = I.copy()
    for _ in range(len(sizes) - 1):
        R = I - K @ R
    return R


def witness_residual(X: np.ndarray, A: np.ndarray, B: np.ndarray,
                     idx: Optional[np.ndarray] = None) -> float:
    """``||X A - B X|| / max(||A||, ||B||)`` restricted to ``idx`` (a witness ``A -> B``)."""
    R = X @ A - B @ X
    scale = max(spectral_norm(A), spectral_norm(B), 1e-300)
    if idx is not None:
        R = R[np.ix_(idx, idx)]
    return spectral_norm(R) / scale


def _symbol_blocks(Tt: FlagOperator, u: Symbols) -> Dict[Tuple[int, int], np.ndarray]:
    K = {}
    for (i, j), c in u.items():
        d = _series_degree(c)
        K[(i, j)] = poly_of_matrix(c[: d + 1], Tt.block(i, i)) @ Tt.chain(i, j)
    return K


def _build(Tt: FlagOperator, phi: Symbols, provenance: str) -> UnipotentWitness:
    n = Tt.n
    length = max(Tt.sizes)
    u = solve_symbols(phi, n, length)
    K = _symbol_blocks(Tt, u)
    T = ofb_truncation(Tt)
    sizes = tuple(Tt.sizes)
    budget = Tt.degree_budget() + max((_series_degree(c) for c in u.values()), default=0)
    idx = block_corner_index(sizes, budget)
    off = _offsets(sizes)
    X = assemble_blocks(K, sizes, identity=True)
    A, B = T.assembled, Tt.assembled
    scale = max(T.norm(), 1e-300)

    # each row of the block system is checked on its own so failures name a level
    R = X @ A - B @ X
    levels = {}
    for i in range(1, n + 1):
        rows = idx[(idx >= off[i - 1]) & (idx < off[i])]
        levels[i] = spectral_norm(R[np.ix_(rows, idx)]) / scale
    for i in sorted(levels, reverse=True):
        if not levels[i] < LEVEL_TOL:
            raise ConstructionError(
                f"row {i} of the intertwining equation is inconsistent "
                f"(residual {levels[i]:.3g})", i, levels[i])
    comm = {}
    for (i, j), Kij in K.items():
        Dii, Djj = Tt.block(i, i), Tt.block(j, j)
        ci = block_corner_index([sizes[i - 1]], budget)
        cj = block_corner_index([sizes[j - 1]], budget)
        lhs = (Kij @ Djj - Dii @ Kij)[np.ix_(ci, cj)]
        comm[(i, j)] = spectral_norm(lhs) / max(spectral_norm(Kij) * max(spectral_norm(Dii), 1.0), 1e-300)
    Xinv = invert_unipotent(X, sizes)
    res = spectral_norm(R[np.ix_(idx, idx)]) / scale
    return UnipotentWitness(K, u, X, Xinv, sizes, res, levels, comm, provenance)


def _phi_symbols(Tt: FlagOperator) -> Symbols:
    return {k: np.asarray(v, dtype=complex) for k, v in Tt.condition_a.items()}


def _validate(Tt: FlagOperator) -> None:
    rep = verify_flag(Tt)
    if not rep.ok:
        raise FlagViolation("input is not a valid flag operator with Condition (A) data")


def build_K_n3(Tt: FlagOperator, check: bool = True) -> UnipotentWitness:
    """Closed form for three blocks.

    ``K_12 = (1 + phi_13(T_11)) T_12``, ``K_13 = T_13`` and ``K_23 = T_23``.
    """
    if Tt.n != 3:
        raise FlagViolation(f"expected 3 blocks, got {Tt.n}")
    if check:
        _validate(Tt)
    L = max(Tt.sizes)
    phi13 = _series(Tt.condition_a.get((1, 3), [0.0]), L)
    u = {(1, 2): _series([1.0], L) + phi13, (1, 3): phi13, (2, 3): _series([1.0], L)}
    # the closed form must coincide with the general recursion
    ref = solve_symbols(_phi_symbols(Tt), 3, L)
    for k in u:
        if not np.allclose(u[k], ref[k], atol=0, rtol=0):
            raise ConstructionError(f"closed form disagrees with the recursion at {k}", k[0])
    return _build(Tt, _phi_symbols(Tt), "unipotent reduction, closed form for n=3")


def build_intertwiner(Tt: FlagOperator, check: bool = True) -> UnipotentWitness:
    """Unipotent ``X`` with ``X T = T~ X`` where ``T`` is the bidiagonal part of ``T~``.

    Raises
    ------
    ConstructionError
        If some row of the block equation misses ``1e-8`` (the level is attached).
    """
    if check:
        _validate(Tt)
    if Tt.n == 3:
        return build_K_n3(Tt, check=False)
    return _build(Tt, _phi_symbols(Tt), f"unipotent reduction, recursion over {Tt.n} levels")


def reduce_to_ofb(Tt: FlagOperator, check: bool = True) -> Tuple[FlagOperator, UnipotentWitness]:
    """The bidiagonal operator with the same diagonal and couplings, plus the witness.

    For an input that is already bidiagonal the input itself is returned.
    """
    T = Tt if Tt.is_ofb and not Tt.higher else ofb_truncation(Tt)
    W = build_intertwiner(Tt, check=check) if Tt.n > 1 else _build(Tt, {}, "single block")
    return T, W


def _as_matrix(W) -> np.ndarray:
    return W.X if isinstance(W, UnipotentWitness) else np.asarray(W, dtype=complex)


def _inverse(W) -> np.ndarray:
    if isinstance(W, UnipotentWitness):
        return W.X_inv
    return np.linalg.inv(np.asarray(W, dtype=complex))


def compose_witnesses(X, Y, Z, A1: np.ndarray, B1: np.ndarray,
                      idx: Optional[np.ndarray] = None, tol: float = COMPOSE_TOL):
    """Witness ``A1 -> B1`` from ``X: A -> B``, ``Y: A -> A1`` and ``Z: B -> B1``.

    A witness ``S -> T`` is an invertible ``W`` with ``W S = T W``; the result is
    ``Z X Y^{-1}``.

    Returns
    -------
    (W, residual)

    Raises
    ------
    CompositionError
        Residual above ``tol``.
    """
    W = _as_matrix(Z) @ _as_matrix(X) @ _inverse(Y)
    A1 = A1.assembled if isinstance(A1, FlagOperator) else np.asarray(A1)
    B1 = B1.assembled if isinstance(B1, FlagOperator) else np.asarray(B1)
    res = witness_residual(W, A1, B1, idx)
    if not res < tol:
        raise CompositionError(f"composed witness misses the target pair (residual {res:.3g})", res)
    return W, res
