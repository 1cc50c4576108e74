"""Eigenvector frames, curvature and second fundamental forms.

Curvature of a line bundle with holomorphic section ``t`` is the negative
quantity ``-d dbar log ||t||^2``; the Wirtinger operator ``d dbar`` equals a quarter
of the real Laplacian, discretised here by the 5-point stencil.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .kernel_space import KernelSpace
from .op_model import FlagOperator, spectral_norm

# 1e-3 leaves an O(h^2) error of ~2e-4 at |w| = 0.8 for lam = 3; rounding is ~1e-7 here
DEFAULT_H = 1e-4
# nested differences amplify stencil rounding, so derivatives use a coarser inner step
DERIV_H = 1e-3
DEFAULT_RADII = tuple(np.round(np.arange(9) * 0.1, 10))
DEFAULT_ANGLES = 16

NormProvider = Callable[[np.ndarray], np.ndarray]


class DegenerateFrameError(ValueError):
    """A section vanishes (or a Gram matrix is singular) at the evaluation point."""


class InvalidFrameError(ValueError):
    """A frame does not satisfy the normalisation a computation relies on."""


# ---------------------------------------------------------------- sections

def eigen_section(space: KernelSpace, w: complex) -> np.ndarray:
    """``K(., conj w)`` in monomial coordinates: coefficients ``a_k w^k``.

    It spans ``ker(M_z^* - w)`` up to the truncation tail ``a_{N-1} w^N``.
    """
    return space.a * complex(w) ** np.arange(space.N)


def _powers(ws: np.ndarray, N: int) -> np.ndarray:
    # columns are (w^k)_k for each point
    ws = np.asarray(ws, dtype=complex).ravel()
    V = np.empty((N, ws.size), dtype=complex)
    V[0] = 1.0
    for k in range(1, N):
        V[k] = V[k - 1] * ws
    return V


def _dpowers(ws: np.ndarray, N: int) -> np.ndarray:
    ws = np.asarray(ws, dtype=complex).ravel()
    V = _powers(ws, N)
    D = np.zeros_like(V)
    D[1:] = np.arange(1, N)[:, None] * V[:-1]
    return D


def frame_sections(T: FlagOperator, ws, derivative: bool = False) -> List[np.ndarray]:
    """Orthonormal coordinates of ``t_i(w)`` for every level ``i`` and every point.

    Returns a list of ``n`` arrays of shape ``(N_i, P)``.  With ``derivative=True``
    the holomorphic derivatives ``d t_i / dw`` are returned instead.
    """
    Nn = T.sizes[-1]
    V = _dpowers(ws, Nn) if derivative else _powers(ws, Nn)
    out = [None] * T.n
    out[-1] = T.frame_seed @ V
    for i in range(T.n - 1, 0, -1):
        out[i - 1] = T.block(i, i + 1) @ out[i]
    return out


def section_norm_provider(T: FlagOperator, level: int) -> NormProvider:
    """Vectorised ``w -> ||t_level(w)||^2`` (level is 1-based)."""
    def provider(w):
        w = np.asarray(w, dtype=complex)
        S = frame_sections(T, w.ravel())[level - 1]
        return np.sum(np.abs(S) ** 2, axis=0).reshape(w.shape)
    return provider


def kernel_norm_provider(space: KernelSpace) -> NormProvider:
    from .kernel_space import section_norm_sq_many
    return lambda w: section_norm_sq_many(space, w)


@dataclass(frozen=True)
class FrameEvaluation:
    """Eigen-sections ``t_1(w) .. t_n(w)`` of a flag operator at one point."""

    w: complex
    coords: Tuple[np.ndarray, ...]       # orthonormal coordinates, one per block
    spaces: Tuple[KernelSpace, ...]
    residuals: Tuple[float, ...]         # ||(T_ii - w) t_i||

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def sections(self) -> List[np.ndarray]:
        """Monomial coordinates of each section."""
        return [s.to_monomial(c) for s, c in zip(self.spaces, self.coords)]

    @property
    def norms_sq(self) -> np.ndarray:
        return np.array([np.vdot(c, c).real for c in self.coords])


def flag_frame(T: FlagOperator, w: complex, degeneracy_tol: float = 1e-12) -> FrameEvaluation:
    """``t_n`` from the last block, then ``t_i = T_{i,i+1} t_{i+1}`` downwards.

    Raises
    ------
    DegenerateFrameError
        If some ``t_i(w)`` vanishes, i.e. a coupling symbol vanishes at ``w``.
    """
    secs = [s[:, 0] for s in frame_sections(T, np.array([w]))]
    for i in range(T.n - 1, 0, -1):
        top = np.linalg.norm(secs[i - 1])
        below = np.linalg.norm(secs[i])
        if not top > degeneracy_tol * max(below, 1.0):
            raise DegenerateFrameError(
                f"t_{i}({w}) vanishes: coupling T_{{{i},{i + 1}}} kills the section")
    res = tuple(float(np.linalg.norm(T.block(i, i) @ secs[i - 1] - w * secs[i - 1]))
                for i in range(1, T.n + 1))
    return FrameEvaluation(complex(w), tuple(secs), tuple(T.spaces), res)


# ---------------------------------------------------------------- curvature

def _stencil_points(w: np.ndarray, h: float) -> np.ndarray:
    return np.stack([w, w + h, w - h, w + 1j * h, w - 1j * h])


def curvature(norm_provider: NormProvider, w, h: float = DEFAULT_H):
    """``-(1/4)`` times the 5-point Laplacian of ``log ||t||^2`` at ``w`` (scalar or array).

    Raises
    ------
    ValueError
        If the stencil leaves the disc or a norm is not positive.
    """
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(w) + 2 * h >= 1):
        raise ValueError("stencil leaves the unit disc")
    vals = np.asarray(norm_provider(_stencil_points(w, h)), dtype=float)
    if not np.all(vals > 0):
        raise DegenerateFrameError("non-positive section norm on the stencil")
    L = np.log(vals)
    lap = (L[1] + L[2] + L[3] + L[4] - 4.0 * L[0]) / h ** 2
    K = -0.25 * lap
    return float(K) if K.ndim == 0 else K


def section_curvature(T: FlagOperator, level: int, w):
    """Curvature of ``t_level`` from the section and its derivative, no stencil.

    For a holomorphic section, ``d dbar log ||t||^2`` equals
    ``(||t||^2 ||t'||^2 - |<t', t>|^2) / ||t||^4``.  Rounding stays near machine
    precision, which the stencil cannot offer once it divides by ``h^2``.
    """
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    t = frame_sections(T, flat)[level - 1]
    dt = frame_sections(T, flat, derivative=True)[level - 1]
    n1 = np.sum(np.abs(t) ** 2, axis=0)
    n2 = np.sum(np.abs(dt) ** 2, axis=0)
    c = np.sum(np.conj(t) * dt, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = -(n1 * n2 - np.abs(c) ** 2) / n1 ** 2
    K = K.reshape(w.shape)
    return float(K) if K.ndim == 0 else K


def _d(f, delta: float, conj: bool):
    # Wirtinger d = (d_x - i d_y)/2 and dbar = (d_x + i d_y)/2 by central differences
    s = 1j if conj else -1j

    def g(w):
        dx = (f(w + delta) - f(w - delta)) / (2 * delta)
        dy = (f(w + 1j * delta) - f(w - 1j * delta)) / (2 * delta)
        return 0.5 * (dx + s * dy)
    return g


def curvature_derivatives(norm_provider: NormProvider, w: complex, i: int, j: int,
                          h: float = DERIV_H, h_outer: float = 5e-3) -> complex:
    """``d^i dbar^j`` of the curvature by nested central differences, ``i + j <= 2``.

    The outer step is larger than the stencil step: each outer difference divides
    the stencil's rounding noise (about ``1e-10``) by the step.
    """
    if i < 0 or j < 0 or i + j > 2:
        raise ValueError("need i, j >= 0 and i + j <= 2")
    if abs(w) + 2 * h + (i + j) * h_outer >= 1:
        raise ValueError("stencil leaves the unit disc")
    f = lambda z: curvature(norm_provider, z, h)
    if i == j == 0:
        return complex(f(w))
    g = f
    for _ in range(i):
        g = _d(g, h_outer, conj=False)
    for _ in range(j):
        g = _d(g, h_outer, conj=True)
    return complex(g(w))


@dataclass(frozen=True)
class CurvatureGrid:
    """Curvature on a polar grid; ``values[r, a]`` at ``radii[r] * exp(i angles[a])``."""

    radii: np.ndarray
    angles: np.ndarray
    values: np.ndarray
    h: float

    @property
    def points(self) -> np.ndarray:
        return self.radii[:, None] * np.exp(1j * self.angles[None, :])

    def rows(self):
        for r, rad in enumerate(self.radii):
            for a, ang in enumerate(self.angles):
                yield float(rad), float(ang), float(self.values[r, a])


def polar_grid(radii=DEFAULT_RADII, angles=DEFAULT_ANGLES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    radii = np.asarray(radii, dtype=float)
    ang = np.arange(int(angles)) * (2 * np.pi / int(angles))
    return radii, ang, radii[:, None] * np.exp(1j * ang[None, :])


def curvature_grid(norm_provider: NormProvider, radii=DEFAULT_RADII, angles=DEFAULT_ANGLES,
                   h: float = DEFAULT_H) -> CurvatureGrid:
    r, a, pts = polar_grid(radii, angles)
    return CurvatureGrid(r, a, curvature(norm_provider, pts, h), h)


# ---------------------------------------------------------------- Gram data

def gram_matrix(frame: FrameEvaluation, T: FlagOperator = None, vectors=None) -> np.ndarray:
    """Gram matrix ``G[i, j] = <t_j, t_i>`` in the direct-sum metric.

    Each ``t_i`` sits in its own summand, so distinct sections are orthogonal and
    the matrix is diagonal.  Pass ``vectors`` (ambient coordinates) to get the
    Gram matrix of an arbitrary family instead.
    """
    if vectors is None:
        G = np.diag(frame.norms_sq).astype(complex)
    else:
        X = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
        G = X.conj().T @ X
        G = G.T  # G[i, j] = <x_j, x_i>
    ev = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    if ev.min() <= 1e-14 * max(ev.max(), 1e-300):
        raise DegenerateFrameError("Gram matrix is not positive definite")
    return G


def coupling_ratio(T: FlagOperator, i: int, w) -> np.ndarray:
    """``||T_{i,i+1} t_{i+1}(w)||^2 / ||t_{i+1}(w)||^2`` (level ``i`` is 1-based)."""
    w = np.asarray(w, dtype=complex)
    S = frame_sections(T, w.ravel())
    num = np.sum(np.abs(S[i - 1]) ** 2, axis=0)
    den = np.sum(np.abs(S[i]) ** 2, axis=0)
    if np.any(num <= 1e-24 * den):
        raise DegenerateFrameError(f"coupling T_{{{i},{i + 1}}} kills the section")
    r = (num / den).reshape(w.shape)
    return float(r) if r.ndim == 0 else r


def second_fundamental_form(T: FlagOperator, i: int, w, h: float = DEFAULT_H):
    """Closed formula ``K_{T_ii}(w) / (ratio - K_{T_ii}(w))^{1/2}`` (coefficient of ``dwbar``)."""
    K = curvature(section_norm_provider(T, i), w, h)
    R = coupling_ratio(T, i, w)
    return K / np.sqrt(R - K)


# ---------------------------------------------------------------- Gram-Schmidt route

def holomorphic_derivative(f: Callable[[complex], np.ndarray], w: complex,
                           radius: float = None, m: int = 16) -> np.ndarray:
    """Derivative of a holomorphic vector function by the discrete Cauchy integral.

    Error is ``O((radius / dist)^m)`` with ``dist`` the distance to the nearest
    singularity; the default radius is a sixth of the distance to the circle.
    """
    if radius is None:
        radius = min(0.05, (1 - abs(w)) / 6)
    roots = np.exp(2j * np.pi * np.arange(m) / m)
    acc = sum(f(w + radius * r) * np.conj(r) for r in roots)
    return acc / (m * radius)


def sff_gram_schmidt(gamma1: Callable[[complex], np.ndarray],
                     gamma2: Callable[[complex], np.ndarray],
                     w: complex, h: float = DEFAULT_H, ortho_tol: float = 1e-8) -> float:
    """Second fundamental form of ``span(gamma1)`` in ``span(gamma1, gamma2)``.

    Uses the Gram-Schmidt expression
    ``-h^{1/2} dbar(h^{-1} <gamma2, gamma1>) / (||gamma2||^2 - |<gamma2, gamma1>|^2 / h)^{1/2}``
    with ``h = ||gamma1||^2``.  The frame must satisfy
    ``gamma1 ⟂ (d gamma1 - gamma2)`` at ``w``.

    Raises
    ------
    InvalidFrameError
        If the orthogonality normalisation fails by more than ``ortho_tol`` (relative).
    """
    g1 = gamma1(w)
    t = holomorphic_derivative(gamma1, w) - gamma2(w)
    ip = np.vdot(g1, t)
    scale = np.linalg.norm(g1) * np.linalg.norm(t)
    if abs(ip) > ortho_tol * max(scale, 1e-300):
        raise InvalidFrameError(
            f"frame not normalised: |<gamma1, d gamma1 - gamma2>| / norms = {abs(ip) / scale:.3g}")

    def q(z):
        a, b = gamma1(z), gamma2(z)
        return np.vdot(a, b) / np.vdot(a, a).real   # <gamma2, gamma1> / h

    dbar_q = _d(q, h, conj=True)(w)
    g2 = gamma2(w)
    hw = np.vdot(g1, g1).real
    c = np.vdot(g1, g2)
    den = np.vdot(g2, g2).real - abs(c) ** 2 / hw
    if den <= 0:
        raise DegenerateFrameError("gamma1 and gamma2 are dependent")
    theta = -np.sqrt(hw) * dbar_q / np.sqrt(den)
    return float(theta.real)


def normalized_frame(T: FlagOperator, i: int):
    """Providers ``gamma1 = (t_i, 0)`` and ``gamma2 = (d t_i, -t_{i+1})`` for levels ``i, i+1``.

    Both lie in ``ker(S - w)`` for the two-block compression ``S`` of ``T`` and
    satisfy ``d gamma1 - gamma2 = (0, t_{i+1}) ⟂ gamma1``.
    """
    def g1(w):
        s = frame_sections(T, np.array([w]))
        return np.concatenate([s[i - 1][:, 0], np.zeros(T.sizes[i], dtype=complex)])

    def g2(w):
        s = frame_sections(T, np.array([w]))
        ds = frame_sections(T, np.array([w]), derivative=True)
        return np.concatenate([ds[i - 1][:, 0], -s[i][:, 0]])
    return g1, g2


def two_block(T: FlagOperator, i: int) -> np.ndarray:
    """``[[T_ii, T_{i,i+1}], [0, T_{i+1,i+1}]]`` as a dense array."""
    a, b = T.sizes[i - 1], T.sizes[i]
    S = np.zeros((a + b, a + b), dtype=complex)
    S[:a, :a] = T.block(i, i)
    S[:a, a:] = T.block(i, i + 1)
    S[a:, a:] = T.block(i + 1, i + 1)
    return S
