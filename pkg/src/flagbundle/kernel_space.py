"""Truncated reproducing-kernel Hilbert spaces on the unit disc.

A space is fixed by a positive weight sequence ``a_k`` through the diagonal
kernel ``K(z, w) = sum_k a_k z^k conj(w)^k``.  The monomials are orthogonal
with ``||z^k||^2 = 1 / a_k``, so ``e_k = sqrt(a_k) z^k`` is an orthonormal basis.

Vectors cross module boundaries in monomial coordinates (the coefficients of
``z^k``); matrices elsewhere in the package are stored in the orthonormal basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_TRUNCATION = 128


class DomainError(ValueError):
    """Raised for parameters outside the admissible domain."""


class DimensionError(ValueError):
    """Raised when a coefficient vector does not fit the truncation."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Positive kernel coefficients ``a_0 .. a_{N-1}``.

    Attributes
    ----------
    weights : ndarray of float
        The coefficients; all strictly positive.
    tag : str
        ``"power"`` or ``"explicit"``.
    lam : float, optional
        Exponent of the power kernel ``(1 - z conj(w))^(-lam)`` when ``tag == "power"``.
    """

    weights: np.ndarray
    tag: str = "explicit"
    lam: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("weights must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = int(np.argmax(~(np.isfinite(w) & (w > 0))))
            raise DomainError(f"weight a_{bad} = {w[bad]!r} is not a positive real")
        if self.tag not in ("power", "explicit"):
            raise DomainError(f"unknown weight tag {self.tag!r}")
        if self.tag == "power" and (self.lam is None or self.lam <= 0):
            raise DomainError("power weights need lam > 0")
        object.__setattr__(self, "weights", _readonly(w))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def integer_exponent(self) -> bool:
        # integer exponents give exact hypercontraction identities for the shift
        return self.tag == "power" and float(self.lam).is_integer()

    def scaled(self, c: float) -> "WeightSequence":
        """Multiply every coefficient by ``c > 0`` (result is tagged explicit)."""
        if c <= 0:
            raise DomainError("scale must be positive")
        return WeightSequence(self.weights * c, "explicit")

    def describe(self) -> dict:
        if self.tag == "power":
            return {"type": "power", "lambda": float(self.lam),
                    "integer_exponent": self.integer_exponent}
        return {"type": "explicit", "length": len(self)}


def power_weights(lam: float, N: int) -> WeightSequence:
    """Coefficients of ``(1 - x)^(-lam)``: ``a_k = Gamma(lam + k) / (Gamma(lam) k!)``.

    Integer exponents use exact binomials ``C(lam + k - 1, k)``; other exponents
    use the ratio recurrence ``a_{k+1} = a_k (lam + k) / (k + 1)``, which avoids the
    cancellation of a log-gamma difference.

    Examples
    --------
    >>> power_weights(2, 4).weights.tolist()
    [1.0, 2.0, 3.0, 4.0]
    """
    if not (lam > 0):
        raise DomainError(f"lambda must be positive, got {lam!r}")
    if N < 2:
        raise DomainError(f"truncation must be at least 2, got {N}")
    lam = float(lam)
    if lam.is_integer():
        m = int(lam)
        w = np.array([float(math.comb(m + k - 1, k)) for k in range(N)])
    else:
        ratios = (lam + np.arange(N - 1)) / (np.arange(N - 1) + 1.0)
        w = np.concatenate(([1.0], np.cumprod(ratios)))
    return WeightSequence(w, "power", lam)


def explicit_weights(values: Sequence[float]) -> WeightSequence:
    return WeightSequence(np.asarray(values, dtype=float), "explicit")


@dataclass(frozen=True, eq=False)
class KernelSpace:
    """Span of ``1, z, ..., z^{N-1}`` with the norm induced by the weights."""

    weights: WeightSequence
    truncation: Optional[int] = None
    _a: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.weights) if self.truncation is None else int(self.truncation)
        if n < 1 or n > len(self.weights):
            raise DimensionError(
                f"truncation {n} outside 1..{len(self.weights)} available weights")
        object.__setattr__(self, "truncation", n)
        object.__setattr__(self, "_a", self.weights.weights[:n])

    @property
    def N(self) -> int:
        return self.truncation

    @property
    def a(self) -> np.ndarray:
        """Coefficients actually in use (length ``N``)."""
        return self._a

    @property
    def sqrt_a(self) -> np.ndarray:
        return np.sqrt(self._a)

    def to_orthonormal(self, coeffs) -> np.ndarray:
        """Monomial coefficients -> coordinates in ``e_k = sqrt(a_k) z^k``."""
        c = self._pad(coeffs)
        return c / self.sqrt_a

    def to_monomial(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=complex)
        if c.shape[0] != self.N:
            raise DimensionError(f"expected {self.N} coordinates, got {c.shape[0]}")
        return c * (self.sqrt_a if c.ndim == 1 else self.sqrt_a[:, None])

    def same_as(self, other: "KernelSpace") -> bool:
        return self.N == other.N and np.array_equal(self.a, other.a)

    def _pad(self, coeffs) -> np.ndarray:
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if c.shape[0] > self.N:
            raise DimensionError(
                f"coefficient list of length {c.shape[0]} exceeds truncation {self.N}")
        out = np.zeros((self.N,) + c.shape[1:], dtype=complex)
        out[: c.shape[0]] = c
        return out


def hardy_space(N: int = DEFAULT_TRUNCATION) -> KernelSpace:
    return KernelSpace(power_weights(1, N))


def power_space(lam: float, N: int = DEFAULT_TRUNCATION) -> KernelSpace:
    return KernelSpace(power_weights(lam, N))


def kernel_eval(space: KernelSpace, z: complex, w: complex) -> complex:
    """Truncated kernel ``sum_{k<N} a_k z^k conj(w)^k``."""
    x = complex(z) * np.conj(complex(w))
    # Horner keeps the sum accurate near |x| ~ 1
    acc = 0j
    for ak in space.a[::-1]:
        acc = acc * x + ak
    return complex(acc)


def section_norm_sq(space: KernelSpace, w: complex) -> float:
    """``||K(., conj w)||^2 = sum_k a_k |w|^{2k}`` (the kernel on the diagonal)."""
    return kernel_eval(space, np.conj(w), np.conj(w)).real


def section_norm_sq_many(space: KernelSpace, w) -> np.ndarray:
    """Vectorised :func:`section_norm_sq` over an array of points."""
    r2 = np.abs(np.asarray(w, dtype=complex)) ** 2
    acc = np.zeros_like(r2)
    for ak in space.a[::-1]:
        acc = acc * r2 + ak
    return acc


def coeff_inner(space: KernelSpace, f, g) -> complex:
    """Inner product of two polynomials given by monomial coefficients.

    ``<f, g> = sum_k f_k conj(g_k) / a_k``; linear in ``f``.

    Raises
    ------
    DimensionError
        If either list is longer than the truncation.
    """
    fv = space._pad(f)
    gv = space._pad(g)
    return complex(np.sum(fv * np.conj(gv) / space.a))


def coeff_norm_sq(space: KernelSpace, f) -> float:
    return coeff_inner(space, f, f).real
