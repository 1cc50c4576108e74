"""Unitary invariants, equivalence decisions and the similarity heuristic.

All comparisons happen on a polar grid.  Decisions are three-valued: a verdict is
only issued when at least 90% of the grid points carry a non-degenerate frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._parallel import pmap
from .bundle_geom import (DEFAULT_ANGLES, DEFAULT_H, DEFAULT_RADII, frame_sections,
                          polar_grid, section_curvature, section_norm_provider)
from .intertwine import reduce_to_ofb, witness_residual
from .kernel_space import KernelSpace
from .op_model import (FlagOperator, backward_shift, block_corner_index, hypercontraction_order,
                       spectral_norm)

CURVATURE_TOL = 1e-4
RATIO_TOL = 1e-6
HIGHER_TOL = 1e-6
MIN_VALID = 0.9

SIM_RADII = tuple(np.round(np.linspace(0.0, 0.95, 20), 10))
SIM_ANGLES = 8
SIM_BOUND = 50.0
SIM_TOL = 1e-4
SIM_LAPLACE_H = 1e-3
TREND_SAMPLES = 5
# |psi0| growing at least half as fast as log 1/(1 - r^2) counts as log-divergent
TREND_SLOPE = 0.5
HYPOTHESIS_TOL = 1e-6
WITNESS_TOL = 1e-6
LSTSQ_TOL = 1e-4


class PreconditionError(ValueError):
    """Hypotheses of a decision procedure fail; carries the individual failures."""

    def __init__(self, failures: List[str]):
        super().__init__("; ".join(failures))
        self.failures = list(failures)


class WitnessConstructionError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------- invariant reports

@dataclass(frozen=True, eq=False)
class InvariantReport:
    """Invariant families of one flag operator on a polar grid.

    Arrays are indexed ``[radius, angle]``.  ``valid`` marks points where every
    section is non-degenerate; other entries hold ``nan``.

    Attributes
    ----------
    curvature : curvature of the last diagonal block
    norms : ``||t_i||`` per level
    coupling_ratios : ``||t_i||^2 / ||t_{i+1}||^2`` per level ``i < n``
    sff : second fundamental forms per level ``i < n`` (closed formula)
    higher : ``<T_ij t_j, t_i> / ||t_i||^2`` for ``j - i >= 2``
    """

    radii: np.ndarray
    angles: np.ndarray
    h: float
    curvature: np.ndarray
    norms: Tuple[np.ndarray, ...]
    coupling_ratios: Tuple[np.ndarray, ...]
    sff: Tuple[np.ndarray, ...]
    higher: Dict[Tuple[int, int], np.ndarray]
    valid: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.radii[:, None] * np.exp(1j * self.angles[None, :])

    @property
    def n(self) -> int:
        return len(self.norms)

    @property
    def valid_fraction(self) -> float:
        return float(np.mean(self.valid))

    @property
    def excluded(self) -> List[complex]:
        return [complex(p) for p in self.points[~self.valid]]


def _curv_masked(T: FlagOperator, level: int, pts: np.ndarray, h: float, method: str) -> np.ndarray:
    if method == "analytic":
        K = section_curvature(T, level, pts)
        return np.where(np.isfinite(K), K, np.nan)
    if method != "stencil":
        raise ValueError(f"unknown curvature method {method!r}")
    prov = section_norm_provider(T, level)
    with np.errstate(divide="ignore", invalid="ignore"):
        stencil = np.stack([pts, pts + h, pts - h, pts + 1j * h, pts - 1j * h])
        L = np.log(prov(stencil))
        K = -0.25 * (L[1] + L[2] + L[3] + L[4] - 4.0 * L[0]) / h ** 2
    return np.where(np.isfinite(K), K, np.nan)


def invariant_report(T: FlagOperator, radii=DEFAULT_RADII, angles=DEFAULT_ANGLES,
                     h: float = DEFAULT_H, degeneracy_tol: float = 1e-12,
                     method: str = "analytic") -> InvariantReport:
    """Evaluate curvature, frame norms, second fundamental forms and higher products.

    ``method="analytic"`` takes curvatures from sections and their derivatives;
    ``"stencil"`` uses the 5-point Laplacian with step ``h``.
    """
    r, a, pts = polar_grid(radii, angles)
    if np.any(np.abs(pts) + 2 * h >= 1):
        raise ValueError("grid stencil leaves the unit disc")
    flat = pts.ravel()
    S = frame_sections(T, flat)
    nsq = [np.sum(np.abs(s) ** 2, axis=0) for s in S]
    top = max(np.max(x) for x in nsq)
    valid = np.ones(flat.size, dtype=bool)
    for x in nsq:
        valid &= x > degeneracy_tol ** 2 * max(top, 1.0)

    def shaped(x):
        x = np.where(valid, x, np.nan)
        return x.reshape(pts.shape)

    K = _curv_masked(T, T.n, flat, h, method)
    valid &= np.isfinite(K)
    ratios, sffs = [], []
    for i in range(1, T.n):
        R = nsq[i - 1] / np.where(nsq[i] > 0, nsq[i], np.nan)
        Ki = _curv_masked(T, i, flat, h, method)
        with np.errstate(invalid="ignore"):
            th = Ki / np.sqrt(R - Ki)
        valid &= np.isfinite(th)
        ratios.append(R)
        sffs.append(th)
    higher = {}
    for (i, j) in sorted(T.higher):
        v = np.sum(np.conj(S[i - 1]) * (T.block(i, j) @ S[j - 1]), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            higher[(i, j)] = v / nsq[i - 1]
    return InvariantReport(
        r, a, h, shaped(K),
        tuple(shaped(np.sqrt(x)) for x in nsq),
        tuple(shaped(x) for x in ratios),
        tuple(shaped(x) for x in sffs),
        {k: np.where(valid, v, np.nan).reshape(pts.shape) for k, v in higher.items()},
        valid.reshape(pts.shape))


# ---------------------------------------------------------------- equivalence

@dataclass(frozen=True)
class EquivalenceVerdict:
    """``verdict`` is one of equivalent, not-equivalent, structural-not-equivalent, inconclusive."""

    verdict: str
    mode: str
    evidence: Dict[str, float]
    tolerances: Dict[str, float]
    valid_fraction: float
    reasons: Tuple[str, ...] = ()
    ratio_grids: Tuple[np.ndarray, ...] = ()

    @property
    def equivalent(self) -> bool:
        return self.verdict == "equivalent"


def _max_abs(x) -> float:
    x = np.asarray(x)
    return float(np.nanmax(np.abs(x))) if x.size and np.any(np.isfinite(x)) else 0.0


def _reports(A, B, radii, angles, h):
    return pmap(lambda T: invariant_report(T, radii, angles, h), (A, B))


def _structural(A: FlagOperator, B: FlagOperator, mode: str, tols) -> Optional[EquivalenceVerdict]:
    if A.n != B.n:
        return EquivalenceVerdict("structural-not-equivalent", mode, {"blocks_a": A.n, "blocks_b": B.n},
                                  tols, 1.0, (f"block counts differ: {A.n} vs {B.n}",))
    return None


def unitary_equiv_ofb(A: FlagOperator, B: FlagOperator, radii=DEFAULT_RADII,
                      angles=DEFAULT_ANGLES, curvature_tol: float = CURVATURE_TOL,
                      ratio_tol: float = RATIO_TOL, h: float = DEFAULT_H) -> EquivalenceVerdict:
    """Equivalence of bidiagonal flag operators from two conditions.

    The curvatures of the last diagonal blocks agree (absolute ``curvature_tol``),
    and ``r_i = ||t_i|| / ||t~_i||`` does not depend on ``i`` (``|log r_i - log r_n|``
    below ``ratio_tol``).
    """
    tols = {"curvature": curvature_tol, "ratio": ratio_tol, "h": h}
    s = _structural(A, B, "ofb", tols)
    if s is not None:
        return s
    if not (A.is_ofb and B.is_ofb):
        raise ValueError("bidiagonal mode needs operators without higher entries; use the full mode")
    ra, rb = _reports(A, B, radii, angles, h)
    valid = ra.valid & rb.valid
    frac = float(np.mean(valid))
    dK = _max_abs(np.where(valid, ra.curvature - rb.curvature, np.nan))
    logs = [np.log(na / nb) for na, nb in zip(ra.norms, rb.norms)]
    spread = [_max_abs(np.where(valid, l - logs[-1], np.nan)) for l in logs[:-1]]
    ev = {"curvature_max_diff": dK}
    ev.update({f"ratio_spread_{i}": v for i, v in enumerate(spread, start=1)})
    reasons = []
    if dK > curvature_tol:
        reasons.append(f"curvature of block {A.n} differs by {dK:.3g}")
    for i, v in enumerate(spread, start=1):
        if v > ratio_tol:
            reasons.append(f"norm ratio at level {i} differs from level {A.n} by {v:.3g} (log scale)")
    if frac < MIN_VALID:
        verdict = "inconclusive"
        reasons.append(f"only {frac:.0%} of grid points are valid")
    else:
        verdict = "not-equivalent" if reasons else "equivalent"
    return EquivalenceVerdict(verdict, "ofb", ev, tols, frac, tuple(reasons),
                              tuple(np.exp(l) for l in logs))


def full_invariant_equiv(A: FlagOperator, B: FlagOperator, radii=DEFAULT_RADII,
                         angles=DEFAULT_ANGLES, curvature_tol: float = CURVATURE_TOL,
                         higher_tol: float = HIGHER_TOL, h: float = DEFAULT_H) -> EquivalenceVerdict:
    """Compare curvature, every second fundamental form and every higher inner product.

    Curvatures and second fundamental forms use ``curvature_tol`` (absolute); the
    normalised higher products use ``higher_tol`` relative to ``max(|a|, |b|, 1)``.
    """
    tols = {"curvature": curvature_tol, "sff": curvature_tol, "higher": higher_tol, "h": h}
    s = _structural(A, B, "full", tols)
    if s is not None:
        return s
    ra, rb = _reports(A, B, radii, angles, h)
    valid = ra.valid & rb.valid
    frac = float(np.mean(valid))
    m = lambda x: np.where(valid, x, np.nan)
    ev = {"curvature_max_diff": _max_abs(m(ra.curvature - rb.curvature))}
    reasons = []
    if ev["curvature_max_diff"] > curvature_tol:
        reasons.append(f"curvature of block {A.n} differs by {ev['curvature_max_diff']:.3g}")
    for i, (x, y) in enumerate(zip(ra.sff, rb.sff), start=1):
        d = _max_abs(m(x - y))
        ev[f"sff_max_diff_{i}"] = d
        if d > curvature_tol:
            reasons.append(f"second fundamental form at level {i} differs by {d:.3g}")
    zero = np.zeros(ra.curvature.shape, dtype=complex)
    for key in sorted(set(ra.higher) | set(rb.higher)):
        x, y = ra.higher.get(key, zero), rb.higher.get(key, zero)
        scale = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1.0)
        d = _max_abs(m(np.abs(x - y) / scale))
        ev[f"higher_max_diff_{key[0]}_{key[1]}"] = d
        if d > higher_tol:
            reasons.append(f"higher inner product ({key[0]},{key[1]}) differs by {d:.3g}")
    if frac < MIN_VALID:
        verdict = "inconclusive"
        reasons.append(f"only {frac:.0%} of grid points are valid")
    else:
        verdict = "not-equivalent" if reasons else "equivalent"
    return EquivalenceVerdict(verdict, "full", ev, tols, frac, tuple(reasons))


# ---------------------------------------------------------------- similarity

def power_exponent(space: KernelSpace, rtol: float = 1e-10) -> Optional[int]:
    """Integer ``lam`` when the weights are a constant multiple of ``(1 - x)^(-lam)``."""
    a = space.a / space.a[0]
    if a.size < 2:
        return None
    lam = a[1]
    if not (lam > 0.5 and abs(lam - round(lam)) < rtol * max(lam, 1.0)):
        return None
    lam = int(round(lam))
    k = np.arange(a.size - 1)
    expect = np.concatenate(([1.0], np.cumprod((lam + k) / (k + 1.0))))
    return lam if np.allclose(a, expect, rtol=rtol, atol=0) else None


def _is_model_block(T: FlagOperator, i: int) -> bool:
    D = backward_shift(T.spaces[i - 1]).entries
    return np.allclose(T.block(i, i), D, rtol=0, atol=1e-12)


def _eval_poly(c, w):
    return np.polyval(np.asarray(c, dtype=complex)[::-1], w)


def check_similarity_hypotheses(A: FlagOperator, B: FlagOperator, phis=None, orders=None,
                                radii=DEFAULT_RADII, angles=DEFAULT_ANGLES,
                                tol: float = HYPOTHESIS_TOL) -> Dict[str, object]:
    """Check the hypotheses of the similarity criterion and return a report.

    ``orders`` are the required hypercontraction orders of ``A``'s diagonal blocks
    (default 1 each).  ``phis`` are polynomial coefficient lists, one per level
    ``i < n`` (default the constant 1); the identity
    ``|phi_i|^2 ||t_i||^2/||t_{i+1}||^2 = ||t~_i||^2/||t~_{i+1}||^2`` is checked on the grid.
    """
    failures = []
    if A.n != B.n:
        failures.append(f"block counts differ: {A.n} vs {B.n}")
        return {"failures": failures, "orders": [], "ratio_mismatch": []}
    n = A.n
    orders = [1] * n if orders is None else list(orders)
    phis = [[1.0]] * (n - 1) if phis is None else [np.atleast_1d(p) for p in phis]
    if len(orders) != n:
        failures.append(f"need {n} hypercontraction orders, got {len(orders)}")
        orders = (orders + [1] * n)[:n]
    if len(phis) != n - 1:
        failures.append(f"need {n - 1} ratio-matching functions, got {len(phis)}")
        phis = (list(phis) + [[1.0]] * n)[: n - 1]
    got = pmap(lambda i: hypercontraction_order(A.block(i, i), max_k=max(orders[i - 1], 1)),
               range(1, n + 1))
    for i, (g, m) in enumerate(zip(got, orders), start=1):
        if g < m:
            failures.append(f"block {i} of the first operator is not a {m}-hypercontraction (order {g})")
    for i in range(1, n + 1):
        if power_exponent(B.spaces[i - 1]) is None or not _is_model_block(B, i):
            failures.append(f"block {i} of the second operator is not a shift on a power kernel space")
    _, _, pts = polar_grid(radii, angles)
    flat = pts.ravel()
    SA, SB = frame_sections(A, flat), frame_sections(B, flat)
    mism = []
    for i in range(1, n):
        nA = [np.sum(np.abs(S[k]) ** 2, axis=0) for S, k in ((SA, i - 1), (SA, i))]
        nB = [np.sum(np.abs(S[k]) ** 2, axis=0) for S, k in ((SB, i - 1), (SB, i))]
        lhs = np.abs(_eval_poly(phis[i - 1], flat)) ** 2 * nA[0] / nA[1]
        rhs = nB[0] / nB[1]
        d = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))
        mism.append(d)
        if not d <= tol:
            failures.append(f"ratio identity fails at level {i} (relative mismatch {d:.3g})")
        # phi_i must be invertible on the closed disc
        roots = np.roots(np.asarray(phis[i - 1], dtype=complex)[::-1]) if len(phis[i - 1]) > 1 else []
        if len(phis[i - 1]) and np.allclose(phis[i - 1], 0):
            failures.append(f"ratio-matching function at level {i} is zero")
        elif any(abs(z) <= 1 + 1e-9 for z in roots):
            failures.append(f"ratio-matching function at level {i} vanishes on the closed disc")
    return {"failures": failures, "orders": got, "ratio_mismatch": mism}


@dataclass(frozen=True, eq=False)
class SimilarityVerdict:
    """Outcome of the similarity heuristic.

    ``psi0[r, a]`` is ``log(||t_n^A||^2 / ||t_n^B||^2)`` at ``radii[r] e^{i angles[a]}``.
    """

    verdict: str                      # similar, not-similar, inconclusive
    radii: np.ndarray
    angles: np.ndarray
    psi0: np.ndarray
    sup: float
    min_laplacian: float
    divergent: bool
    trend_slope: float
    bound: float
    tol: float
    witness_residual: Optional[float] = None
    witness_condition: Optional[float] = None
    preconditions: Dict[str, object] = field(default_factory=dict)
    reasons: Tuple[str, ...] = ()

    @property
    def witnessed(self) -> bool:
        return self.witness_residual is not None and self.witness_residual < WITNESS_TOL

    @property
    def label(self) -> str:
        if self.verdict == "similar" and self.witnessed:
            return "similar (witnessed)"
        return self.verdict

    def profile_rows(self):
        for i, r in enumerate(self.radii):
            for j, a in enumerate(self.angles):
                yield float(r), float(a), float(self.psi0[i, j])


def psi0_function(A: FlagOperator, B: FlagOperator):
    """Log ratio of the last-block section norms, shifted to vanish at the origin.

    The shift removes the constant that a rescaled kernel contributes, so the
    verdict does not depend on how either kernel is normalised.
    """
    pa, pb = section_norm_provider(A, A.n), section_norm_provider(B, B.n)
    c0 = np.log(pa(np.zeros(1)) / pb(np.zeros(1)))[0]
    return lambda w: np.log(pa(w) / pb(w)) - c0


def radial_trend(radii: np.ndarray, mag: np.ndarray, samples: int = TREND_SAMPLES) -> Tuple[bool, float]:
    """Whether the last samples increase strictly, and the slope against ``log 1/(1 - r^2)``."""
    r, m = np.asarray(radii)[-samples:], np.asarray(mag)[-samples:]
    increasing = bool(np.all(np.diff(m) > 0))
    L = -np.log1p(-r ** 2)
    slope = float(np.polyfit(L, m, 1)[0]) if r.size >= 2 else 0.0
    return increasing, slope


def similarity_test(A: FlagOperator, B: FlagOperator, radii=SIM_RADII, bound: float = SIM_BOUND,
                    tol: float = SIM_TOL, angles: int = SIM_ANGLES, phis=None, orders=None,
                    build_witness: bool = True) -> SimilarityVerdict:
    """Three-valued similarity verdict from the radial profile of ``psi0``.

    not-similar
        ``|psi0|`` (maximum over angles) increases over the last five radii and
        either exceeds ``bound`` at the outermost radius or grows with slope at least
        0.5 against ``log 1/(1 - r^2)``.
    similar
        ``sup |psi0| <= bound`` and the 5-point Laplacian of ``psi0`` is at least
        ``-tol`` at every sample.
    inconclusive
        Anything else, or failed hypotheses (reported in ``preconditions``).
    """
    radii = np.asarray(radii, dtype=float)
    _, ang, pts = polar_grid(radii, angles)
    pre = check_similarity_hypotheses(A, B, phis, orders)
    f = psi0_function(A, B)
    psi = f(pts)
    mag = np.max(np.abs(psi), axis=1)
    sup = float(np.max(mag))
    hL = SIM_LAPLACE_H
    inner = np.minimum(np.abs(pts), 1 - 3 * hL) * np.exp(1j * np.angle(pts))
    lap = (f(inner + hL) + f(inner - hL) + f(inner + 1j * hL) + f(inner - 1j * hL)
           - 4 * f(inner)) / hL ** 2
    min_lap = float(np.min(lap))
    increasing, slope = radial_trend(radii, mag)
    divergent = increasing and (mag[-1] > bound or slope >= TREND_SLOPE)
    common = dict(radii=radii, angles=ang, psi0=psi, sup=sup, min_laplacian=min_lap,
                  divergent=divergent, trend_slope=slope, bound=bound, tol=tol, preconditions=pre)
    if pre["failures"]:
        return SimilarityVerdict("inconclusive", reasons=tuple(pre["failures"]), **common)
    if divergent:
        return SimilarityVerdict("not-similar", reasons=(
            f"|psi0| diverges: {mag[-1]:.4g} at r={radii[-1]:.3g}, slope {slope:.3g} in log 1/(1-r^2)",),
            **common)
    if sup <= bound and min_lap >= -tol:
        wres = wcond = None
        reasons = ["psi0 bounded and subharmonic on the samples"]
        if build_witness:
            try:
                wit = similarity_witness(A, B, phis, check=False)
                wres, wcond = wit["residual"], wit["condition"]
            except WitnessConstructionError as exc:
                reasons.append(f"witness construction failed: {exc}")
                return SimilarityVerdict("inconclusive", witness_residual=exc.residual,
                                         reasons=tuple(reasons), **common)
        return SimilarityVerdict("similar", witness_residual=wres, witness_condition=wcond,
                                 reasons=tuple(reasons), **common)
    reasons = []
    if sup > bound:
        reasons.append(f"sup |psi0| = {sup:.4g} exceeds {bound}")
    if min_lap < -tol:
        reasons.append(f"Laplacian of psi0 reaches {min_lap:.4g}")
    return SimilarityVerdict("inconclusive", reasons=tuple(reasons), **common)


def _section_seeds(T: FlagOperator) -> List[np.ndarray]:
    return [T.chain(i, T.n) @ T.frame_seed for i in range(1, T.n + 1)]


def _ofb_witness(A: FlagOperator, B: FlagOperator) -> Tuple[np.ndarray, float]:
    # X_i maps t_i^A(w) to t_i^B(w) for every w; on seeds this reads X_i Q_i^A = Q_i^B
    blocks, worst = [], 0.0
    for QA, QB in zip(_section_seeds(A), _section_seeds(B)):
        Xt, *_ = np.linalg.lstsq(QA.T, QB.T, rcond=None)
        Xi = Xt.T
        r = spectral_norm(Xi @ QA - QB) / max(spectral_norm(QB), 1e-300)
        worst = max(worst, r)
        blocks.append(Xi)
    sizes = [b.shape[0] for b in blocks]
    off = np.concatenate(([0], np.cumsum(sizes))).astype(int)
    X = np.zeros((off[-1], off[-1]), dtype=complex)
    for i, b in enumerate(blocks):
        X[off[i]:off[i + 1], off[i]:off[i + 1]] = b
    return X, worst


def similarity_witness(A: FlagOperator, B: FlagOperator, phis=None, check: bool = True) -> Dict[str, object]:
    """Block-diagonal witness ``X`` with ``X A = B X`` for operators with matching data.

    Both operators are first reduced to bidiagonal form by unipotent witnesses;
    the bidiagonal witness sends each eigen-section ``t_i^A(w)`` to ``t_i^B(w)``
    and is found by least squares on the frame seeds.  The pieces are composed
    and the residual is measured on the corner compressed by the degree budget.

    Returns
    -------
    dict with ``X``, ``residual``, ``condition`` and ``lstsq_residual``.

    Raises
    ------
    PreconditionError
        When ``check`` is set and the hypotheses fail.
    WitnessConstructionError
        Least-squares residual above ``1e-4``.
    """
    if check:
        pre = check_similarity_hypotheses(A, B, phis)
        if pre["failures"]:
            raise PreconditionError(pre["failures"])
    if A.n != B.n or A.sizes != B.sizes:
        raise PreconditionError(["operators have different block shapes"])
    A0, WA = reduce_to_ofb(A, check=False)
    B0, WB = reduce_to_ofb(B, check=False)
    X0, lsq = _ofb_witness(A0, B0)
    if not lsq < LSTSQ_TOL:
        raise WitnessConstructionError(f"least-squares residual {lsq:.3g}", lsq)
    budget = max(A.degree_budget(), B.degree_budget())
    idx = block_corner_index(A.sizes, budget)
    # X0: A0 -> B0, WA: A0 -> A, WB: B0 -> B, so WB X0 WA^{-1}: A -> B
    X = WB.X @ X0 @ WA.X_inv
    res = witness_residual(X, A.assembled, B.assembled, idx)
    return {"X": X, "residual": res, "condition": float(np.linalg.cond(X)),
            "lstsq_residual": lsq}


# ---------------------------------------------------------------- weight growth

@dataclass(frozen=True)
class PropertyHEstimate:
    n: np.ndarray
    samples: np.ndarray
    window: int
    verdict: str                      # diverges, fails, inconclusive


def property_h_estimate(space1: KernelSpace, space2: KernelSpace, window: Optional[int] = None) -> PropertyHEstimate:
    """Growth of ``n sqrt(a_{1,n} / a_{2,n})`` for ``n = 1 .. N - 1``.

    diverges
        increasing over the last ``window`` samples and the last sample exceeds ten
        times the first one.
    fails
        decreasing over the window and the last sample is below 1.
    """
    N = min(space1.N, space2.N)
    window = max(N // 4, 2) if window is None else int(window)
    if window > N or window < 2:
        raise ValueError(f"window must be in 2..{N}")
    n = np.arange(1, N)
    s = n * np.sqrt(space1.a[1:N] / space2.a[1:N])
    tail = s[-window:]
    d = np.diff(tail)
    if np.all(d > 0) and s[-1] > 10 * s[0]:
        verdict = "diverges"
    elif np.all(d < 0) and s[-1] < 1:
        verdict = "fails"
    else:
        verdict = "inconclusive"
    return PropertyHEstimate(n, s, window, verdict)
