"""Robust statistics primitives: projection statistics, leverage weights,
Huber functions, robust scale, and the Gaussian efficiency correction.

All functions are pure and operate on plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import NumericalError

# Consistency factor making the MAD unbiased for the standard deviation
# of Gaussian data.
MAD_FACTOR = 1.4826

# Finite-sample correction for the robust scale, for small sample counts.
# The m' > 9 regime uses m'/(m' - 0.8) instead.
_B_TABLE = {
    2: 1.196,
    3: 1.495,
    4: 1.363,
    5: 1.206,
    6: 1.200,
    7: 1.140,
    8: 1.129,
    9: 1.107,
}


@dataclass(frozen=True)
class HuberConfig:
    """Tuning knobs of the robust estimator.

    c is the Huber breakpoint (quadratic/linear crossover of the cost),
    d the leverage threshold of the projection-statistics weight
    function.  Both default to 1.5, trading statistical efficiency at
    the Gaussian against robustness under contamination.  refresh_scale
    controls whether the robust scale is recomputed every IRLS sweep or
    frozen at the first one.
    """

    c: float = 1.5
    d: float = 1.5
    irls_tol: float = 0.01
    max_irls_iters: int = 50
    refresh_scale: bool = True

    def __post_init__(self):
        if self.c <= 0 or self.d <= 0 or self.irls_tol <= 0:
            raise ValueError("c, d and irls_tol must be positive")


@dataclass(frozen=True)
class RobustWeights:
    """Projection-statistic values and the leverage weights derived
    from them, one entry per regression row."""

    ps: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class InnovationMatrix:
    """Two-column point cloud pairing each regression row's value at the
    previous and current step: stacked [innovation; predicted state],
    the input cloud for projection statistics."""

    Z: np.ndarray

    def __post_init__(self):
        if self.Z.ndim != 2 or self.Z.shape[1] != 2:
            raise ValueError("innovation matrix must have exactly two columns")
        if not np.all(np.isfinite(self.Z)):
            raise ValueError("innovation matrix entries must be finite")


def projection_statistics(points: np.ndarray, mad_floor: float = 0.0) -> np.ndarray:
    """Projection statistic of each row of a point cloud.

    Every point is projected onto the unit directions running from the
    coordinatewise median through each cloud point; along each
    direction the projections are centered by their median and scaled
    by 1.4826 * MAD.  The statistic of a point is the largest absolute
    standardized projection over all usable directions.  Directions of
    zero length or zero MAD are skipped.

    mad_floor, when positive, is a lower bound on the per-direction
    dispersion.  Callers whose cloud is already standardized to unit
    nominal noise pass 1.0 so that rows within the modeled noise level
    are never flagged merely because the observed cloud happens to be
    tighter than modeled.

    Parameters
    ----------
    points : (N, p) array, one sample per row.

    Returns
    -------
    (N,) array of nonnegative PS values.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = pts.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points")

    center = np.median(pts, axis=0)
    dirs = pts - center
    norms = np.linalg.norm(dirs, axis=1)
    usable = norms > 1e-12
    if not np.any(usable):
        raise NumericalError("degenerate point cloud")
    unit = dirs[usable] / norms[usable, None]

    # proj[i, j] = projection of point i onto direction j
    proj = pts @ unit.T
    med = np.median(proj, axis=0)
    mad = MAD_FACTOR * np.median(np.abs(proj - med), axis=0)
    if mad_floor > 0.0:
        mad = np.maximum(mad, mad_floor)
    good = mad > 1e-12
    if not np.any(good):
        raise NumericalError("degenerate point cloud")
    standardized = np.abs(proj[:, good] - med[good]) / mad[good]
    return standardized.max(axis=1)


def outlier_weights(ps: np.ndarray, d: float) -> np.ndarray:
    """Leverage weight min(1, d^2 / PS^2) for each projection statistic.

    Points with PS <= d keep full weight; beyond the threshold the
    weight decays quadratically.  PS = 0 maps to weight 1.
    """
    ps = np.asarray(ps, dtype=float)
    if np.any(ps < 0):
        raise ValueError("projection statistics must be nonnegative")
    w = np.ones_like(ps)
    flagged = ps > d
    w[flagged] = (d / ps[flagged]) ** 2
    return w


def huber_rho(r, c: float):
    """Huber cost: 0.5 r^2 inside the breakpoint, linear outside."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    out = np.where(a < c, 0.5 * r * r, c * a - 0.5 * c * c)
    return out if out.ndim else float(out)


def huber_psi(r, c: float):
    """Derivative of the Huber cost: r clipped to [-c, c]."""
    r = np.asarray(r, dtype=float)
    out = np.clip(r, -c, c)
    return out if out.ndim else float(out)


def b_constant(m_prime: int) -> float:
    """Finite-sample correction of the robust scale estimator."""
    if m_prime < 2:
        raise ValueError("sample too small")
    if m_prime <= 9:
        return _B_TABLE[m_prime]
    return m_prime / (m_prime - 0.8)


def robust_scale(residuals: np.ndarray, m_prime: int | None = None) -> float:
    """Median-based dispersion estimate 1.4826 * b_m' * median |r_i|.

    Consistent for the standard deviation under Gaussian residuals.
    Returns 0 when all residuals vanish; callers must guard that case.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("residuals must be nonempty")
    if m_prime is None:
        m_prime = r.size
    return MAD_FACTOR * b_constant(m_prime) * float(np.median(np.abs(r)))


def efficiency_correction(c: float) -> float:
    """Gaussian variance inflation E[psi^2] / E[psi']^2 of the Huber
    estimator, evaluated in closed form.

    Equals 1.0369 at the default breakpoint c = 1.5 and tends to 1 in
    the least-squares limit c -> inf.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    inner = norm.cdf(c) - norm.cdf(-c)
    numerator = inner - 2.0 * c * norm.pdf(c) + 2.0 * c * c * norm.sf(c)
    return float(numerator / inner**2)
