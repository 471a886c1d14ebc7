"""The three estimators behind one step interface: EKF, robust GM-EKF,
and a standard unscented Kalman filter baseline.

A model object must provide f(x), jac_f(x), g(x), jac_h(x) and the
dimensions n, m; batched f_batch/g_batch (columns of states) are used
when present.  Measurements may be MeasurementFrame objects or plain
vectors.

The GM-EKF correction recasts the update as a batch regression stacking
the measurements on top of the predicted state treated as pseudo-
measurements.  Leverage weights from projection statistics bound the
influence of outlying rows, the prewhitened regression is solved by
iteratively reweighted least squares under the Huber cost, and the
posterior covariance comes from the estimator's total influence
function.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import NumericalError
from .robust_stats import (
    HuberConfig,
    InnovationMatrix,
    RobustWeights,
    efficiency_correction,
    huber_rho,
    outlier_weights,
    projection_statistics,
    robust_scale,
)


@dataclass(frozen=True)
class FilterState:
    """Estimate and error covariance at time index k."""

    x_hat: np.ndarray
    sigma: np.ndarray
    k: int = 0

    def __post_init__(self):
        n = self.x_hat.size
        if self.sigma.shape != (n, n):
            raise ValueError("sigma must be n x n")


@dataclass(frozen=True)
class NoiseModel:
    """Process (W) and measurement (R) noise covariances."""

    W: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name, M in (("W", self.W), ("R", self.R)):
            M = np.asarray(M)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        # W may be semidefinite (zero process noise is legitimate); R must
        # support whitening and gain solves.
        if np.linalg.eigvalsh(_sym(np.asarray(self.W, dtype=float))).min() < -1e-10:
            raise ValueError("W must be positive semidefinite")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("R must be positive definite") from exc

    @classmethod
    def diagonal(cls, n: int, m: int, w: float = 1e-4, r: float = 1e-4) -> "NoiseModel":
        return cls(W=w * np.eye(n), R=r * np.eye(m))

    @cached_property
    def chol_R(self) -> np.ndarray:
        """Lower Cholesky factor of R (R is constant across a run)."""
        return np.linalg.cholesky(self.R)


@dataclass(frozen=True)
class RegressionForm:
    """Prewhitened batch regression y = A x + xi with leverage weights."""

    y: np.ndarray
    A: np.ndarray
    w: np.ndarray
    m_prime: int
    s: float | None = None


@dataclass(frozen=True)
class GmekfHistory:
    """Innovation and predicted state of the previous step, kept for the
    two-column outlier-identification cloud."""

    innovation: np.ndarray
    prediction: np.ndarray


@dataclass(frozen=True)
class IrlsResult:
    x: np.ndarray
    iterations: int
    converged: bool
    objective_trace: tuple[tuple[float, float], ...]
    s: float


@dataclass(frozen=True)
class GmekfStepInfo:
    """Per-step diagnostics of the robust filter."""

    irls_iterations: int
    irls_converged: bool
    objective_trace: tuple[tuple[float, float], ...]
    scale: float
    weights: RobustWeights
    history: GmekfHistory


@dataclass(frozen=True)
class UkfConfig:
    """Sigma-point scaling parameters."""

    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _as_measurement(z, m: int) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(z, "to_vector"):
        zv, valid = z.to_vector(), np.asarray(z.valid, dtype=bool)
    else:
        zv = np.asarray(z, dtype=float)
        valid = np.ones(zv.size, dtype=bool)
    if zv.size != m:
        raise ValueError(f"measurement has {zv.size} channels, model expects {m}")
    return zv, valid


def _f_cols(model, X: np.ndarray) -> np.ndarray:
    if hasattr(model, "f_batch"):
        return model.f_batch(X)
    return np.column_stack([model.f(X[:, i]) for i in range(X.shape[1])])


def _g_cols(model, X: np.ndarray) -> np.ndarray:
    if hasattr(model, "g_batch"):
        return model.g_batch(X)
    return np.column_stack([model.g(X[:, i]) for i in range(X.shape[1])])


# ---------------------------------------------------------------------------
# Extended Kalman filter


def ekf_predict(fs: FilterState, noise: NoiseModel, model) -> FilterState:
    """One-step state and covariance prediction."""
    x_pred = model.f(fs.x_hat)
    F = model.jac_f(fs.x_hat)
    sigma = _sym(F @ fs.sigma @ F.T + noise.W)
    return FilterState(x_hat=x_pred, sigma=sigma, k=fs.k + 1)


def ekf_correct(
    pred: FilterState, z, noise: NoiseModel, model, mask_invalid: bool = False
) -> FilterState:
    """Kalman gain correction of a predicted state."""
    zv, valid = _as_measurement(z, model.m)
    H = model.jac_h(pred.x_hat)
    gx = model.g(pred.x_hat)
    R = noise.R
    if mask_invalid and not valid.all():
        keep = np.flatnonzero(valid)
        zv, gx, H = zv[keep], gx[keep], H[keep]
        R = R[np.ix_(keep, keep)]
    S = H @ pred.sigma @ H.T + R
    try:
        K = np.linalg.solve(S, H @ pred.sigma).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("gain computation failed") from exc
    x = pred.x_hat + K @ (zv - gx)
    sigma = _sym((np.eye(pred.x_hat.size) - K @ H) @ pred.sigma)
    return FilterState(x_hat=x, sigma=sigma, k=pred.k)


def ekf_step(
    fs: FilterState, z, noise: NoiseModel, model, mask_invalid: bool = False
) -> FilterState:
    return ekf_correct(ekf_predict(fs, noise, model), z, noise, model, mask_invalid)


# ---------------------------------------------------------------------------
# GM-EKF


def gmekf_build_regression(z, pred: FilterState, model, gx=None, H=None):
    """Stack measurements and predicted state into the batch pair
    (z_tilde, H_tilde): the linearized observation block on top, the
    identity block for the prediction pseudo-measurements below."""
    zv, _ = _as_measurement(z, model.m)
    x = pred.x_hat
    if gx is None:
        gx = model.g(x)
    if H is None:
        H = model.jac_h(x)
    z_tilde = np.concatenate([zv - gx + H @ x, x])
    H_tilde = np.vstack([H, np.eye(x.size)])
    return z_tilde, H_tilde


def gmekf_prewhiten(
    z_tilde: np.ndarray,
    H_tilde: np.ndarray,
    noise: NoiseModel,
    pred_sigma: np.ndarray,
) -> RegressionForm:
    """Whiten the batch regression by the Cholesky factor of
    blockdiag(R, predicted covariance); the whitened error then has unit
    covariance.  Triangular solves only, no explicit inverse."""
    n = pred_sigma.shape[0]
    m = z_tilde.size - n
    L_R = _chol_or_fail(noise.R, "prediction covariance not PD")
    L_S = _chol_or_fail(pred_sigma, "prediction covariance not PD")
    y = np.concatenate(
        [
            solve_triangular(L_R, z_tilde[:m], lower=True),
            solve_triangular(L_S, z_tilde[m:], lower=True),
        ]
    )
    A = np.vstack(
        [
            solve_triangular(L_R, H_tilde[:m], lower=True),
            solve_triangular(L_S, H_tilde[m:], lower=True),
        ]
    )
    return RegressionForm(y=y, A=A, w=np.ones(y.size), m_prime=y.size)


def _chol_or_fail(M: np.ndarray, msg: str) -> np.ndarray:
    try:
        return cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(msg) from exc


def build_innovation_matrix(
    innovation: np.ndarray,
    prediction: np.ndarray,
    history: GmekfHistory | None,
    meas_scale: np.ndarray,
    state_scale: np.ndarray,
) -> InnovationMatrix:
    """Two-column cloud for outlier identification.

    Rows pair the previous and current value of each regression row.
    Entries are standardized: innovations by their nominal one-step
    scale, predicted-state rows by the prediction standard deviation
    after centering at the previous prediction (the mixed physical units
    of the stacked vector would otherwise masquerade as leverage).  With
    no history the current column is duplicated, degrading the cloud to
    one-step dispersion.
    """
    cur_meas = innovation / meas_scale
    if history is None:
        prev_meas = cur_meas
        state_rows = np.zeros((prediction.size, 2))
    else:
        prev_meas = history.innovation / meas_scale
        dstate = (prediction - history.prediction) / state_scale
        state_rows = np.column_stack([np.zeros_like(dstate), dstate])
    Z = np.vstack([np.column_stack([prev_meas, cur_meas]), state_rows])
    return InnovationMatrix(Z=Z)


def gmekf_weights(
    innovation: np.ndarray,
    prediction: np.ndarray,
    history: GmekfHistory | None,
    meas_scale: np.ndarray,
    state_scale: np.ndarray,
    cfg: HuberConfig,
) -> RobustWeights:
    """Projection statistics of the innovation cloud mapped through the
    leverage weight function.

    The cloud is standardized to unit nominal noise, so the dispersion
    floor of 1 keeps noise-level rows unflagged even when the observed
    stream is quieter than the noise model claims."""
    Z = build_innovation_matrix(innovation, prediction, history, meas_scale, state_scale)
    ps = projection_statistics(Z.Z, mad_floor=1.0)
    return RobustWeights(ps=ps, w=outlier_weights(ps, cfg.d))


def _weighted_lstsq(A: np.ndarray, y: np.ndarray, q: np.ndarray) -> np.ndarray:
    sq = np.sqrt(q)
    sol, _, rank, _ = np.linalg.lstsq(sq[:, None] * A, sq * y, rcond=None)
    if rank < A.shape[1]:
        raise NumericalError("rank deficient")
    return sol


def gmekf_irls(reg: RegressionForm, cfg: HuberConfig, x0: np.ndarray) -> IrlsResult:
    """Iteratively reweighted least squares on the whitened regression.

    Residuals are standardized by the robust scale times the leverage
    weight; each sweep solves the normal equations with Huber weights
    q = psi(r_s)/r_s and stops when the sup-norm step falls under the
    configured tolerance.  The robust scale is refreshed from the
    current residuals every sweep unless cfg.refresh_scale is off.
    A zero scale means an exact fit; the plain whitened least-squares
    solution is returned in that case.
    """
    A, y, w = reg.A, reg.y, reg.w
    x = np.asarray(x0, dtype=float).copy()
    trace: list[tuple[float, float]] = []
    s = None
    converged = False
    iterations = 0
    for _ in range(cfg.max_irls_iters):
        r = y - A @ x
        if s is None or cfg.refresh_scale:
            s = robust_scale(r, reg.m_prime)
            if s == 0.0 and np.any(r != 0.0):
                # majority of rows fit exactly; rescue the scale from the
                # nonzero residuals so outliers still get rejected
                nz = np.abs(r[r != 0.0])
                s = 1.4826 * float(np.median(nz))
        if s == 0.0:
            # every residual vanishes: the iterate already fits exactly
            x = _weighted_lstsq(A, y, np.ones_like(y))
            iterations += 1
            converged = True
            break
        r_s = r / (s * w)
        abs_rs = np.abs(r_s)
        q = np.where(abs_rs <= cfg.c, 1.0, cfg.c / np.maximum(abs_rs, 1e-300))
        j_pre = float(np.sum(w**2 * huber_rho(r_s, cfg.c)))
        x_new = _weighted_lstsq(A, y, q)
        r_new = y - A @ x_new
        j_post = float(np.sum(w**2 * huber_rho(r_new / (s * w), cfg.c)))
        trace.append((j_pre, j_post))
        step = float(np.max(np.abs(x_new - x)))
        x = x_new
        iterations += 1
        if step <= cfg.irls_tol:
            converged = True
            break
    return IrlsResult(
        x=x,
        iterations=iterations,
        converged=converged,
        objective_trace=tuple(trace),
        s=float(s) if s is not None else 0.0,
    )


def gmekf_update_covariance(reg: RegressionForm, cfg: HuberConfig) -> np.ndarray:
    """Posterior covariance from the total influence function:
    kappa(c) * (A'A)^-1 (A' diag(w^2) A) (A'A)^-1."""
    A, w = reg.A, reg.w
    M = A.T @ A
    N = (A * (w**2)[:, None]).T @ A
    try:
        X = np.linalg.solve(M, N)
        sigma = np.linalg.solve(M, X.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("rank deficient") from exc
    return efficiency_correction(cfg.c) * _sym(sigma)


def gmekf_step(
    fs: FilterState,
    z,
    noise: NoiseModel,
    model,
    cfg: HuberConfig = HuberConfig(),
    history: GmekfHistory | None = None,
    mask_invalid: bool = False,
) -> tuple[FilterState, GmekfStepInfo]:
    """One full robust step: predict, build the batch regression,
    weight, prewhiten, solve by IRLS, and update the covariance.

    Returns the corrected state together with per-step diagnostics;
    info.history feeds the next call.  A non-convergent IRLS is reported
    through info.irls_converged, not raised: the last iterate is used.
    """
    zv, valid = _as_measurement(z, model.m)

    x_pred = model.f(fs.x_hat)
    F = model.jac_f(fs.x_hat)
    sigma_pred = _sym(F @ fs.sigma @ F.T + noise.W)

    gx = model.g(x_pred)
    H = model.jac_h(x_pred)
    R = noise.R
    if mask_invalid and not valid.all():
        keep = np.flatnonzero(valid)
        zv, gx, H = zv[keep], gx[keep], H[keep]
        R = R[np.ix_(keep, keep)]
    innov = zv - gx

    meas_scale = np.sqrt(np.einsum("ij,jk,ik->i", H, sigma_pred, H) + np.diag(R))
    state_scale = np.sqrt(np.diag(sigma_pred))
    hist = history if history is not None and history.innovation.size == innov.size else None
    weights = gmekf_weights(innov, x_pred, hist, meas_scale, state_scale, cfg)

    z_tilde = np.concatenate([innov + H @ x_pred, x_pred])
    H_tilde = np.vstack([H, np.eye(x_pred.size)])
    L_R = noise.chol_R if R is noise.R else _chol_or_fail(R, "prediction covariance not PD")
    L_S = _chol_or_fail(sigma_pred, "prediction covariance not PD")
    m = innov.size
    y = np.concatenate(
        [
            solve_triangular(L_R, z_tilde[:m], lower=True),
            solve_triangular(L_S, z_tilde[m:], lower=True),
        ]
    )
    A = np.vstack(
        [
            solve_triangular(L_R, H_tilde[:m], lower=True),
            solve_triangular(L_S, H_tilde[m:], lower=True),
        ]
    )
    reg = RegressionForm(y=y, A=A, w=weights.w, m_prime=y.size)

    irls = gmekf_irls(reg, cfg, x0=x_pred)
    sigma_new = gmekf_update_covariance(reg, cfg)
    reg = replace(reg, s=irls.s)

    info = GmekfStepInfo(
        irls_iterations=irls.iterations,
        irls_converged=irls.converged,
        objective_trace=irls.objective_trace,
        scale=irls.s,
        weights=weights,
        history=GmekfHistory(innovation=innov, prediction=x_pred),
    )
    return FilterState(x_hat=irls.x, sigma=sigma_new, k=fs.k + 1), info


# ---------------------------------------------------------------------------
# Unscented Kalman filter


def _sigma_points(x: np.ndarray, sigma: np.ndarray, cfg: UkfConfig):
    n = x.size
    lam = cfg.alpha**2 * (n + cfg.kappa) - n
    c = n + lam
    try:
        L = np.linalg.cholesky(c * sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance not PD") from exc
    X = np.empty((n, 2 * n + 1))
    X[:, 0] = x
    X[:, 1 : n + 1] = x[:, None] + L
    X[:, n + 1 :] = x[:, None] - L
    wm = np.full(2 * n + 1, 1.0 / (2.0 * c))
    wm[0] = lam / c
    wc = wm.copy()
    wc[0] += 1.0 - cfg.alpha**2 + cfg.beta
    return X, wm, wc


def _recombine_mean(cols: np.ndarray, wm: np.ndarray) -> np.ndarray:
    # Center-relative summation: exact for linear maps despite the large
    # +-1/alpha^2 weights of the scaled sigma-point set.
    return cols[:, 0] + (cols[:, 1:] - cols[:, :1]) @ wm[1:]


def ukf_step(
    fs: FilterState,
    z,
    noise: NoiseModel,
    model,
    cfg: UkfConfig = UkfConfig(),
    mask_invalid: bool = False,
) -> FilterState:
    """Standard additive-noise unscented step with 2n+1 symmetric sigma
    points, regenerated after the time update."""
    zv, valid = _as_measurement(z, model.m)

    X, wm, wc = _sigma_points(fs.x_hat, fs.sigma, cfg)
    Xf = _f_cols(model, X)
    x_pred = _recombine_mean(Xf, wm)
    Dx = Xf - x_pred[:, None]
    sigma_pred = _sym((Dx * wc) @ Dx.T + noise.W)

    X2, wm2, wc2 = _sigma_points(x_pred, sigma_pred, cfg)
    Zs = _g_cols(model, X2)
    R = noise.R
    if mask_invalid and not valid.all():
        keep = np.flatnonzero(valid)
        zv, Zs = zv[keep], Zs[keep]
        R = R[np.ix_(keep, keep)]
    z_pred = _recombine_mean(Zs, wm2)
    Dz = Zs - z_pred[:, None]
    Dx2 = X2 - x_pred[:, None]
    S = _sym((Dz * wc2) @ Dz.T + R)
    Pxz = (Dx2 * wc2) @ Dz.T
    try:
        K = np.linalg.solve(S, Pxz.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("gain computation failed") from exc
    x = x_pred + K @ (zv - z_pred)
    sigma = _sym(sigma_pred - K @ S @ K.T)
    return FilterState(x_hat=x, sigma=sigma, k=fs.k + 1)
