"""Mixed-frequency extraction of the quarterly constrained-household share.

A triennial survey measures the (log) constrained proportion exactly but
rarely; a quarterly indebtedness proportion observes it every period up
to a persistent measurement wedge.  Both are cast in a linear Gaussian
state-space model whose state stacks lags of the log proportion and of
the log wedge; a missing-data Kalman filter/smoother interpolates the
quarterly series and maximum likelihood fits the persistence and
signal-to-noise parameters.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.optimize

from .errors import NumericalError, ValidationError


@dataclass
class StateSpaceModel:
    """Linear Gaussian state-space model ``x' = T x + w``, ``y = Z x + v``."""

    T: np.ndarray
    Q: np.ndarray
    Z: np.ndarray
    H: np.ndarray
    a0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        n = self.T.shape[0]
        p = self.Z.shape[0]
        if self.T.shape != (n, n) or self.Q.shape != (n, n):
            raise ValidationError("transition/state-noise dimensions differ")
        if self.Z.shape != (p, n) or self.H.shape != (p, p):
            raise ValidationError("observation dimensions differ")
        if self.a0.shape != (n,) or self.P0.shape != (n, n):
            raise ValidationError("initial-state dimensions differ")


@dataclass
class FilterResult:
    a_pred: np.ndarray  # (T, n)
    P_pred: np.ndarray  # (T, n, n)
    a_filt: np.ndarray
    P_filt: np.ndarray
    loglik: float


@dataclass
class ExtractionResult:
    """Quarterly constrained-share series implied by the fitted model."""

    b_filtered: np.ndarray  # level series exp(filtered log-b)
    b_smoothed: np.ndarray
    loglik: float
    params: dict
    gain: float


def steady_gain(ratio: float) -> float:
    """Steady-state update weight ``(ratio + 1)/(2 ratio + 1)`` where
    ``ratio`` is the wedge-to-signal variance ratio."""
    if ratio < 0.0:
        raise ValidationError(f"variance ratio must be >= 0, got {ratio}")
    return (ratio + 1.0) / (2.0 * ratio + 1.0)


def kalman_filter(model: StateSpaceModel, y: np.ndarray) -> FilterResult:
    """Missing-data Kalman filter.

    ``y`` is (T, p) with NaN marking unobserved entries; the update
    conditions on the observed subset each period and the log-likelihood
    sums the predictive log densities of observed rows only.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    Tn = y.shape[0]
    n = model.T.shape[0]
    a = model.a0.copy()
    P = model.P0.copy()
    a_pred = np.empty((Tn, n))
    P_pred = np.empty((Tn, n, n))
    a_filt = np.empty((Tn, n))
    P_filt = np.empty((Tn, n, n))
    loglik = 0.0
    for t in range(Tn):
        a_pred[t] = a
        P_pred[t] = P
        obs = np.isfinite(y[t])
        if obs.any():
            Z = model.Z[obs]
            H = model.H[np.ix_(obs, obs)]
            v = y[t, obs] - Z @ a
            F = Z @ P @ Z.T + H
            F = 0.5 * (F + F.T)
            if not np.all(np.isfinite(F)):
                raise NumericalError(
                    f"innovation covariance is not finite at period {t}")
            try:
                cF = scipy.linalg.cho_factor(F)
            except scipy.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"innovation covariance not positive definite at "
                    f"period {t}") from exc
            K = scipy.linalg.cho_solve(cF, Z @ P).T
            a = a + K @ v
            P = P - K @ F @ K.T
            P = 0.5 * (P + P.T)
            k = int(obs.sum())
            logdet = 2.0 * np.sum(np.log(np.diag(cF[0])))
            loglik += -0.5 * (k * np.log(2.0 * np.pi) + logdet
                              + v @ scipy.linalg.cho_solve(cF, v))
        a_filt[t] = a
        P_filt[t] = P
        a = model.T @ a
        P = model.T @ P @ model.T.T + model.Q
    return FilterResult(a_pred=a_pred, P_pred=P_pred, a_filt=a_filt,
                        P_filt=P_filt, loglik=float(loglik))


def rts_smoother(model: StateSpaceModel, fr: FilterResult) -> np.ndarray:
    """Fixed-interval smoother; returns smoothed state means (T, n)."""
    Tn = fr.a_filt.shape[0]
    a_s = fr.a_filt.copy()
    P_s = fr.P_filt[-1].copy()
    for t in range(Tn - 2, -1, -1):
        P_next_pred = fr.P_pred[t + 1]
        J = fr.P_filt[t] @ model.T.T @ np.linalg.pinv(P_next_pred)
        a_s[t] = fr.a_filt[t] + J @ (a_s[t + 1] - fr.a_pred[t + 1])
        P_s = fr.P_filt[t] + J @ (P_s - P_next_pred) @ J.T
    return a_s


def _companion(rho, n):
    """n-lag companion matrix of a scalar AR(1)."""
    T = np.zeros((n, n))
    T[0, 0] = rho
    for i in range(1, n):
        T[i, i - 1] = 1.0
    return T


def build_model(rho_b, rho_z, sig2_b, sig2_z, obs_var_pi, obs_var_b,
                n_avg: int = 8) -> StateSpaceModel:
    """Mixed-frequency model for the constrained share.

    State: ``n_avg`` lags each of the log constrained share ``b`` and the
    log measurement wedge ``z``.  Observation row 0 is the quarterly log
    indebtedness proportion ``b_t + z_t``; row 1 is the ``1/n_avg``-
    weighted average of the ``n_avg`` most recent log-b states, observed
    only at survey dates.
    """
    if not (abs(rho_b) < 1.0 and abs(rho_z) < 1.0):
        raise ValidationError("both persistence parameters must be in (-1, 1)")
    if sig2_b < 0.0 or sig2_z < 0.0:
        raise ValidationError("state variances must be nonnegative")
    n = 2 * n_avg
    T = np.zeros((n, n))
    T[:n_avg, :n_avg] = _companion(rho_b, n_avg)
    T[n_avg:, n_avg:] = _companion(rho_z, n_avg)
    Q = np.zeros((n, n))
    Q[0, 0] = sig2_b
    Q[n_avg, n_avg] = sig2_z
    Z = np.zeros((2, n))
    Z[0, 0] = 1.0
    Z[0, n_avg] = 1.0
    Z[1, :n_avg] = 1.0 / n_avg
    H = np.diag([obs_var_pi, obs_var_b])
    a0 = np.zeros(n)
    P0 = scipy.linalg.solve_discrete_lyapunov(T, Q)
    P0 = 0.5 * (P0 + P0.T)
    return StateSpaceModel(T=T, Q=Q, Z=Z, H=H, a0=a0, P0=P0)


def _stack_observations(pi_obs, b_obs):
    pi_obs = np.asarray(pi_obs, dtype=float)
    b_obs = np.asarray(b_obs, dtype=float)
    if pi_obs.shape != b_obs.shape:
        raise ValidationError("observation series must share their length")
    return np.column_stack([pi_obs, b_obs])


def mle_fit(pi_obs, b_obs, obs_var_b, init=None, bounds=None,
            n_avg: int = 8, obs_var_pi=None) -> dict:
    """Fit (rho_b, rho_z, sig2_b, sig2_z) by maximum likelihood.

    ``pi_obs`` is the quarterly log indebtedness proportion (NaN where
    missing), ``b_obs`` the sparse log survey measure.  The observation
    variance of the quarterly row defaults to 1% of the variance of the
    indebtedness measure; the survey-row variance is calibrated by the
    caller.  Optimization is derivative-free (Nelder-Mead) with a soft
    penalty outside the bounds.
    """
    y = _stack_observations(pi_obs, b_obs)
    if obs_var_pi is None:
        finite = np.isfinite(y[:, 0])
        obs_var_pi = 0.01 * float(np.var(y[finite, 0]))
    init = init or {"rho_b": 0.8, "rho_z": 0.8, "sig2_b": 0.05,
                    "sig2_z": 0.05}
    bounds = bounds or {"rho_b": (-0.995, 0.995), "rho_z": (-0.995, 0.995),
                        "sig2_b": (1e-8, 10.0), "sig2_z": (0.0, 10.0)}
    names = ("rho_b", "rho_z", "sig2_b", "sig2_z")
    lo = np.array([bounds[k][0] for k in names])
    hi = np.array([bounds[k][1] for k in names])
    x0 = np.array([init[k] for k in names])

    def negloglik(x):
        if np.any(x < lo) or np.any(x > hi):
            return 1e12 + 1e6 * float(np.sum(np.maximum(lo - x, 0.0)
                                             + np.maximum(x - hi, 0.0)))
        model = build_model(*x, obs_var_pi=obs_var_pi, obs_var_b=obs_var_b,
                            n_avg=n_avg)
        try:
            return -kalman_filter(model, y).loglik
        except NumericalError:
            return 1e12

    f0 = negloglik(x0)
    if not np.isfinite(f0) or f0 >= 1e12:
        raise ValidationError("likelihood not finite at the initial point")
    res = scipy.optimize.minimize(
        negloglik, x0, method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 4000})
    fitted = dict(zip(names, res.x))
    fitted["loglik"] = -res.fun
    fitted["loglik_init"] = -f0
    fitted["converged"] = bool(res.success)
    fitted["obs_var_pi"] = obs_var_pi
    fitted["obs_var_b"] = obs_var_b
    fitted["ratio"] = fitted["sig2_z"] / obs_var_pi if obs_var_pi > 0 else np.inf
    return fitted


def extract_B(fitted: dict, pi_obs, b_obs, n_avg: int = 8
              ) -> ExtractionResult:
    """Quarterly constrained-share levels from the fitted model."""
    y = _stack_observations(pi_obs, b_obs)
    model = build_model(fitted["rho_b"], fitted["rho_z"],
                        fitted["sig2_b"], fitted["sig2_z"],
                        obs_var_pi=fitted["obs_var_pi"],
                        obs_var_b=fitted["obs_var_b"], n_avg=n_avg)
    fr = kalman_filter(model, y)
    a_s = rts_smoother(model, fr)
    gain = steady_gain(fitted["sig2_z"] / fitted["obs_var_pi"]
                       if fitted["obs_var_pi"] > 0 else np.inf)
    return ExtractionResult(
        b_filtered=np.exp(fr.a_filt[:, 0]),
        b_smoothed=np.exp(a_s[:, 0]),
        loglik=fr.loglik, params=dict(fitted), gain=gain)


def stylized_riccati_gain(ratio: float, tol: float = 1e-10,
                          max_iter: int = 1000) -> float:
    """Steady-state Kalman gain of the stylized two-shock update.

    The stylized system tracks the log share and its lag; the quarterly
    row observes the current share through a wedge with variance
    ``ratio`` (signal variance normalized to 1), and the second row
    reveals the lagged share exactly.  The converged gain on the
    quarterly innovation equals :func:`steady_gain` in closed form.
    """
    if ratio < 0.0:
        raise ValidationError(f"variance ratio must be >= 0, got {ratio}")
    rho = 0.9
    S = 1.0 + ratio  # innovation variance of the share process
    T = np.array([[rho, 0.0], [1.0, 0.0]])
    Q = np.array([[S, 0.0], [0.0, 0.0]])
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    H = np.diag([ratio, 1e-14])
    P = np.eye(2)
    K = np.zeros((2, 2))
    for _ in range(max_iter):
        F = Z @ P @ Z.T + H
        K_new = P @ Z.T @ np.linalg.inv(F)
        P_filt = P - K_new @ F @ K_new.T
        P_next = T @ P_filt @ T.T + Q
        if np.max(np.abs(P_next - P)) < tol and np.max(np.abs(K_new - K)) < tol:
            K = K_new
            break
        P, K = P_next, K_new
    else:
        raise NumericalError("Riccati recursion did not converge")
    return float(K[0, 0])


def extraction_frame(result: ExtractionResult, dates=None) -> pd.DataFrame:
    """Tabular output: date, filtered and smoothed levels, gain."""
    n = result.b_filtered.size
    if dates is None:
        dates = np.arange(n)
    return pd.DataFrame({
        "date": dates,
        "b_filtered": result.b_filtered,
        "b_smoothed": result.b_smoothed,
        "gain": np.full(n, result.gain),
    })
