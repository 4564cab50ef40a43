"""Asset-pricing diagnostics built on the aggregated Euler equation.

Given a preference vector and aggregate series, this module computes the
heterogeneity-adjusted stochastic discount factor, the per-period Euler
distortions for any return series (in marginal-utility units and as a
share of marginal utility), the implied equity-premium prediction, and
two accounting decompositions: the implied risk-aversion contrast
between complete and incomplete markets, and the wage elasticity of the
labor aggregation residual.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .aggregation import PreferenceTheta, xi_consumption
from .errors import ValidationError


def _habit_levels(C: np.ndarray, h: float) -> np.ndarray:
    """Habit-adjusted consumption C_t - h C_{t-1} for t = 1..T-1."""
    lev = C[1:] - h * C[:-1]
    if np.any(lev <= 0.0):
        raise ValidationError(
            "habit-adjusted consumption must stay positive")
    return lev


def _xi_path(theta: PreferenceTheta, C: np.ndarray,
             var_share: np.ndarray) -> np.ndarray:
    """Aggregation residual for t = 1..T-1 (needs one lag of C)."""
    return np.array([
        xi_consumption(theta, C[t], C[t - 1], var_share[t])
        for t in range(1, C.size)])


def sdf_series(theta: PreferenceTheta, C, var_share) -> np.ndarray:
    """Heterogeneity-adjusted stochastic discount factor

    ``M_{t+1} = beta ((C_{t+1} - h C_t)/(C_t - h C_{t-1}))^(-omega)
    (Xi_{t+1}/Xi_t)``

    returned for t = 1..T-2 (one lag and one lead of consumption used).
    """
    C = np.asarray(C, dtype=float)
    var_share = np.asarray(var_share, dtype=float)
    if C.size != var_share.size or C.size < 3:
        raise ValidationError("need aligned C and var_share with T >= 3")
    lev = _habit_levels(C, theta.h)        # index t-1 -> C_t - h C_{t-1}
    xi = _xi_path(theta, C, var_share)     # same indexing
    growth = lev[1:] / lev[:-1]
    return theta.beta * growth ** (-theta.omega) * (xi[1:] / xi[:-1])


def marginal_utility(theta: PreferenceTheta, C) -> np.ndarray:
    """Aggregate marginal utility (C_t - h C_{t-1})^(-omega), t=1..T-1."""
    C = np.asarray(C, dtype=float)
    return _habit_levels(C, theta.h) ** (-theta.omega)


@dataclass
class DistortionResult:
    """Per-period and average Euler distortion for one return series."""

    per_period: np.ndarray      # mu_t in marginal-utility units, t=1..T-2
    share: np.ndarray           # mu_t / U'(C_t)
    mean: float                 # time average of per_period
    mean_share: float


def distortions(theta: PreferenceTheta, C, var_share, R
                ) -> DistortionResult:
    """Euler-equation distortion for gross return R (aligned with C):

    ``mu_t = (C_t - h C_{t-1})^(-omega)
    - beta (C_{t+1} - h C_t)^(-omega) (Xi_{t+1}/Xi_t) R_{t+1}``

    where ``R[t+1]`` is the return realized between t and t+1.
    """
    C = np.asarray(C, dtype=float)
    R = np.asarray(R, dtype=float)
    if R.size != C.size:
        raise ValidationError("R must be aligned with C")
    mu_prime = marginal_utility(theta, C)   # t = 1..T-1
    M = sdf_series(theta, C, var_share)     # t = 1..T-2
    up = mu_prime[:-1]                      # U'(C_t), t = 1..T-2
    mu = up * (1.0 - M * R[2:])
    share = mu / up
    return DistortionResult(per_period=mu, share=share,
                            mean=float(mu.mean()),
                            mean_share=float(share.mean()))


def premium_prediction(theta: PreferenceTheta, C, var_share, R_e, R_g
                       ) -> dict:
    """Model-implied log equity premium

    ``ln(E R_e / E R_g) ~ -(Cov(M, R_e) + mu_e - mu_g)/(1 - mu_g)``

    with the distortions expressed as shares of marginal utility.  The
    frictionless counterfactual sets both distortions to zero and the
    aggregation residual to one.
    """
    R_e = np.asarray(R_e, dtype=float)
    R_g = np.asarray(R_g, dtype=float)
    M = sdf_series(theta, C, var_share)
    de = distortions(theta, C, var_share, R_e)
    dg = distortions(theta, C, var_share, R_g)
    cov = float(np.cov(M, R_e[2:])[0, 1])
    predicted = -(cov + de.mean_share - dg.mean_share) / (1.0 - dg.mean_share)
    # frictionless: no distortions, no dispersion correction
    flat = PreferenceTheta(omega=theta.omega, eta=theta.eta, h=theta.h,
                           beta=theta.beta)
    C0 = np.asarray(C, dtype=float)
    M0 = sdf_series(flat, C0, np.zeros_like(C0))
    counterfactual = -float(np.cov(M0, R_e[2:])[0, 1])
    observed = float(np.log(R_e[2:].mean() / R_g[2:].mean()))
    return {"observed": observed, "predicted": predicted,
            "counterfactual": counterfactual,
            "cov_sdf_equity": cov, "mu_e_share": de.mean_share,
            "mu_g_share": dg.mean_share}


def bond_equity_rewrite(theta: PreferenceTheta, C, var_share, R_e, R_g
                        ) -> dict:
    """Residuals of the pricing-equation rewrites, zero by construction:

    ``M_{t+1} R_g_{t+1} - 1 + mu_g_t / U'(C_t) = 0``
    ``M_{t+1} (R_e_{t+1} - R_g_{t+1}) - (mu_g_t - mu_e_t)/U'(C_t) = 0``
    """
    R_e = np.asarray(R_e, dtype=float)
    R_g = np.asarray(R_g, dtype=float)
    M = sdf_series(theta, C, var_share)
    de = distortions(theta, C, var_share, R_e)
    dg = distortions(theta, C, var_share, R_g)
    bond = M * R_g[2:] - 1.0 + dg.share
    equity = M * (R_e[2:] - R_g[2:]) - (dg.share - de.share)
    return {"bond_residual": bond, "equity_residual": equity,
            "max_abs": float(max(np.abs(bond).max(),
                                 np.abs(equity).max()))}


def implied_omega_im(cov_RR: float, cov_xiR: float, cov_BR: float,
                     cov_kappaR: float, cov_dCR: float, beta: float,
                     R_bar: float) -> dict:
    """Log-linearized implied risk aversion with and without the
    incomplete-markets terms:

    ``omega_IM = [Cov(R', R) + Cov(Xi~, R)
    + ((1 - beta R_bar)/(beta R_bar)) (Cov(B~, R) + Cov(kappa~, R))]
    / Cov(dC', R)``

    ``omega_CM = Cov(R', R) / Cov(dC', R)``.
    """
    if cov_dCR == 0.0:
        raise ValidationError(
            "consumption-growth/return covariance must be nonzero")
    bR = beta * R_bar
    if bR <= 0.0:
        raise ValidationError("beta * R_bar must be positive")
    factor = (1.0 - bR) / bR
    omega_im = (cov_RR + cov_xiR
                + factor * (cov_BR + cov_kappaR)) / cov_dCR
    omega_cm = cov_RR / cov_dCR
    return {"omega_im": omega_im, "omega_cm": omega_cm,
            "margin_factor": factor}


def frisch_decomposition(theta: PreferenceTheta, C_prev: float, C_t: float,
                         var_share: float, eps_var_W: float,
                         eps_growth_W: float) -> dict:
    """Wage elasticity of the labor aggregation residual:

    ``eps = gamma1 eps_var_W - 2 h gamma2 eps_growth_W`` with

    ``gamma1 = omega (eta + omega) V / D``,
    ``gamma2 = V C_{t-1}/(C_t - h C_{t-1}) / D``,
    ``D = 2 eta^2 (1 - h C_{t-1}/C_t)^2 + omega (eta + omega) V``.
    """
    if C_prev <= 0.0 or C_t <= 0.0:
        raise ValidationError("consumption levels must be positive")
    if var_share < 0.0:
        raise ValidationError("var_share must be nonnegative")
    h, om, eta = theta.h, theta.omega, theta.eta
    lev = C_t - h * C_prev
    if lev <= 0.0:
        raise ValidationError(
            "habit-adjusted consumption must stay positive")
    D = 2.0 * eta ** 2 * (1.0 - h * C_prev / C_t) ** 2 \
        + om * (eta + om) * var_share
    gamma1 = om * (eta + om) * var_share / D
    gamma2 = var_share * (C_prev / lev) / D
    eps = gamma1 * eps_var_W - 2.0 * h * gamma2 * eps_growth_W
    return {"gamma1": gamma1, "gamma2": gamma2, "eps_xi_lab_W": eps}


def distortion_frame(theta: PreferenceTheta, frame: pd.DataFrame,
                     return_columns, consumption="C",
                     var_column="var_share") -> pd.DataFrame:
    """Tabulate per-period distortion shares for several return series."""
    C = frame[consumption].to_numpy(dtype=float)
    V = frame[var_column].to_numpy(dtype=float)
    out = {"t": np.arange(1, C.size - 1)}
    for col in return_columns:
        d = distortions(theta, C, V, frame[col].to_numpy(dtype=float))
        out[f"mu_{col}"] = d.per_period
        out[f"mu_{col}_share"] = d.share
    return pd.DataFrame(out)
