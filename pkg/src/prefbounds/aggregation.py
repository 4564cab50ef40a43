"""Second-order aggregation residuals and pointwise aggregate moment functions.

Individual Euler and intratemporal conditions survive aggregation up to
correction factors (the residuals ``xi`` and ``xi_lab``) driven by the
cross-sectional variance of individual-to-aggregate consumption shares.
This module evaluates those residuals and the per-period aggregated
moment functions whose instrumented expectations are weakly positive
under the model (equalities where the borrowing constraint never binds).

All operations accept scalars or aligned numpy arrays and broadcast.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError


@dataclass
class PreferenceTheta:
    """Preference parameters: relative risk aversion ``omega``, inverse
    Frisch elasticity ``eta``, external habit ``h``, discount ``beta``."""

    omega: float
    eta: float
    h: float
    beta: float

    def __post_init__(self):
        vals = (self.omega, self.eta, self.h, self.beta)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite preference parameter in {vals}")
        if self.omega <= 0.0:
            raise ValidationError(f"omega must be > 0, got {self.omega}")
        if self.eta <= 0.0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if not 0.0 <= self.h < 1.0:
            raise ValidationError(f"h must lie in [0, 1), got {self.h}")
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta must lie in (0, 1), got {self.beta}")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.eta, self.h, self.beta])


@dataclass
class AggregateObs:
    """One evaluation point of the aggregate moment functions.

    Consumption enters at three dates because of the habit; hours, wages
    and the return enter at the two dates bridged by the Euler equation.
    ``B_t`` is the optional extensive margin (fraction of constrained
    households).
    """

    C_t: float
    C_prev: float
    C_next: float
    R_next: float
    var_share_t: float = 0.0
    var_share_next: float = 0.0
    L_t: float = 1.0
    L_next: float = 1.0
    W_t: float = 1.0
    W_next: float = 1.0
    B_t: float | None = None

    def __post_init__(self):
        for name in ("C_t", "C_prev", "C_next", "R_next",
                     "L_t", "L_next", "W_t", "W_next"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be positive")
        if self.var_share_t < 0.0 or self.var_share_next < 0.0:
            raise ValidationError("var_share must be nonnegative")
        if self.B_t is not None and not 0.0 <= self.B_t <= 1.0:
            raise ValidationError(f"B_t must lie in [0, 1], got {self.B_t}")


def _habit_factor(theta, C_t, C_prev, where=""):
    """(1 - h C_prev / C_t), validated positive."""
    fac = 1.0 - theta.h * np.asarray(C_prev, dtype=float) / np.asarray(C_t, dtype=float)
    if np.any(fac <= 0.0):
        bad = np.atleast_1d(fac <= 0.0)
        idx = int(np.argmax(bad))
        raise DomainError(
            f"habit-adjusted consumption nonpositive{where} "
            f"(first offending period index {idx} for h={theta.h})")
    return fac


def xi_consumption(theta: PreferenceTheta, C_t, C_prev, var_share_t):
    """Aggregation residual for the Euler condition:
    ``1 + [omega(omega+1)/2] (1 - h C_prev/C_t)^{-2} Var(c_i/C_t)``."""
    var = np.asarray(var_share_t, dtype=float)
    if np.any(var < 0.0):
        raise ValidationError("var_share_t must be nonnegative")
    fac = _habit_factor(theta, C_t, C_prev, where=" in xi_consumption")
    coef = theta.omega * (theta.omega + 1.0) / 2.0
    return 1.0 + coef * fac ** (-2.0) * var


def xi_labor(theta: PreferenceTheta, C_t, C_prev, var_share_t):
    """Aggregation residual for the intratemporal condition:
    ``1 + [omega(eta+omega)/(2 eta^2)] (1 - h C_prev/C_t)^{-2} Var(c_i/C_t)``."""
    var = np.asarray(var_share_t, dtype=float)
    if np.any(var < 0.0):
        raise ValidationError("var_share_t must be nonnegative")
    fac = _habit_factor(theta, C_t, C_prev, where=" in xi_labor")
    coef = theta.omega * (theta.eta + theta.omega) / (2.0 * theta.eta ** 2)
    return 1.0 + coef * fac ** (-2.0) * var


def habit_growth_mu(theta: PreferenceTheta, C_prev, C_t, C_next):
    """Habit-adjusted consumption-growth marginal utility ratio
    ``((C_next - h C_t)/(C_t - h C_prev))^{-omega}``."""
    C_prev = np.asarray(C_prev, dtype=float)
    C_t = np.asarray(C_t, dtype=float)
    C_next = np.asarray(C_next, dtype=float)
    num = C_next - theta.h * C_t
    den = C_t - theta.h * C_prev
    if np.any(num <= 0.0) or np.any(den <= 0.0):
        raise DomainError(
            f"habit-adjusted consumption nonpositive at h={theta.h}")
    return (num / den) ** (-theta.omega)


def euler_moment(theta: PreferenceTheta, obs: AggregateObs):
    """Aggregated Euler moment
    ``1 - beta ((C_next - h C_t)/(C_t - h C_prev))^{-omega}
    (Xi_next/Xi_t) R_next``; weakly positive in instrumented expectation."""
    return euler_moment_values(
        theta, obs.C_prev, obs.C_t, obs.C_next, obs.R_next,
        obs.var_share_t, obs.var_share_next)


def euler_moment_values(theta, C_prev, C_t, C_next, R_next,
                        var_share_t, var_share_next):
    """Array form of :func:`euler_moment` over aligned observations."""
    mu = habit_growth_mu(theta, C_prev, C_t, C_next)
    xi_t = xi_consumption(theta, C_t, C_prev, var_share_t)
    xi_next = xi_consumption(theta, C_next, C_t, var_share_next)
    return 1.0 - theta.beta * mu * (xi_next / xi_t) * np.asarray(R_next, dtype=float)


def intratemporal_moment(theta: PreferenceTheta, obs: AggregateObs):
    """Second aggregated inequality, combining the Euler condition with
    the intratemporal labor-supply condition:
    ``1 - beta (Xi_next/Xi_t) (Xilab_t/Xilab_next)^eta
    (L_next/L_t)^eta (W_t/W_next) R_next``."""
    return intratemporal_moment_values(
        theta, obs.C_prev, obs.C_t, obs.C_next, obs.R_next,
        obs.var_share_t, obs.var_share_next,
        obs.L_t, obs.L_next, obs.W_t, obs.W_next)


def intratemporal_moment_values(theta, C_prev, C_t, C_next, R_next,
                                var_share_t, var_share_next,
                                L_t, L_next, W_t, W_next):
    """Array form of :func:`intratemporal_moment`."""
    xi_t = xi_consumption(theta, C_t, C_prev, var_share_t)
    xi_next = xi_consumption(theta, C_next, C_t, var_share_next)
    xl_t = xi_labor(theta, C_t, C_prev, var_share_t)
    xl_next = xi_labor(theta, C_next, C_t, var_share_next)
    L_ratio = np.asarray(L_next, dtype=float) / np.asarray(L_t, dtype=float)
    W_ratio = np.asarray(W_t, dtype=float) / np.asarray(W_next, dtype=float)
    return (1.0 - theta.beta * (xi_next / xi_t)
            * (xl_t / xl_next) ** theta.eta
            * L_ratio ** theta.eta * W_ratio
            * np.asarray(R_next, dtype=float))


def intratemporal_equality(theta: PreferenceTheta, obs: AggregateObs):
    """Intratemporal equality moment
    ``((C_next - h C_t)/(C_t - h C_prev))^{-omega}
    - (Xilab_t/Xilab_next)^eta (L_next/L_t)^eta (W_t/W_next)``;
    mean zero under the model."""
    return intratemporal_equality_values(
        theta, obs.C_prev, obs.C_t, obs.C_next,
        obs.var_share_t, obs.var_share_next,
        obs.L_t, obs.L_next, obs.W_t, obs.W_next)


def intratemporal_equality_values(theta, C_prev, C_t, C_next,
                                  var_share_t, var_share_next,
                                  L_t, L_next, W_t, W_next):
    """Array form of :func:`intratemporal_equality`."""
    mu = habit_growth_mu(theta, C_prev, C_t, C_next)
    xl_t = xi_labor(theta, C_t, C_prev, var_share_t)
    xl_next = xi_labor(theta, C_next, C_t, var_share_next)
    L_ratio = np.asarray(L_next, dtype=float) / np.asarray(L_t, dtype=float)
    W_ratio = np.asarray(W_t, dtype=float) / np.asarray(W_next, dtype=float)
    return mu - (xl_t / xl_next) ** theta.eta * L_ratio ** theta.eta * W_ratio
