"""Closed-form identification bounds and their toy-model oracle.

A single household with CRRA utility, exogenous two-point income, a
fixed interest rate, and a no-borrowing limit admits closed-form
objects under the linearized Euler equation: the reduced-form root
``rho = (beta (1 + r))^(1/omega)``, an interval of admissible rho values
from instrumented consumption-growth covariances, an upper bound on
risk aversion, the constrained-regime regression coefficients
``(lambda0, lambda1)``, and a survey-refinement threshold ``g``.  The
module also solves the toy model numerically (policy time iteration on
cash on hand) to serve as the oracle for all of these formulas.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import norm

from . import kernels
from .errors import ConvergenceError, DomainError, ValidationError

#: marker returned when risk aversion cannot be bounded
UNIDENTIFIED = "unidentified"


@dataclass
class ToyModel:
    """Buffer-stock toy model primitives."""

    beta: float = 0.9
    omega: float = 2.0
    r: float = 0.05
    y_vals: np.ndarray = field(
        default_factory=lambda: np.array([0.99, 1.01]))
    y_probs: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    x_max: float = 40.0
    n_grid: int = 1200

    def __post_init__(self):
        self.y_vals = np.asarray(self.y_vals, dtype=float)
        self.y_probs = np.asarray(self.y_probs, dtype=float)
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta must lie in (0, 1), got {self.beta}")
        if self.omega <= 0.0 or self.r <= -1.0:
            raise ValidationError("omega must be > 0 and r > -1")
        if np.any(self.y_vals <= 0.0):
            raise ValidationError("income support must be positive")
        if abs(self.y_probs.sum() - 1.0) > 1e-12 or np.any(self.y_probs < 0):
            raise ValidationError("income probabilities must sum to one")

    @property
    def rho(self) -> float:
        """Reduced-form root (beta (1 + r))^(1/omega)."""
        return (self.beta * (1.0 + self.r)) ** (1.0 / self.omega)

    @property
    def y_bar(self) -> float:
        return float(self.y_vals @ self.y_probs)

    def x_grid(self) -> np.ndarray:
        lo = min(0.5 * self.y_vals.min(), 0.1)
        lin = np.linspace(0.0, 1.0, self.n_grid)
        return lo + (self.x_max - lo) * lin ** 1.5


@dataclass
class ToySolution:
    """Converged consumption policy on the cash-on-hand grid."""

    model: ToyModel
    x_grid: np.ndarray
    c_pol: np.ndarray
    iterations: int

    def policy(self, x):
        """Consumption at cash on hand x (linear interp/extrapolation)."""
        x = np.asarray(x, dtype=float)
        c = np.interp(x, self.x_grid, self.c_pol)
        top = self.x_grid[-1]
        slope = ((self.c_pol[-1] - self.c_pol[-2])
                 / (self.x_grid[-1] - self.x_grid[-2]))
        high = x > top
        if np.any(high):
            c = np.where(high, self.c_pol[-1] + slope * (x - top), c)
        return c

    @property
    def x_star(self) -> float:
        """Largest grid point at which the borrowing constraint binds."""
        binding = np.isclose(self.c_pol, self.x_grid, rtol=0, atol=1e-9)
        if not binding.any():
            raise ValidationError(
                "no constrained region found; lower beta or widen the grid")
        return float(self.x_grid[np.flatnonzero(binding)[-1]])


def rho_identified_set(cov_y_dc: float, cov_y_c: float) -> tuple:
    """Admissible interval ``(0, 1 + cov_y_dc / cov_y_c]`` for rho from
    the instrumented consumption-growth covariance ratio."""
    if cov_y_c <= 0.0:
        raise ValidationError(
            f"cov(y, c) must be positive, got {cov_y_c}")
    return (0.0, 1.0 + cov_y_dc / cov_y_c)


def omega_upper_bound(beta: float, r: float, cov_y_c: float,
                      cov_y_dc: float):
    """Upper bound on risk aversion implied by the covariance restrictions:
    ``|log(beta (1 + r))| / log(cov_y_c / (cov_y_c - |cov_y_dc|))``.

    Returns the :data:`UNIDENTIFIED` marker when ``beta (1 + r) = 1``
    (consumption is a random walk and any omega fits).
    """
    br = beta * (1.0 + r)
    if abs(br - 1.0) < 1e-12:
        return UNIDENTIFIED
    if br > 1.0:
        raise DomainError(
            f"the bound requires an impatient household (beta(1+r) < 1), "
            f"got {br}")
    a = abs(cov_y_dc)
    if not 0.0 < a < cov_y_c:
        raise ValidationError(
            "need 0 < |cov(y, dc)| < cov(y, c) for a finite bound")
    return abs(np.log(br)) / np.log(cov_y_c / (cov_y_c - a))


def solve_toy_model(model: ToyModel, tol: float = 1e-12,
                    max_iter: int = 20000) -> ToySolution:
    """Policy time iteration for the linearized-Euler toy model.

    Off the constraint the policy satisfies ``rho c = E[c(x')]`` with
    ``x' = (1 + r)(x - c) + y'``; at low cash on hand the household
    consumes everything.  Iterates the kernel sweep to a fixed point.
    """
    x = model.x_grid()
    c = 0.5 * (x + model.y_bar)  # feasible, positive starting guess
    c = np.minimum(c, x + 1e-12)
    for it in range(max_iter):
        c_new = kernels.toy_policy_sweep(
            c, x, model.y_vals, model.y_probs, model.r, model.rho)
        err = np.max(np.abs(c_new - c))
        c = c_new
        if err < tol:
            return ToySolution(model=model, x_grid=x, c_pol=c,
                               iterations=it + 1)
    raise ConvergenceError(
        f"toy policy iteration stalled at change {err:.2e} after "
        f"{max_iter} sweeps")


def lambda_coefficients(model: ToyModel, solution: ToySolution
                        ) -> tuple[float, float]:
    """Closed-form constrained-regime coefficients ``(lambda1, lambda0)``:
    ``lambda1 = -rho`` and
    ``lambda0 = y_bar [1 - (rho/(1+r)) (1 - F_y(x*))]``."""
    rho = model.rho
    F = float(model.y_probs[model.y_vals <= solution.x_star + 1e-12].sum())
    lam1 = -rho
    lam0 = model.y_bar * (1.0 - rho / (1.0 + model.r) * (1.0 - F))
    return lam1, lam0


def simulate_toy_panel(model: ToyModel, solution: ToySolution, T: int = 40,
                       n_agents: int = 4000, seed: int = 0,
                       x0=None) -> pd.DataFrame:
    """Simulate households through the solved policy.

    Returns one row per agent-period with cash on hand, consumption, the
    constrained indicator, income, and next-period consumption (NaN in
    the final period).  Agents start spread over the grid unless ``x0``
    is given.
    """
    rng = np.random.default_rng(seed)
    if x0 is None:
        x = np.linspace(solution.x_star * 0.5, model.x_max * 0.8, n_agents)
    else:
        x = np.broadcast_to(np.asarray(x0, dtype=float), (n_agents,)).copy()
    rows = {"t": [], "agent": [], "x": [], "y": [], "c": [],
            "constrained": [], "y_next": [], "c_next": []}
    agent_ids = np.arange(n_agents)
    y_curr = np.full(n_agents, np.nan)  # unknown in the seed period
    for t in range(T):
        c = solution.policy(x)
        constrained = x <= solution.x_star + 1e-9
        c = np.where(constrained, x, c)
        y_next = rng.choice(model.y_vals, size=n_agents, p=model.y_probs)
        x_next = (1.0 + model.r) * (x - c) + y_next
        c_next = solution.policy(x_next)
        c_next = np.where(x_next <= solution.x_star + 1e-9, x_next, c_next)
        rows["t"].append(np.full(n_agents, t))
        rows["agent"].append(agent_ids)
        rows["x"].append(x)
        rows["y"].append(y_curr)
        rows["c"].append(c)
        rows["constrained"].append(constrained)
        rows["y_next"].append(y_next)
        rows["c_next"].append(c_next)
        x = x_next
        y_curr = y_next
    return pd.DataFrame({k: np.concatenate(v) for k, v in rows.items()})


def growth_panel_simulate(model: ToyModel, T: int = 40, n_agents: int = 4000,
                         seed: int = 0, solution: ToySolution | None = None
                         ) -> pd.DataFrame:
    """Consumption-growth panel for the linearized law of motion.

    Adds the growth decomposition columns: ``dc`` (realized growth) and
    the regime regressors used to recover ``(rho - 1, lambda0, lambda1)``.
    """
    solution = solution or solve_toy_model(model)
    panel = simulate_toy_panel(model, solution, T=T, n_agents=n_agents,
                               seed=seed)
    panel["dc"] = panel["c_next"] - panel["c"]
    panel["D"] = panel["constrained"].astype(float)
    panel["Dc"] = panel["D"] * panel["c"]
    return panel


def growth_regression(panel: pd.DataFrame) -> dict:
    """OLS of consumption growth on (c, constrained, constrained*c).

    Recovers ``rho - 1`` on the consumption slope, ``lambda0`` on the
    regime dummy and ``lambda1`` on the interaction.
    """
    X = panel[["c", "D", "Dc"]].to_numpy(dtype=float)
    y = panel["dc"].to_numpy(dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return {"rho_minus_1": float(coef[0]), "lambda0": float(coef[1]),
            "lambda1": float(coef[2])}


def iv_rho_estimate(panel: pd.DataFrame) -> float:
    """Instrumented slope ``cov(y, dc)/cov(y, c)`` using current income
    as the instrument; downward biased for ``rho - 1`` when constraints
    occasionally bind (the constraint wedge covaries negatively with
    income)."""
    sub = panel.dropna(subset=["dc", "y"])
    y = sub["y"].to_numpy(dtype=float)
    dc = sub["dc"].to_numpy(dtype=float)
    c = sub["c"].to_numpy(dtype=float)
    cov_y_dc = float(np.cov(y, dc)[0, 1])
    cov_y_c = float(np.cov(y, c)[0, 1])
    if abs(cov_y_c) < 1e-14:
        raise DomainError("income-consumption covariance numerically zero")
    return cov_y_dc / cov_y_c


def threshold_g(v: float, c: float, rho: float, rho_iv: float,
                lambda0: float, lambda1: float, sigma_eps: float) -> float:
    """Survey-refinement threshold using the standard-Normal CDF:

    ``g = [Phi((v - (rho-1)c)/s) - Phi((v - rho_iv c)/s)]
    / [Phi((v - (rho-1)c)/s) - Phi((v - lambda0 - (rho-1+lambda1)c)/s)]``

    The admissible refinement region for the constrained probability is
    ``(g, 1)``.  A degenerate denominator returns the boundary value 1
    with a warning.
    """
    if sigma_eps <= 0.0:
        raise ValidationError(f"sigma_eps must be > 0, got {sigma_eps}")
    a0 = (v - (rho - 1.0) * c) / sigma_eps
    a1 = (v - rho_iv * c) / sigma_eps
    a2 = (v - lambda0 - (rho - 1.0 + lambda1) * c) / sigma_eps
    num = norm.cdf(a0) - norm.cdf(a1)
    den = norm.cdf(a0) - norm.cdf(a2)
    if abs(den) < 1e-300:
        warnings.warn("degenerate threshold denominator (identical CDF "
                      "arguments); returning the boundary value 1",
                      stacklevel=2)
        return 1.0
    return float(num / den)


def threshold_g_of_p(p: float, v: float, c: float, rho: float,
                     lambda0: float, lambda1: float,
                     sigma_eps: float) -> float:
    """Threshold as a function of the constrained probability ``p``.

    The instrumented slope interpolates linearly between the frictionless
    value ``rho - 1`` (p = 0) and the fully constrained value
    ``rho - 1 + lambda1 + lambda0/c`` (p = 1), which delivers the
    boundary identities g(0) = 0 and g(1) = 1.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    if c <= 0.0:
        raise ValidationError(f"c must be positive, got {c}")
    rho_iv = (rho - 1.0) + p * (lambda1 + lambda0 / c)
    return threshold_g(v, c, rho, rho_iv, lambda0, lambda1, sigma_eps)


def linearization_gap(model: ToyModel, solution: ToySolution,
                      x_points) -> np.ndarray:
    """Approximation residual of the linearized growth equation:
    ``phi = E[c'] - (E[c'^(-omega)])^(-1/omega)`` at each cash-on-hand
    point, weakly positive by Jensen's inequality (convex marginal
    utility), mirroring the sign of the constraint wedge."""
    x_points = np.atleast_1d(np.asarray(x_points, dtype=float))
    out = np.empty(x_points.size)
    for i, x in enumerate(x_points):
        c = float(solution.policy(x))
        c = min(c, x)
        xp = (1.0 + model.r) * (x - c) + model.y_vals
        cp = np.minimum(solution.policy(xp), xp)
        ec = float(model.y_probs @ cp)
        emu = float(model.y_probs @ cp ** (-model.omega))
        out[i] = ec - emu ** (-1.0 / model.omega)
    return out


def refinement_curve(model: ToyModel, v: float = 0.0, c: float = 1.0,
                     sigma_eps: float = 0.1, n: int = 101,
                     lambda_scale: float = 1.0) -> pd.DataFrame:
    """Plot data for the g-versus-p refinement curve."""
    solution = solve_toy_model(model)
    lam1, lam0 = lambda_coefficients(model, solution)
    lam1, lam0 = lambda_scale * lam1, lambda_scale * lam0
    p = np.linspace(0.0, 1.0, n)
    g = np.array([threshold_g_of_p(pi, v, c, model.rho, lam0, lam1,
                                   sigma_eps) for pi in p])
    return pd.DataFrame({"p": p, "g": g})
