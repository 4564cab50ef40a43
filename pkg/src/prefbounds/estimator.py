"""Continuously-updated GMM criterion for the inequality moment system.

The criterion is ``Q(theta, U) = 0.5 (mbar - U)' V+ (mbar - U)`` with the
long-run variance ``V`` recomputed at every theta (Newey-West, Bartlett
weights, truncated at first order by default) and ``V+`` its Moore-Penrose
pseudo-inverse.  The nonnegative nuisance vector ``U`` is profiled out in
closed form as a small nonnegative least-squares problem, leaving a
derivative-free outer minimization over theta alone.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .aggregation import PreferenceTheta
from .errors import NumericalError, ValidationError
from .moments import MomentWorkspace

THETA_NAMES = ("omega", "eta", "h", "beta")

#: admissible prior box used throughout estimation and inference
DEFAULT_BOUNDS = {
    "omega": (0.1, 6.0),
    "eta": (0.01, 10.0),
    "h": (0.01, 0.97),
    "beta": (0.95, 0.999),
}


class ThetaSpace:
    """Free/fixed split of the preference vector with box bounds.

    The samplers and optimizers work on the free sub-vector; fixed
    components are held at supplied values (e.g. no habit and no labor
    margin in the simulation experiments).
    """

    def __init__(self, free=("omega", "beta"), fixed=None, bounds=None):
        fixed = dict(fixed or {})
        bounds = dict(bounds or {})
        for name in free:
            if name not in THETA_NAMES:
                raise ValidationError(f"unknown parameter {name!r}")
            if name in fixed:
                raise ValidationError(f"{name!r} is both free and fixed")
        for name in THETA_NAMES:
            if name not in free and name not in fixed:
                raise ValidationError(
                    f"parameter {name!r} is neither free nor fixed")
        self.free = tuple(free)
        self.fixed = fixed
        self.bounds = np.array(
            [bounds.get(n, DEFAULT_BOUNDS[n]) for n in self.free])
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ValidationError("each bound must satisfy lo < hi")

    @property
    def dim(self) -> int:
        return len(self.free)

    def theta(self, x) -> PreferenceTheta:
        """PreferenceTheta from a free-parameter vector."""
        vals = dict(self.fixed)
        for name, v in zip(self.free, np.asarray(x, dtype=float)):
            vals[name] = float(v)
        # eta/h are irrelevant when fixed out of the moment functions
        vals.setdefault("eta", 1.0)
        vals.setdefault("h", 0.0)
        return PreferenceTheta(**vals)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.bounds[:, 0])
                    and np.all(x <= self.bounds[:, 1]))

    def sample(self, rng, n=1) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + (hi - lo) * rng.random((n, self.dim))

    def to_unbounded(self, x) -> np.ndarray:
        """Logit transform of each coordinate onto the real line."""
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        z = (np.asarray(x, dtype=float) - lo) / (hi - lo)
        z = np.clip(z, 1e-12, 1.0 - 1e-12)
        return np.log(z / (1.0 - z))

    def from_unbounded(self, y) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        z = 1.0 / (1.0 + np.exp(-np.asarray(y, dtype=float)))
        return lo + (hi - lo) * z


def newey_west_lrv(moment_matrix: np.ndarray, lag: int = 1) -> np.ndarray:
    """Long-run variance with Bartlett weights truncated at ``lag``.

    The input is demeaned internally; ``lag=0`` returns the sample
    covariance, ``lag=1`` uses weight 1/2 on the first autocovariance.
    """
    G = np.asarray(moment_matrix, dtype=float)
    n = G.shape[0]
    if lag < 0 or lag >= n:
        raise ValidationError(f"lag {lag} incompatible with n={n}")
    D = G - G.mean(axis=0)
    V = D.T @ D / n
    for j in range(1, lag + 1):
        w = 1.0 - j / (lag + 1.0)
        gamma = D[j:].T @ D[:-j] / n
        V = V + w * (gamma + gamma.T)
    V = 0.5 * (V + V.T)
    if not np.all(np.isfinite(V)):
        raise NumericalError("long-run variance has non-finite entries")
    return V


def pseudo_inverse(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric matrix."""
    V = 0.5 * (V + V.T)
    return np.linalg.pinv(V, rcond=tol, hermitian=True)


def _pinv_factor(V, tol):
    """L with V+ = L L' (via eigendecomposition, small eigenvalues cut)."""
    vals, vecs = np.linalg.eigh(0.5 * (V + V.T))
    cut = tol * max(vals.max(), 0.0) if vals.size else 0.0
    keep = vals > max(cut, 0.0)
    inv_sqrt = np.zeros_like(vals)
    inv_sqrt[keep] = 1.0 / np.sqrt(vals[keep])
    return vecs * inv_sqrt[None, :]


@dataclass
class CriterionContext:
    """Everything needed to evaluate the criterion at a candidate theta."""

    workspace: MomentWorkspace
    space: ThetaSpace
    lag: int = 1
    pinv_tol: float = 1e-10
    weighting: str = "newey-west"  # or "covariance"

    def __post_init__(self):
        if self.weighting not in ("newey-west", "covariance"):
            raise ValidationError(
                f"unknown weighting {self.weighting!r}")
        if self.workspace.dates.size <= self.workspace.n_rows:
            import warnings

            warnings.warn(
                f"sample size {self.workspace.dates.size} does not exceed "
                f"the number of moment rows {self.workspace.n_rows}",
                stacklevel=2)

    @property
    def n_periods(self) -> int:
        return int(self.workspace.dates.size)

    def _variance(self, G):
        lag = self.lag if self.weighting == "newey-west" else 0
        return newey_west_lrv(G, lag=lag)

    def criterion_parts(self, theta: PreferenceTheta):
        """(mbar, V) at theta."""
        G = self.workspace.per_period(theta)
        return G.mean(axis=0), self._variance(G)


def cu_gmm(theta: PreferenceTheta, U, context: CriterionContext) -> float:
    """Criterion value ``0.5 (mbar - U)' V+ (mbar - U)`` at (theta, U)."""
    U = np.asarray(U, dtype=float)
    if np.any(U < 0.0):
        raise ValidationError("nuisance vector must be nonnegative")
    mbar, V = context.criterion_parts(theta)
    if U.shape != mbar.shape:
        raise ValidationError(
            f"nuisance dimension {U.shape} != moment dimension {mbar.shape}")
    resid = mbar - U
    Vp = pseudo_inverse(V, context.pinv_tol)
    return 0.5 * float(resid @ Vp @ resid)


def optimal_nuisance(mbar, V, pinv_tol=1e-10, equality_mask=None):
    """Profile the nuisance out: projection of mbar onto the feasible
    orthant under the V+ metric, solved as nonnegative least squares.

    Components flagged by ``equality_mask`` carry equality contracts and
    are pinned at zero.
    """
    L = _pinv_factor(V, pinv_tol)
    A = L.T  # criterion = 0.5 || A (mbar - U) ||^2
    b = A @ mbar
    r = mbar.size
    if equality_mask is None:
        free = np.ones(r, dtype=bool)
    else:
        free = ~np.asarray(equality_mask, dtype=bool)
    U = np.zeros(r)
    if free.any():
        sol, _ = scipy.optimize.nnls(A[:, free], b)
        U[free] = sol
    resid = b - A[:, free] @ U[free] if free.any() else b
    return U, 0.5 * float(resid @ resid)


def profiled_criterion(theta: PreferenceTheta, context: CriterionContext):
    """(Q, U*) with the nuisance vector profiled out at theta."""
    mbar, V = context.criterion_parts(theta)
    U, Q = optimal_nuisance(mbar, V, context.pinv_tol,
                            context.workspace.equality_mask)
    return Q, U


@dataclass
class MinimizeResult:
    theta: PreferenceTheta
    x: np.ndarray
    U: np.ndarray
    Q_min: float
    n_starts: int
    starts: list = field(default_factory=list)


def minimize(context: CriterionContext, n_starts: int = 8, seed: int = 0,
             xatol: float = 1e-5, fatol: float = 1e-10) -> MinimizeResult:
    """Multi-start derivative-free minimization of the profiled criterion."""
    if n_starts < 1:
        raise ValidationError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    space = context.space
    lo, hi = space.bounds[:, 0], space.bounds[:, 1]

    def objective(x):
        xc = np.clip(x, lo, hi)
        Q, _ = profiled_criterion(space.theta(xc), context)
        return Q

    starts = space.sample(rng, n_starts)
    best = None
    diagnostics = []
    for i, x0 in enumerate(starts):
        res = scipy.optimize.minimize(
            objective, x0, method="Nelder-Mead",
            bounds=list(map(tuple, space.bounds)),
            options={"xatol": xatol, "fatol": fatol, "maxiter": 2000})
        diagnostics.append({"start": i, "x0": x0, "x": res.x, "Q": res.fun,
                            "success": bool(res.success)})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise NumericalError(
            f"all {n_starts} starts failed; diagnostics: {diagnostics}")
    x = np.clip(best.x, lo, hi)
    theta = space.theta(x)
    Q, U = profiled_criterion(theta, context)
    return MinimizeResult(theta=theta, x=x, U=U, Q_min=Q,
                          n_starts=n_starts, starts=diagnostics)


def criterion_surface(context: CriterionContext, grids: dict) -> np.ndarray:
    """Profiled criterion over a mesh of free-parameter grids.

    ``grids`` maps free parameter names to 1d arrays; returns an array of
    Q values with one axis per free parameter in ``context.space.free``
    order (parameters absent from ``grids`` must not be free).
    """
    space = context.space
    axes = []
    for name in space.free:
        if name not in grids:
            raise ValidationError(f"missing grid for free parameter {name!r}")
        axes.append(np.asarray(grids[name], dtype=float))
    mesh = np.meshgrid(*axes, indexing="ij")
    out = np.empty(mesh[0].shape)
    it = np.nditer(mesh[0], flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        x = np.array([m[idx] for m in mesh])
        Q, _ = profiled_criterion(space.theta(x), context)
        out[idx] = Q
    return out
