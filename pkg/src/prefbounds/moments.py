"""Instrument construction and stacked moment systems.

Positive instruments preserve the direction of the conditional moment
inequalities, so instrumented sample means of the per-period moment
functions are the estimating quantities.  The extensive-margin variant
augments each base row with the same row scaled by the inverse
constrained fraction ``1/B_t``, which sharpens identification whenever
``B_t`` varies over time.  Inequalities are reparameterized as
equalities through a nonnegative nuisance vector ``U``.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import aggregation
from .errors import ValidationError

#: transforms available for making instruments strictly positive
POSITIVITY_TRANSFORMS = ("exp", "level")


@dataclass
class MomentSystemConfig:
    """Configuration of the stacked moment system.

    ``instruments`` is a list of (variable, lag) pairs; variable
    ``"const"`` is the unit instrument.  ``returns`` names gross-return
    columns of the panel, one Euler (and optionally intratemporal)
    moment block per return.
    """

    instruments: list = field(
        default_factory=lambda: [("const", 0), ("C", 1), ("C", 2)])
    returns: list = field(default_factory=lambda: ["R"])
    use_extensive_margin: bool = False
    use_intratemporal: bool = False
    include_intratemporal_equality: bool = False
    positivity_transform: str = "exp"
    max_zero_b_frac: float = 0.05
    #: treat every row as an equality (constraint never binds, so the
    #: nuisance vector is identically zero and identification is point)
    all_equalities: bool = False

    def __post_init__(self):
        if not self.instruments:
            raise ValidationError("at least one instrument is required")
        if not self.returns:
            raise ValidationError("at least one return column is required")
        if self.positivity_transform not in POSITIVITY_TRANSFORMS:
            raise ValidationError(
                f"unknown positivity transform {self.positivity_transform!r}; "
                f"choose from {POSITIVITY_TRANSFORMS}")
        for item in self.instruments:
            if not (isinstance(item, (tuple, list)) and len(item) == 2):
                raise ValidationError(
                    f"instrument spec entries must be (variable, lag) pairs, "
                    f"got {item!r}")
            if int(item[1]) < 0:
                raise ValidationError("instrument lags must be nonnegative")


@dataclass
class NuisanceU:
    """Nonnegative nuisance means restoring moment equalities."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0.0) or not np.all(np.isfinite(self.values)):
            raise ValidationError("nuisance vector must be finite and >= 0")


@dataclass
class MomentSystem:
    """Assembled per-period moments and their sample mean."""

    per_period: np.ndarray  # (n, r)
    mean: np.ndarray  # (r,)
    labels: list
    dates: np.ndarray  # panel row indices of retained periods
    dropped_zero_b: int = 0

    def to_frame(self) -> pd.DataFrame:
        """Per-period moment rows as a DataFrame for external auditing."""
        out = pd.DataFrame(self.per_period, columns=self.labels)
        out.insert(0, "t", self.dates)
        return out


def attach_capital_return(frame: pd.DataFrame, delta: float) -> pd.DataFrame:
    """Add the gross capital return column ``R = 1 - delta + r_k``."""
    out = frame.copy()
    out["R"] = 1.0 - delta + out["r_k"].to_numpy(dtype=float)
    return out


def _moment_dates(frame, config):
    """Panel row indices at which every ingredient of the system exists."""
    T = len(frame)
    max_lag = max(int(lag) for _, lag in config.instruments)
    t_lo = max(1, max_lag)
    t_hi = T - 2
    if t_hi < t_lo:
        raise ValidationError(
            f"panel of length {T} too short for instrument lags up to "
            f"{max_lag}")
    return np.arange(t_lo, t_hi + 1)


def build_instruments(frame: pd.DataFrame, config: MomentSystemConfig):
    """Strictly positive instrument matrix aligned to the moment dates.

    Returns ``(X, labels, dates)`` where row i of X holds the instruments
    for the moment dated ``dates[i]``; lagged variables are standardized
    over the usable rows and mapped through the configured positivity
    transform.
    """
    dates = _moment_dates(frame, config)
    cols = []
    labels = []
    for var, lag in config.instruments:
        lag = int(lag)
        if var == "const":
            cols.append(np.ones(dates.size))
            labels.append("const")
            continue
        if var not in frame.columns:
            raise ValidationError(f"instrument variable {var!r} not in panel")
        series = frame[var].to_numpy(dtype=float)
        raw = series[dates - lag]
        if config.positivity_transform == "exp":
            sd = raw.std()
            z = (raw - raw.mean()) / sd if sd > 0 else raw - raw.mean()
            col = np.exp(z)
        else:  # level
            col = raw
        cols.append(col)
        labels.append(f"{var}.l{lag}")
    X = np.column_stack(cols)
    if np.any(X <= 0.0) or not np.all(np.isfinite(X)):
        raise ValidationError(
            "instrument matrix has nonpositive or non-finite entries after "
            f"the {config.positivity_transform!r} transform")
    return X, labels, dates


class MomentWorkspace:
    """Precomputed panel alignment for fast repeated evaluation over theta.

    Building instruments and slicing the panel once, then re-evaluating
    only the theta-dependent moment functions, keeps the per-draw cost of
    samplers and grid scans small.
    """

    def __init__(self, frame: pd.DataFrame, config: MomentSystemConfig):
        for col in ("C", "var_share"):
            if col not in frame.columns:
                raise ValidationError(f"panel is missing column {col!r}")
        for col in config.returns:
            if col not in frame.columns:
                raise ValidationError(
                    f"gross-return column {col!r} not in panel; attach it "
                    "before building moments")
        self.config = config
        X, xlabels, dates = build_instruments(frame, config)

        if config.use_extensive_margin:
            if "B" not in frame.columns:
                raise ValidationError(
                    "extensive-margin moments need a B column in the panel")
            B = frame["B"].to_numpy(dtype=float)[dates]
            zero = B <= 0.0
            n_zero = int(zero.sum())
            if n_zero > config.max_zero_b_frac * dates.size:
                raise ValidationError(
                    f"{n_zero}/{dates.size} periods have B=0, exceeding the "
                    f"{config.max_zero_b_frac:.0%} drop budget for the "
                    "extensive-margin system")
            keep = ~zero
            dates = dates[keep]
            X = X[keep]
            self.B = B[keep]
            self.dropped_zero_b = n_zero
        else:
            self.B = None
            self.dropped_zero_b = 0

        self.X = X
        self.instrument_labels = xlabels
        self.dates = dates

        C = frame["C"].to_numpy(dtype=float)
        var = frame["var_share"].to_numpy(dtype=float)
        self.C_prev = C[dates - 1]
        self.C_t = C[dates]
        self.C_next = C[dates + 1]
        self.var_t = var[dates]
        self.var_next = var[dates + 1]
        self.R_next = {name: frame[name].to_numpy(dtype=float)[dates + 1]
                       for name in config.returns}
        if config.use_intratemporal or config.include_intratemporal_equality:
            for col in ("L", "W"):
                if col not in frame.columns:
                    raise ValidationError(
                        f"intratemporal moments need column {col!r}")
            L = frame["L"].to_numpy(dtype=float)
            W = frame["W"].to_numpy(dtype=float)
            self.L_t, self.L_next = L[dates], L[dates + 1]
            self.W_t, self.W_next = W[dates], W[dates + 1]

        self.labels = self._make_labels()

    def _base_functions(self, theta):
        """Per-period values of each configured moment function."""
        funcs = []
        names = []
        for name in self.config.returns:
            m = aggregation.euler_moment_values(
                theta, self.C_prev, self.C_t, self.C_next,
                self.R_next[name], self.var_t, self.var_next)
            funcs.append(m)
            names.append(f"euler[{name}]")
            if self.config.use_intratemporal:
                mi = aggregation.intratemporal_moment_values(
                    theta, self.C_prev, self.C_t, self.C_next,
                    self.R_next[name], self.var_t, self.var_next,
                    self.L_t, self.L_next, self.W_t, self.W_next)
                funcs.append(mi)
                names.append(f"intra[{name}]")
        if self.config.include_intratemporal_equality:
            me = aggregation.intratemporal_equality_values(
                theta, self.C_prev, self.C_t, self.C_next,
                self.var_t, self.var_next,
                self.L_t, self.L_next, self.W_t, self.W_next)
            funcs.append(me)
            names.append("intra_eq")
        return funcs, names

    def _make_labels(self):
        theta_probe = aggregation.PreferenceTheta(1.0, 1.0, 0.0, 0.5)
        _, names = self._base_functions(theta_probe)
        labels = [f"{n}*{x}" for n in names for x in self.instrument_labels]
        if self.config.use_extensive_margin:
            labels += [f"{lab}/B" for lab in labels]
        return labels

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_equalities(self) -> int:
        """Number of trailing rows carrying equality (not inequality)
        contracts; their nuisance components are pinned at zero."""
        if not self.config.include_intratemporal_equality:
            return 0
        k = len(self.instrument_labels)
        scale = 2 if self.config.use_extensive_margin else 1
        return k * scale

    @property
    def equality_mask(self) -> np.ndarray:
        """Boolean mask over rows: True where the moment is an equality."""
        if self.config.all_equalities:
            return np.ones(self.n_rows, dtype=bool)
        mask = np.zeros(self.n_rows, dtype=bool)
        if not self.config.include_intratemporal_equality:
            return mask
        k = len(self.instrument_labels)
        # the equality block is the last moment function in each margin block
        half = self.n_rows // 2 if self.config.use_extensive_margin else self.n_rows
        mask[half - k:half] = True
        if self.config.use_extensive_margin:
            mask[self.n_rows - k:self.n_rows] = True
        return mask

    def per_period(self, theta) -> np.ndarray:
        """(n, r) matrix of instrumented per-period moments at theta."""
        funcs, _ = self._base_functions(theta)
        blocks = [f[:, None] * self.X for f in funcs]
        G = np.hstack(blocks)
        if self.config.use_extensive_margin:
            G = np.hstack([G, G / self.B[:, None]])
        return G

    def mean(self, theta) -> np.ndarray:
        return self.per_period(theta).mean(axis=0)


def stack_moments(frame: pd.DataFrame, theta, config: MomentSystemConfig
                  ) -> MomentSystem:
    """Assemble the stacked moment system at one parameter value."""
    ws = MomentWorkspace(frame, config)
    G = ws.per_period(theta)
    return MomentSystem(per_period=G, mean=G.mean(axis=0), labels=ws.labels,
                        dates=ws.dates, dropped_zero_b=ws.dropped_zero_b)


def reparameterization_residual(system: MomentSystem, U: NuisanceU
                                ) -> np.ndarray:
    """Equality-form residual ``mbar - U`` (zero when U = mbar exactly)."""
    if U.values.shape != system.mean.shape:
        raise ValidationError(
            f"nuisance length {U.values.shape} does not match the system "
            f"dimension {system.mean.shape}")
    return system.mean - U.values


def robustness_ordering(frame: pd.DataFrame, theta, B_reported, B_true,
                        config: MomentSystemConfig | None = None) -> dict:
    """Check the under-reporting ordering of extensive-margin moments.

    When the reported constrained fraction understates the truth
    (``0 < B_reported <= B_true``) and the base moment is pointwise
    nonnegative, scaling by the reported inverse can only enlarge the
    instrumented mean, so the inequality system stays valid.  Returns a
    report with the two mean vectors and any pointwise violations.
    """
    config = config or MomentSystemConfig()
    base_cfg = MomentSystemConfig(
        instruments=config.instruments, returns=config.returns,
        use_extensive_margin=False,
        use_intratemporal=config.use_intratemporal,
        include_intratemporal_equality=config.include_intratemporal_equality,
        positivity_transform=config.positivity_transform)
    ws = MomentWorkspace(frame, base_cfg)
    B_reported = np.asarray(B_reported, dtype=float)[ws.dates]
    B_true = np.asarray(B_true, dtype=float)[ws.dates]
    if np.any(B_reported <= 0.0) or np.any(B_true > 1.0):
        raise ValidationError("B series must satisfy 0 < B_reported and "
                              "B_true <= 1")
    if np.any(B_reported > B_true + 1e-15):
        raise ValidationError("B_reported must not exceed B_true anywhere")

    G = ws.per_period(theta)
    m_negative = int((G < 0.0).any(axis=1).sum())
    lhs = (G / B_reported[:, None]).mean(axis=0)
    rhs = (G / B_true[:, None]).mean(axis=0)
    return {
        "holds": bool(np.all(lhs >= rhs - 1e-12)),
        "lhs": lhs,
        "rhs": rhs,
        "periods_with_negative_m": m_negative,
        "labels": ws.labels,
    }
