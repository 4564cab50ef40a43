"""Ingestion of macro time series and survey cross-sections.

Raw inputs are CSV files with nominal aggregates, a price deflator,
population, and quarterly nominal interest rates.  The ingestion step
produces the per-capita real series and ex-post real gross returns used
by the moment system:

- real per-capita consumption ``C = C_tot / (Pop * P) * 100``
- per-capita hours ``L = H_tot / Pop`` and hourly wage ``W = W_tot / H_tot``
- inflation ``pi_t = ln(P_t / P_{t-1})``
- ex-post real return ``ln R_{t+1} = ln(1 + i_t) - ln(1 + pi_{t+1})``

Survey cross-sections are reduced to the weighted variance of household
consumption shares used by the aggregation residuals.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError

#: raw columns required by :func:`ingest`
RAW_COLUMNS = ("C_tot", "Pop", "P")


@dataclass
class MacroPanel:
    """Ingested per-capita real panel plus the raw frame it came from."""

    frame: pd.DataFrame
    return_columns: tuple = ()
    raw: pd.DataFrame | None = field(default=None, repr=False)


def _require(frame: pd.DataFrame, cols) -> None:
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise ValidationError(f"missing raw columns: {missing}")


def inflation(P) -> np.ndarray:
    """Log inflation ln(P_t / P_{t-1}); NaN in the first period."""
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0.0):
        raise ValidationError("price deflator must be positive")
    out = np.full(P.size, np.nan)
    out[1:] = np.log(P[1:] / P[:-1])
    return out


def real_return(i_rate, pi) -> np.ndarray:
    """Ex-post gross real return aligned at t+1:

    ``ln R_{t+1} = ln(1 + i_t) - ln(1 + pi_{t+1})``

    so ``R[t+1] = (1 + i[t]) / (1 + pi[t+1])``; NaN where undefined.
    """
    i_rate = np.asarray(i_rate, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if i_rate.size != pi.size:
        raise ValidationError("rate and inflation series must align")
    if np.any(i_rate[~np.isnan(i_rate)] <= -1.0):
        raise ValidationError("net rates must exceed -100%")
    out = np.full(i_rate.size, np.nan)
    out[1:] = (1.0 + i_rate[:-1]) / (1.0 + pi[1:])
    return out


def ingest(raw: pd.DataFrame, rate_columns=(), hours_column=None,
           wage_column=None) -> MacroPanel:
    """Build the estimation panel from raw nominal series.

    ``rate_columns`` maps output return names to raw nominal quarterly
    rate columns, e.g. ``{"R_g": "i_g"}``.  Hours and wage columns are
    optional (labor margin off without them).
    """
    _require(raw, RAW_COLUMNS)
    rate_columns = dict(rate_columns)
    _require(raw, rate_columns.values())
    if "date" in raw.columns:
        try:
            periods = pd.PeriodIndex(raw["date"], freq="Q")
        except Exception as exc:
            raise ValidationError(
                f"dates are not parseable as quarters: {exc}") from None
        steps = np.diff(periods.asi8)
        if np.any(steps != 1):
            raise ValidationError(
                "dates must be contiguous quarterly and increasing")
    if np.any(raw["Pop"].to_numpy(dtype=float) <= 0.0):
        raise ValidationError("population must be positive")
    P = raw["P"].to_numpy(dtype=float)
    pi = inflation(P)
    out = pd.DataFrame(index=raw.index)
    out["C"] = raw["C_tot"].to_numpy(dtype=float) \
        / (raw["Pop"].to_numpy(dtype=float) * P) * 100.0
    out["pi"] = pi
    if hours_column is not None:
        _require(raw, [hours_column])
        H = raw[hours_column].to_numpy(dtype=float)
        out["L"] = H / raw["Pop"].to_numpy(dtype=float)
        if wage_column is not None:
            _require(raw, [wage_column])
            out["W"] = raw[wage_column].to_numpy(dtype=float) / H
    for name, col in rate_columns.items():
        out[name] = real_return(raw[col].to_numpy(dtype=float), pi)
    if "t" in raw.columns:
        out.insert(0, "t", raw["t"].to_numpy())
    else:
        out.insert(0, "t", np.arange(len(raw)))
    return MacroPanel(frame=out, return_columns=tuple(rate_columns),
                      raw=raw)


def shf_annual_consumption(survey: pd.DataFrame, rent="rent_monthly",
                           cars="cars_annual", durables="durables_annual",
                           nondurables="nondurables_monthly") -> np.ndarray:
    """Annual nominal household consumption from survey components:

    ``12 * (monthly rent + annual cars/12 + annual durables/12
    + monthly nondurables)``.
    """
    _require(survey, [rent, cars, durables, nondurables])
    monthly = (survey[rent].to_numpy(dtype=float)
               + survey[cars].to_numpy(dtype=float) / 12.0
               + survey[durables].to_numpy(dtype=float) / 12.0
               + survey[nondurables].to_numpy(dtype=float))
    return 12.0 * monthly


def weighted_variance(values, weights) -> float:
    """Population variance with survey weights (weights normalized)."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size != weights.size or values.size == 0:
        raise ValidationError("values and weights must align and be nonempty")
    if np.any(weights < 0.0) or weights.sum() <= 0.0:
        raise ValidationError("weights must be nonnegative with positive sum")
    w = weights / weights.sum()
    mean = float(w @ values)
    return float(w @ (values - mean) ** 2)


def shf_variance_recipe(survey: pd.DataFrame, weight_column="weight",
                        **component_columns) -> dict:
    """Weighted variance of household consumption shares.

    Returns the weighted variance of annual consumption and of the
    consumption share (household consumption over the weighted mean),
    the latter being the dispersion measure the aggregation residuals
    consume.
    """
    _require(survey, [weight_column])
    c = shf_annual_consumption(survey, **component_columns)
    if np.any(c <= 0.0):
        raise ValidationError("household consumption must be positive")
    w = survey[weight_column].to_numpy(dtype=float)
    var_nom = weighted_variance(c, w)
    wn = w / w.sum()
    mean = float(wn @ c)
    var_share = weighted_variance(c / mean, w)
    return {"mean": mean, "variance": var_nom, "var_share": var_share,
            "n_households": int(c.size)}


def attach_var_share(panel: MacroPanel, var_share: float) -> MacroPanel:
    """Attach a constant dispersion measure to the estimation frame."""
    if var_share < 0.0:
        raise ValidationError("var_share must be nonnegative")
    frame = panel.frame.copy()
    frame["var_share"] = var_share
    return MacroPanel(frame=frame, return_columns=panel.return_columns,
                      raw=panel.raw)
