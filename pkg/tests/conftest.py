"""Shared fixtures: solved heterogeneous-agent model and simulated panels.

The model solve and the large panel are expensive, so they are built
once per session.  The acceptance panel uses the fixed seeds asserted by
the acceptance suite; the small panel is for module-level tests.
"""

import numpy as np
import pandas as pd
import pytest

from prefbounds.ks import KSParams, simulate_panel, solve_ks
from prefbounds.moments import attach_capital_return

#: fixed seeds used by the acceptance suite (documented in the README)
ACCEPTANCE_PANEL_SEED = 47
ACCEPTANCE_SOLVE_SEED = 0


@pytest.fixture(scope="session")
def ks_solution():
    return solve_ks(KSParams(), seed=ACCEPTANCE_SOLVE_SEED)


@pytest.fixture(scope="session")
def ks_panel_small(ks_solution):
    """Cheap panel for module tests (sampling noise is acceptable)."""
    return simulate_panel(ks_solution, T=200, n_agents=20_000,
                          burn_in=300, seed=7)


@pytest.fixture(scope="session")
def acceptance_panel(ks_solution):
    """Full-scale panel with the seed fixed by the acceptance suite."""
    return simulate_panel(ks_solution, T=200, n_agents=500_000,
                          burn_in=1200, seed=ACCEPTANCE_PANEL_SEED)


@pytest.fixture(scope="session")
def acceptance_frame(acceptance_panel):
    """Acceptance panel with the gross capital return attached."""
    return attach_capital_return(acceptance_panel.frame, delta=0.025)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture()
def synthetic_macro_raw():
    """Small raw macro frame in the ingestion schema."""
    rng = np.random.default_rng(3)
    T = 16
    return pd.DataFrame({
        "date": pd.period_range("2000Q1", periods=T, freq="Q").astype(str),
        "C_tot": 1000.0 * np.exp(np.cumsum(0.01 + 0.002
                                           * rng.standard_normal(T))),
        "Pop": np.full(T, 30.0),
        "P": np.exp(np.cumsum(np.full(T, 0.005))),
        "H_tot": 40.0 + rng.random(T),
        "W_tot": 500.0 + rng.random(T),
        "i_g": np.full(T, 0.02),
        "i_e": 0.03 + 0.01 * rng.standard_normal(T),
    })
