"""Backend equivalence and basic behavior of the numeric kernels."""

import numpy as np
import pytest

from prefbounds import kernels
from prefbounds.backend import HAVE_NUMBA, active_backend
from prefbounds.ks import GridSpec, KSParams, joint_transition


def _egm_args():
    params = KSParams()
    grids = GridSpec(nk=60, nK=4)
    k_grid = grids.k_nodes()
    K_grid = grids.K_nodes(38.0)
    Pi = joint_transition(params)
    c_pol = np.tile(1.0 + 0.05 * k_grid, (2, grids.nK, 2, 1))
    b0 = np.array([0.1, 0.1])
    b1 = np.array([0.96, 0.96])
    return (c_pol, k_grid, K_grid, b0, b1, Pi, params.z_levels,
            params.u_rates, params.alpha, params.beta, params.delta,
            params.omega, params.nu, params.lbar)


def _toy_args():
    x = np.linspace(0.0, 20.0, 150)
    c = np.minimum(0.5 * (x + 1.0), x + 1e-12)
    return (c, x, np.array([0.9, 1.1]), np.array([0.5, 0.5]), 0.05, 0.97)


def test_active_backend_reports_known_value():
    assert active_backend() in ("numba", "numpy")


def test_egm_sweep_returns_positive_consumption():
    out = kernels.egm_sweep_numpy(*_egm_args())
    assert out.shape == (2, 4, 2, 60)
    assert np.all(out > 0.0)


def test_egm_sweep_consumption_increasing_in_assets():
    out = kernels.egm_sweep_numpy(*_egm_args())
    assert np.all(np.diff(out, axis=-1) > -1e-12)


def test_toy_sweep_constrained_region_consumes_everything():
    out = kernels.toy_policy_sweep_numpy(*_toy_args())
    x = _toy_args()[1]
    # at tiny cash on hand the constraint must bind
    assert out[1] == pytest.approx(x[1])
    assert np.all(out <= x + 1e-9)
    assert np.all(out >= -1e-12)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled backend unavailable")
def test_backends_agree_on_egm_sweep():
    args = _egm_args()
    a = kernels.egm_sweep_numpy(*args)
    b = kernels.egm_sweep_numba(*args)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled backend unavailable")
def test_backends_agree_on_toy_sweep():
    args = _toy_args()
    a = kernels.toy_policy_sweep_numpy(*args)
    b = kernels.toy_policy_sweep_numba(*args)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_dispatch_matches_reported_backend():
    if active_backend() == "numba":
        assert kernels.egm_sweep is kernels.egm_sweep_numba
    else:
        assert kernels.egm_sweep is kernels.egm_sweep_numpy
