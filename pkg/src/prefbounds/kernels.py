"""Hot numeric kernels, written once and optionally numba-compiled.

Two kernels live here:

* :func:`egm_sweep` -- one endogenous-grid-method sweep of the household
  consumption policy in the heterogeneous-agent equilibrium model with
  aggregate productivity states and an approximate law of motion for
  capital.
* :func:`toy_policy_sweep` -- one policy-time-iteration sweep for the
  single-asset buffer-stock toy model whose Euler equation is linear in
  consumption (``rho * c = E[c']`` off the borrowing constraint).

Both are plain loop-over-states functions whose inner work is vectorised
over the asset grid, so the same source runs efficiently under NumPy and
compiles cleanly under ``@njit``.  The module exposes ``*_numpy`` and
``*_numba`` variants for benchmarking; the unsuffixed names dispatch to
the active backend (see :mod:`prefbounds.backend`).
"""

import numpy as np

from . import backend


def _egm_sweep_impl(c_pol, k_grid, K_grid, b0, b1, Pi, Z, u, alpha, beta,
                    delta, omega, nu, lbar):
    """One EGM update of the consumption policy.

    Parameters
    ----------
    c_pol : (2, nK, 2, nk) array
        Current consumption policy indexed by (aggregate state z, index
        on the aggregate-capital grid, employment state e, index on the
        individual asset grid).  e = 0 is employed, e = 1 unemployed.
    k_grid, K_grid : 1d arrays
        Individual and aggregate capital grids (both increasing).
    b0, b1 : (2,) arrays
        Log-linear forecast coefficients: ln K' = b0[z] + b1[z] ln K.
    Pi : (4, 4) array
        Transition matrix over joint states indexed by 2*z + e.
    Z, u : (2,) arrays
        Productivity level and unemployment rate in each aggregate state.

    Returns
    -------
    (2, nK, 2, nk) array
        Updated consumption policy on the same grids.
    """
    nK = K_grid.shape[0]
    nk = k_grid.shape[0]
    c_new = np.empty_like(c_pol)
    K_lo = K_grid[0]
    K_hi = K_grid[nK - 1]
    for z in range(2):
        L = lbar * (1.0 - u[z])
        for iK in range(nK):
            K = K_grid[iK]
            # forecast tomorrow's aggregate capital and locate it on the grid
            Kp = np.exp(b0[z] + b1[z] * np.log(K))
            if Kp < K_lo:
                Kp = K_lo
            elif Kp > K_hi:
                Kp = K_hi
            lo = nK - 2
            for j in range(nK - 1):
                if K_grid[j + 1] >= Kp:
                    lo = j
                    break
            wK = (K_grid[lo + 1] - Kp) / (K_grid[lo + 1] - K_grid[lo])
            for e in range(2):
                s = 2 * z + e
                # expected discounted marginal utility on the k' grid
                emu = np.zeros(nk)
                for zp in range(2):
                    Lp = lbar * (1.0 - u[zp])
                    rp = Z[zp] * alpha * (Kp / Lp) ** (alpha - 1.0)
                    Rp = 1.0 - delta + rp
                    for ep in range(2):
                        pr = Pi[s, 2 * zp + ep]
                        cp = (wK * c_pol[zp, lo, ep, :]
                              + (1.0 - wK) * c_pol[zp, lo + 1, ep, :])
                        emu += pr * Rp * cp ** (-omega)
                c_end = (beta * emu) ** (-1.0 / omega)
                x_end = c_end + k_grid
                # today's cash on hand at each asset grid point
                rk = Z[z] * alpha * (K / L) ** (alpha - 1.0)
                wage = Z[z] * (1.0 - alpha) * (K / L) ** alpha
                tau = nu * u[z] / L
                if e == 0:
                    inc = (1.0 - tau) * wage * lbar
                else:
                    inc = nu * wage
                coh = inc + (1.0 - delta + rk) * k_grid
                c_here = np.interp(coh, x_end, c_end)
                # borrowing constraint binds below the first endogenous
                # point; extrapolate linearly above the last one
                slope = ((c_end[nk - 1] - c_end[nk - 2])
                         / (x_end[nk - 1] - x_end[nk - 2]))
                for ik in range(nk):
                    if coh[ik] <= x_end[0]:
                        c_here[ik] = coh[ik]
                    elif coh[ik] > x_end[nk - 1]:
                        c_here[ik] = (c_end[nk - 1]
                                      + slope * (coh[ik] - x_end[nk - 1]))
                c_new[z, iK, e, :] = c_here
    return c_new


def _toy_policy_sweep_impl(c_pol, x_grid, y_vals, y_probs, r, rho):
    """One policy-time-iteration sweep for the linear-Euler toy model.

    Off the borrowing constraint the policy solves
    ``rho * c = sum_j p_j * c_n((1+r)(x - c) + y_j)`` at each cash-on-hand
    grid point x; the constrained branch is ``c = x`` (save nothing).
    ``c_n`` is the current policy, evaluated by linear interpolation with
    linear extrapolation above the top grid point.

    Returns the updated consumption policy on ``x_grid``.
    """
    nx = x_grid.shape[0]
    ny = y_vals.shape[0]
    c_new = np.empty(nx)
    top = x_grid[nx - 1]
    slope = (c_pol[nx - 1] - c_pol[nx - 2]) / (x_grid[nx - 1] - x_grid[nx - 2])

    for i in range(nx):
        x = x_grid[i]
        # expected next-period consumption when saving nothing
        ec0 = 0.0
        for j in range(ny):
            xp = y_vals[j]
            if xp > top:
                cj = c_pol[nx - 1] + slope * (xp - top)
            else:
                cj = np.interp(xp, x_grid, c_pol)
            ec0 += y_probs[j] * cj
        if rho * x <= ec0:
            c_new[i] = x
            continue
        # bisect on c in (0, x): g(c) = rho*c - E[c_n((1+r)(x-c) + y)]
        # is increasing in c, negative at c -> 0+, positive at c = x
        a = 1e-12
        b = x
        for _ in range(80):
            c = 0.5 * (a + b)
            ec = 0.0
            for j in range(ny):
                xp = (1.0 + r) * (x - c) + y_vals[j]
                if xp > top:
                    cj = c_pol[nx - 1] + slope * (xp - top)
                else:
                    cj = np.interp(xp, x_grid, c_pol)
                ec += y_probs[j] * cj
            if rho * c - ec > 0.0:
                b = c
            else:
                a = c
        c_new[i] = 0.5 * (a + b)
    return c_new


egm_sweep_numpy = _egm_sweep_impl
toy_policy_sweep_numpy = _toy_policy_sweep_impl

if backend.HAVE_NUMBA:
    from numba import njit

    egm_sweep_numba = njit(cache=True)(_egm_sweep_impl)
    toy_policy_sweep_numba = njit(cache=True)(_toy_policy_sweep_impl)
else:
    egm_sweep_numba = None
    toy_policy_sweep_numba = None

if backend.USE_NUMBA:
    egm_sweep = egm_sweep_numba
    toy_policy_sweep = toy_policy_sweep_numba
else:
    egm_sweep = egm_sweep_numpy
    toy_policy_sweep = toy_policy_sweep_numpy
