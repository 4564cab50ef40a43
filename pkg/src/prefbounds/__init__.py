"""Set identification of household preference parameters from aggregate
time series under incomplete markets.

The package simulates a heterogeneous-agent economy with occasionally
binding borrowing constraints, stacks the aggregated optimality
conditions into a moment-inequality system sharpened by the fraction of
constrained households, and reports confidence sets for the preference
vector (risk aversion, inverse Frisch elasticity, habit, discount
factor) by continuously-updated GMM with a profiled nonnegative
nuisance.  Supporting layers cover mixed-frequency extraction of the
constrained share, closed-form toy-model bounds, asset-pricing
diagnostics, and raw-data ingestion.
"""

__version__ = "0.1.0"

from .aggregation import (AggregateObs, PreferenceTheta,  # noqa: F401
                          euler_moment, intratemporal_equality,
                          intratemporal_moment, xi_consumption, xi_labor)
from .analytic_bounds import (UNIDENTIFIED, ToyModel,  # noqa: F401
                              lambda_coefficients, omega_upper_bound,
                              rho_identified_set, solve_toy_model,
                              threshold_g, threshold_g_of_p)
from .asset_pricing import (bond_equity_rewrite, distortions,  # noqa: F401
                            frisch_decomposition, implied_omega_im,
                            premium_prediction, sdf_series)
from .backend import active_backend  # noqa: F401
from .data import MacroPanel, ingest, shf_variance_recipe  # noqa: F401
from .errors import (ConvergenceError, DomainError,  # noqa: F401
                     NumericalError, PrefboundsError, ValidationError)
from .estimator import (CriterionContext, ThetaSpace, cu_gmm,  # noqa: F401
                        minimize, newey_west_lrv, profiled_criterion)
from .inference import (ConfidenceSet, criterion_level_set,  # noqa: F401
                        mh_sample, profile_lr_set, quantile_set)
from .ks import (KSParams, KSSolution, SimulatedPanel,  # noqa: F401
                 simulate_panel, solve_ks)
from .mixed_freq import (build_model, extract_B, kalman_filter,  # noqa: F401
                         mle_fit, rts_smoother, steady_gain)
from .moments import (MomentSystemConfig, MomentWorkspace,  # noqa: F401
                      attach_capital_return, stack_moments)
