"""waveguard: 1D wave equation with a dynamic boundary and nonlinear
velocity feedback -- simulator, diagnostics and decay certificates."""

from .certificates import (AntiDampingCertificate, DistanceLemmaConstant,
                           MonotoneCertificate, WeightRho,
                           attractivity_constant,
                           build_antidamping_certificate,
                           build_monotone_certificate,
                           distance_lemma_constant, search_monotone_rho)
from .config import ScenarioConfig, load_config, parse_config
from .diagnostics import (BasinEstimate, BoundReport, DecayFit,
                          check_decay_bound, energy_identity_residual,
                          fit_decay_rate, lyapunov_gamma,
                          multiplier_identity_residual, probe_stability_basin,
                          stationary_limit)
from .errors import (ConfigError, ContractError, FitUnavailableError,
                     HypothesisViolatedError, NoValidSectorError, NumericError,
                     StepFailureError, WaveguardError)
from .nonlinearities import (FeedbackLaw, ForcingLaw, LipschitzData,
                             SectorData, eval_F, eval_g, lipschitz_constant,
                             sector_params)
from .solver import (PulseProfile, SolverConfig, Trajectory,
                     characteristics_oracle, make_initial, simulate, step)
from .state_space import (EnergyBreakdown, FieldState, Grid, SublevelSetSpec,
                          bilinear_a, dist_to_stationary,
                          dist_to_sublevel_bound, dist_to_sublevel_exact,
                          energy, mean_functional,
                          project_orthogonal_to_constants)

__version__ = "0.1.0"
