"""Joint transmit-power, server-association and video-resolution optimization
for edge-assisted play-to-earn streaming, with brute-force oracles and a
reproducible experiment harness."""

from .earnings import (DEFAULT_PARAMS, EarnFamily, EarnParams, check_assumption1,
                       eval_earning, eval_earning_derivative, fit_params,
                       normalize_input)
from .model import (Allocation, Association, ServerProfile, SystemConfig,
                    UserProfile, evaluate_allocation, snap_resolution,
                    total_objective, user_utility, validate_association)
from .power import (EnergyInfeasibleError, PowerBinding, PowerSolution, WBranch,
                    energy_root_oracle, feasibility_ratio, lambert_w,
                    optimal_power)
from .sdp import (SdpProblem, SdpSolution, SdpStatus, jacobi_eig, project_psd,
                  solve_sdp, symmetric_eig)
from .association import (QcqpInstance, RoundingReport, SdrResult,
                          brute_force_association, build_qcqp,
                          gaussian_randomize, solve_association_sdr)
from .resolution import (ResolutionSubproblem, latency_coefficient,
                         make_subproblem, optimal_resolution)
from .optimizer import (BaselineKind, SolveOptions, SolveTrace,
                        auto_normalized_config, run_baseline, solve_joint)
from .harness import (ResultRow, ScenarioSpec, SweepKind, emit_results,
                      generate_scenario, run_sweep)

__version__ = "0.1.0"
