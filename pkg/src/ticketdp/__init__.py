"""Finite-horizon stochastic ticket pricing with a monotone price ladder.

The package solves the pricing problem exactly by backward induction and
measures, through paired stochastic simulation, how much revenue is lost
when the policy is computed from a misspecified total-demand curve instead
of the true one.
"""

from .demand import (DeadlineRegime, DemandProfile, Environment, PriceGrid,
                     deadline_factor, flat_regime, intensity, intensity_table,
                     moderate_regime, price_response, strong_regime,
                     validate_environment)
from .scenarios import (ExpDecay, FinalRamp, LogisticRamp, MisspecSpec, Peak,
                        Plateau, ScenarioSpec, apply_misspecification,
                        build_library, build_scenario, default_scenarios,
                        default_target_mass, eval_component, normalize_to_mass,
                        read_manifest, total_mass, write_manifest)
from .dp import (PoissonTable, PolicyTable, ValueTable, expected_capped_sales,
                 policies_distinct, policy_action, sales_distribution,
                 save_policy, solve_dp, truncated_poisson_pmf)
from .simulate import (RunKey, Trajectory, derive_run_seed, poisson_inverse_cdf,
                       run_uniforms, simulate_revenues, simulate_trajectory,
                       uniform_stream)
from .experiment import (BenchmarkCase, BenchmarkConfig, CaseResult, count_cases,
                         desk_preset, env_identifier, environments, expand_grid,
                         full_preset, load_config, load_results, run_benchmark,
                         run_case, save_config, validate_config)
from .metrics import (PairedTestResult, absolute_loss_stats, case_table,
                      emit_report, env_heatmap, group_summary, human_tables,
                      oracle_sanity_report, paired_difference_ci, percentile,
                      rom_relative_loss, summarize_cases)

__version__ = "0.1.0"
