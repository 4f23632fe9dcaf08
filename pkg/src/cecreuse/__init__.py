"""Joint result caching, cache-search control, workload scheduling and CPU
allocation for collaborative edge computing, minimizing weighted mean
response time under M/G/1 queueing."""

from ._kernels import HAVE_EXT, IMPL_NAME
from .caching import (EfficiencyContext, brute_force_cache_oracle,
                      efficiencies_at_solution, g_of_B, partition_inputs,
                      round_to_binary, solve_caching_bs,
                      solve_inverse_efficiency, storage_efficiency,
                      sweep_all_stations, theorem3_ratio)
from .delay import (EvalResult, ObjectiveGradient, choose_cache_search,
                    d_delay1_d_phr, delay_no_cache, delay_with_cache,
                    evaluate_objective, objective_gradient, processing_delay,
                    recompute_search_flags, response_time, service_rates,
                    service_time_cdf, weighted_objective)
from .errors import (BracketError, CecReuseError, DegenerateInput,
                     DimensionMismatch, EmptyVector, Infeasible,
                     LineSearchExhausted, MalformedInput, StabilityViolation,
                     TooLarge, UnstableConfig)
from .experiments import (GeneratorParams, SweepSpec, generate_scenario,
                          load_sweep_csv, run_sweep, save_sweep_csv)
from .model import (Application, BaseStation, CacheAssignment, HitRateTable,
                    Scenario, SchedulingState, TypicalInput,
                    compute_hit_rates, load_scenario, save_scenario,
                    scenario_from_dict, scenario_to_dict, storage_used,
                    total_arrival_rate, validate)
from .queuesim import (QueueSimConfig, SimResult, analytic_mean,
                       compare_to_analytic, simulate)
from .scheduling import (PgdParams, backtrack, initial_feasible_point,
                         project_decisions, project_simplex,
                         solve_scheduling, stability_margin_ok)
from .solver import (SolveReport, alternating_solve, greedy_cache,
                     solve_greedy, solve_noc, solve_nor)

__version__ = "0.1.0"

__all__ = [
    "HAVE_EXT", "IMPL_NAME", "__version__",
    # model
    "TypicalInput", "Application", "BaseStation", "Scenario",
    "CacheAssignment", "SchedulingState", "HitRateTable",
    "compute_hit_rates", "storage_used", "total_arrival_rate", "validate",
    "scenario_to_dict", "scenario_from_dict", "save_scenario", "load_scenario",
    # delay
    "EvalResult", "ObjectiveGradient", "service_rates", "delay_no_cache",
    "delay_with_cache", "service_time_cdf", "choose_cache_search",
    "d_delay1_d_phr", "evaluate_objective", "weighted_objective",
    "processing_delay", "response_time", "objective_gradient",
    "recompute_search_flags",
    # caching
    "EfficiencyContext", "partition_inputs", "storage_efficiency",
    "solve_inverse_efficiency", "g_of_B", "solve_caching_bs",
    "round_to_binary", "theorem3_ratio", "sweep_all_stations",
    "brute_force_cache_oracle", "efficiencies_at_solution",
    # scheduling
    "PgdParams", "project_simplex", "project_decisions", "backtrack",
    "stability_margin_ok", "solve_scheduling", "initial_feasible_point",
    # queuesim
    "QueueSimConfig", "SimResult", "simulate", "analytic_mean",
    "compare_to_analytic",
    # solver
    "SolveReport", "greedy_cache", "solve_greedy", "alternating_solve",
    "solve_nor", "solve_noc",
    # experiments
    "GeneratorParams", "SweepSpec", "generate_scenario", "run_sweep",
    "save_sweep_csv", "load_sweep_csv",
    # errors
    "CecReuseError", "MalformedInput", "DimensionMismatch",
    "StabilityViolation", "Infeasible", "BracketError", "DegenerateInput",
    "TooLarge", "UnstableConfig", "LineSearchExhausted", "EmptyVector",
]
