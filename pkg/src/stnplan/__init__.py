"""Planning toolkit for dynamic satellite-terrestrial networks.

Models the network as a time-evolving graph, solves joint VNF placement
and multi-slot routing exactly at small scale (branch-and-bound and a
decomposition branch-and-cut over a bundled simplex core), and plans at
scale with a layered-graph heuristic plus baseline planners, all wired
into a reproducible experiment harness and CLI.
"""

from .baselines import GaConfig, dg_plan, ew_plan, ga_plan
from .benders import BdbcResult, bdbc_solve, decompose
from .constellation import (ChannelParams, ConstellationConfig, isl_rate,
                            orbital_period, propagate, stl_rate)
from .harness import (CapExceeded, ConfigError, ScenarioConfig, ServiceSpec,
                      ValidationFailure, build_scenario_teg,
                      generate_services, plan_with, run_scenario, sweep)
from .ilp import (IlpModel, assignment_to_plan, build_full_model, check_assignment,
                  count_model, derive_auxiliaries, export_lp, export_metadata)
from .lpcore import (LinearProgram, LpSolution, MipResult, bb_solve,
                     enumerate_solve, relaxation, solve_lp, verify_farkas)
from .model import (LatencyParams, Plan, ServiceRequest, Violation,
                    comm_latency, comp_latency, e2e_latency, min_slots,
                    objective, plan_from_json, plan_to_json,
                    services_from_json, services_to_json, validate_plan)
from .tedg import build_adjacency, gen_path_set, tedg_plan, yen_k_shortest
from .teg import (Link, ResidualState, TimeEvolvingGraph, build_teg,
                  deserialize, make_teg, serialize)

__version__ = "0.1.0"
