"""Bi-directional mission offloading in an air-ground network.

Network and mission generation, chain embedding with instance sharing,
greedy / exact / local-search solvers, energy and cost metrics, and a
seeded sweep harness.
"""
from types import ModuleType as _ModuleType

from .embedding import (
    CostBreakdown,
    CostParams,
    Embedding,
    Limits,
    NetworkState,
    audit_state,
    check_feasible,
    commit,
    configuration_cost,
    enumerate_candidates,
    marginal_cost,
    release,
)
from .errors import ConfigError, EmbeddingError, GenerationError, LoadError
from .harness import Scenario, compare_bdo, emit_plot_data, load_scenario, run_scenario
from .metrics import UNLIMITED, EnergyModel, MetricsReport, aggregate_metrics, duty_endurance, recompute_metrics
from .missions import GeneratorConfig, Mission, MissionClass, VnfType, generate_missions, validate_mission
from .network import (
    Link,
    LinkKind,
    Network,
    Node,
    Route,
    Segment,
    TopologyConfig,
    build_case_study_network,
    k_simple_paths,
    load_network,
)
from .solvers import OffloadPolicy, SolveOutcome, improve_local_search, solve_exact_batch, solve_greedy_sequential

__version__ = "0.1.0"

__all__ = sorted(n for n, v in globals().items() if not n.startswith("_") and not isinstance(v, _ModuleType))
