"""Coalition-formation game analysis: Erlang-B congestion games with
Wardrop-split customers and Kelly-mechanism resource sharing."""

from .errors import DomainError, SizeCapError
from .partitions import (
    AgentSet,
    Coalition,
    Configuration,
    Partition,
    PayoffVector,
    bell_number,
    coarser_than,
    enumerate_partitions,
    enumerate_two_partitions,
    mergers_of,
    parse_partition,
    splits_of,
)
from .erlang import blocking_probability, inverse_load
from .wardrop import QueueSystem, WardropSplit, c_star_set, k_star, pessimal_rate, psi, solve_we
from .queue_stability import (
    BlockingWitness,
    PayoffRule,
    StabilityVerdict,
    check_stability,
    gbpa_check,
    gc_stabilizing_payoffs,
    heavy_traffic_stable_set,
    light_traffic_stable_set,
    make_configuration,
    proportional_payoff,
    rbia_check,
    rbia_stable_partition,
    rbpa_check,
    rbpa_stable_payoff_exists,
    shapley_payoff_queue,
    unilateral_stable_payoff,
)
from .dynamics import DynamicsConfig, SplitMix64, Trace, check_assumption_a1, run, step
from .kelly import (
    KellySystem,
    RSGOutcome,
    ShapleyShares,
    StrategyProfile,
    absolute_stability_check,
    c_stable,
    moa,
    partitions_from_profile,
    player_utility,
    poa,
    rsg_ne,
    shapley_within,
    so_partition,
    spectral_shares,
    stable_partition_scan,
    subcoalition_worth,
    u_stable,
    weak_partition,
)

__version__ = "0.1.0"
