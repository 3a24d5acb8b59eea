"""Independent brute-force references used by tests.

Deliberately simple and slow: direct definitions, no memoization and no
shared logic with the engine paths they check (beyond the WE solver,
which has its own recurrence-vs-direct-sum tests).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import SizeCapError
from .kelly import (
    KellySystem,
    StrategyProfile,
    partitions_from_profile,
    player_utility,
)
from .partitions import Coalition, Configuration, Partition, enumerate_partitions
from .queue_stability import BlockingWitness
from .wardrop import QueueSystem, solve_we


@dataclass(frozen=True)
class OracleBudget:
    max_agents: int = 6
    grid_points: int = 2001
    max_iters: int = 10_000

    def __post_init__(self) -> None:
        if min(self.max_agents, self.grid_points, self.max_iters) < 1:
            raise SizeCapError("oracle budget fields must be positive")


def pessimal_rate_exhaustive(sys: QueueSystem, q: Coalition, max_agents: int = 6) -> float:
    """min over every partition containing q of q's WE rate."""
    if sys.n > max_agents:
        raise SizeCapError(f"exhaustive pessimal rate capped at {max_agents} agents")
    members = set(q.members)
    if len(members) == sys.n:
        return sys.lambda_total
    complement = [a for a in range(1, sys.n + 1) if a not in members]
    best = float("inf")
    for sub in enumerate_partitions(len(complement)):
        groups = [[complement[i - 1] for i in c] for c in sub.coalitions]
        p = Partition.of(sys.n, [sorted(members), *groups])
        idx = p.coalitions.index(Coalition.of(members))
        best = min(best, solve_we(sys, p).rates[idx])
    return best


@dataclass(frozen=True)
class BestResponseResult:
    utilities: tuple[float, ...]  # per coalition of p
    adamant_utility: float | None
    converged: bool
    iterations: int
    diagnostic: str = ""


def best_response_rsg(
    sys: KellySystem, p: Partition, budget: OracleBudget | None = None
) -> BestResponseResult:
    """Numerical NE of the reduced resource-sharing game.

    Damped synchronous best responses over an action grid, with the
    per-unit grid interval zooming in around the incumbent action over
    a few passes (undamped single-grid iteration oscillates once three
    or more comparable units are present). Utilities are evaluated at
    the fixed point reached.
    """
    budget = budget or OracleBudget()
    factors = [max(sys.influence[i - 1] for i in c) for c in p.coalitions]
    if sys.has_adamant:
        factors.append(sys.adamant_factor)
    f = np.asarray(factors, dtype=float)
    k = len(f)
    gamma = sys.gamma
    a_hat = sys.effective_action_bound

    lo = np.zeros(k)
    hi = np.full(k, a_hat)
    actions = np.full(k, a_hat / (2.0 * k))
    omega = 0.5  # halved adaptively: extreme factor ratios spiral otherwise
    iters_used = 0
    passes = 6
    per_pass = max(1, budget.max_iters // passes)
    residual = float("inf")

    for _sweep in range(passes):
        grids = [np.linspace(lo[m], hi[m], budget.grid_points) for m in range(k)]
        spacing = float(np.max(hi - lo)) / (budget.grid_points - 1)
        best_resid = float("inf")
        stall = 0
        for _ in range(per_pass):
            iters_used += 1
            new_actions = np.empty(k)
            for m in range(k):
                others = float(np.dot(f, actions) - f[m] * actions[m])
                g = grids[m]
                denom = f[m] * g + others
                with np.errstate(invalid="ignore", divide="ignore"):
                    util = np.where(denom > 0.0, f[m] * g / denom, 0.0) - gamma * g
                new_actions[m] = g[int(np.argmax(util))]
            residual = float(np.max(np.abs(new_actions - actions)))
            actions = (1.0 - omega) * actions + omega * new_actions
            if residual < 0.999 * best_resid:
                best_resid = residual
                stall = 0
            else:
                stall += 1
                if stall >= 60:
                    omega = max(0.02, 0.5 * omega)
                    stall = 0
            if residual <= max(1e-12, 0.5 * spacing):  # settled on this grid
                break
        half = np.maximum((hi - lo) / 6.0, 25.0 * spacing)
        lo = np.maximum(0.0, actions - half)
        hi = np.minimum(a_hat, actions + half)

    converged = residual <= 1e-6 * max(1.0, a_hat)

    total = float(np.dot(f, actions))
    utils = []
    for m in range(k):
        alloc = f[m] * actions[m] / total if total > 0 else (1.0 if actions[m] > 0 else 0.0)
        utils.append(alloc - gamma * float(actions[m]))
    diag = "" if converged else f"no fixed point within {budget.max_iters} iterations"
    n_coal = len(p.coalitions)
    return BestResponseResult(
        tuple(utils[:n_coal]),
        utils[n_coal] if sys.has_adamant else None,
        converged,
        iters_used,
        diag,
    )


def exhaustive_ne_partitions(sys: KellySystem, max_agents: int = 4) -> list[Partition]:
    """Partitions arising from some pure NE of the coalition-choice game."""
    n = sys.n
    if n > max_agents:
        raise SizeCapError(f"exhaustive NE search capped at {max_agents} players")
    per_player: list[list[tuple[int, ...]]] = []
    for i in range(1, n + 1):
        rest = [j for j in range(1, n + 1) if j != i]
        opts = []
        for r in range(0, n):
            for combo in combinations(rest, r):
                opts.append(tuple(sorted((i, *combo))))
        per_player.append(opts)

    utilities: dict[tuple, tuple[float, ...]] = {}

    def utility_of(choice_tuple) -> tuple[float, ...]:
        if choice_tuple not in utilities:
            utilities[choice_tuple] = player_utility(
                sys, StrategyProfile.of(choice_tuple)
            ).shares
        return utilities[choice_tuple]

    ne_partitions: set[Partition] = set()
    for profile in product(*per_player):
        base = utility_of(profile)
        is_ne = True
        for i in range(n):
            for alt in per_player[i]:
                if alt == profile[i]:
                    continue
                dev = list(profile)
                dev[i] = alt
                if utility_of(tuple(dev))[i] > base[i] + 1e-12:
                    is_ne = False
                    break
            if not is_ne:
                break
        if is_ne:
            ne_partitions.update(partitions_from_profile(StrategyProfile.of(profile)))
    return sorted(ne_partitions, key=lambda p: p.format())


def gbpa_exhaustive_witness(
    sys: QueueSystem, cfg: Configuration, max_agents: int = 6
) -> BlockingWitness | None:
    """First blocking coalition under general blocking, lexicographic scan."""
    if sys.n > max_agents:
        raise SizeCapError(f"exhaustive blocking scan capped at {max_agents} agents")
    agents = list(range(1, sys.n + 1))
    eps = 1e-9 * max(1.0, sys.lambda_total)
    all_coalitions = sorted(
        (Coalition(c) for r in range(1, sys.n) for c in combinations(agents, r)),
        key=lambda c: c.members,
    )
    for q in all_coalitions:
        if q in cfg.partition.coalitions:
            continue
        anticipated = pessimal_rate_exhaustive(sys, q, max_agents)
        prevailing = cfg.payoff.coalition_sum(q)
        if anticipated > prevailing + eps:
            kind = "split"
            covered = set()
            parts = 0
            for c in cfg.partition.coalitions:
                if set(c.members) <= set(q.members):
                    covered |= set(c.members)
                    parts += 1
            if covered == set(q.members) and parts >= 2:
                kind = "merger"
            elif not any(set(q.members) < set(c.members) for c in cfg.partition.coalitions):
                kind = "general"
            return BlockingWitness(q, kind, anticipated, prevailing)
    return None
