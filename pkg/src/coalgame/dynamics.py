"""Seeded random coalition-formation dynamics.

Starting from a consistent configuration, repeatedly pick a uniformly
random blocking coalition under the chosen rule and apply it, until a
stable configuration absorbs the process or the step budget runs out.

Reproducibility: the generator is SplitMix64 (state += 0x9E3779B97F4A7C15;
z ^= z>>30; z *= 0xBF58476D1CE4E5B9; z ^= z>>27; z *= 0x94D049BB133111EB;
z ^= z>>31), and a choice among k candidates takes next() % k. Both are
trivially portable, so traces replay bit-for-bit across implementations.

Payoff update after a block by Q (the stability notions only require
that every member of Q strictly gains): Q's members split the surplus (new worth
minus their prior sum) equally on top of their prior shares; every
other coalition, leftover or untouched, rescales its members' prior
shares proportionally to its new WE worth.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError, SizeCapError
from .partitions import Coalition, Configuration, PayoffVector, bell_number
from .queue_stability import (
    BlockingWitness,
    apply_block,
    blocking_coalitions,
    check_consistency,
    RULES,
)
from .wardrop import QueueSystem, pessimal_rate, we_worths
from itertools import combinations

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The 64-bit mixing generator documented in the module docstring."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def choice_index(self, k: int) -> int:
        if k < 1:
            raise DomainError("cannot choose from an empty candidate set")
        return self.next() % k


@dataclass(frozen=True)
class DynamicsConfig:
    rule: str
    seed: int
    max_steps: int
    # payoff update is the surplus-equal rule described above

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise DomainError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")

    @classmethod
    def default_steps(cls, rule: str, seed: int, n: int) -> "DynamicsConfig":
        return cls(rule, seed, 10 * bell_number(n))


@dataclass(frozen=True)
class TraceStep:
    config: Configuration  # configuration the move was taken from
    witness: BlockingWitness


@dataclass(frozen=True)
class Trace:
    seed: int
    rule: str
    steps: tuple[TraceStep, ...]
    terminal: Configuration
    absorbed: bool


def step(
    sys: QueueSystem, cfg: Configuration, rule: str, rng: SplitMix64
) -> tuple[Configuration, BlockingWitness] | None:
    """One dynamics move, or None when cfg is stable under the rule."""
    candidates = blocking_coalitions(sys, cfg, rule)
    if not candidates:
        return None
    witness = candidates[rng.choice_index(len(candidates))]
    new_cfg = apply_move(sys, cfg, witness.coalition)
    return new_cfg, witness


def apply_move(sys: QueueSystem, cfg: Configuration, q: Coalition) -> Configuration:
    """Apply a block by q: new partition, surplus-equal payoff update."""
    old_p = cfg.partition
    new_p = apply_block(old_p, q)
    new_worths = dict(zip(new_p.coalitions, we_worths(sys, new_p)))
    shares = list(cfg.payoff.shares)
    q_canon = Coalition.of(q.members)
    prior_sum = cfg.payoff.coalition_sum(q_canon)
    surplus = new_worths[q_canon] - prior_sum
    if surplus <= 0:
        raise ArithmeticError(f"blocking move by {q.format()} yields no surplus")
    for i in q_canon:
        shares[i - 1] = cfg.payoff.shares[i - 1] + surplus / len(q_canon)
    for c in new_p.coalitions:
        if c == q_canon:
            continue
        old_sum = cfg.payoff.coalition_sum(c)
        if old_sum > 0.0:
            scale = new_worths[c] / old_sum
            for i in c:
                shares[i - 1] = cfg.payoff.shares[i - 1] * scale
        else:  # leftover members held nothing; split the new worth equally
            for i in c:
                shares[i - 1] = new_worths[c] / len(c)
    new_cfg = Configuration(new_p, PayoffVector.of(shares))
    check_consistency(sys, new_p, new_cfg.payoff)
    for i in q_canon:  # strict improvement for every blocking member
        assert new_cfg.payoff.shares[i - 1] > cfg.payoff.shares[i - 1]
    return new_cfg


def run(sys: QueueSystem, initial: Configuration, dc: DynamicsConfig) -> Trace:
    """Run the seeded dynamics until absorbed or the step budget is spent."""
    check_consistency(sys, initial.partition, initial.payoff)
    rng = SplitMix64(dc.seed)
    cfg = initial
    steps: list[TraceStep] = []
    for _ in range(dc.max_steps):
        move = step(sys, cfg, dc.rule, rng)
        if move is None:
            return Trace(dc.seed, dc.rule, tuple(steps), cfg, True)
        new_cfg, witness = move
        steps.append(TraceStep(cfg, witness))
        cfg = new_cfg
    absorbed = not blocking_coalitions(sys, cfg, dc.rule)
    return Trace(dc.seed, dc.rule, tuple(steps), cfg, absorbed)


def check_assumption_a1(sys: QueueSystem, max_agents: int = 8) -> bool:
    """Per-server pessimal rates strictly improve with coalition growth,
    for every coalition containing no full k*-achieving coalition."""
    if sys.n > max_agents:
        raise SizeCapError(f"assumption check capped at {max_agents} agents, got {sys.n}")
    from .wardrop import c_star_set

    stars = [set(c.members) for c in c_star_set(sys)]
    agents = list(range(1, sys.n + 1))

    def per_server(c: tuple[int, ...]) -> float:
        coal = Coalition(c)
        return pessimal_rate(sys, coal) / sys.coalition_servers(coal)

    for r in range(2, sys.n + 1):
        for combo in combinations(agents, r):
            members = set(combo)
            if any(star <= members for star in stars):
                continue
            value = per_server(combo)
            for rr in range(1, r):
                for sub in combinations(combo, rr):
                    if not per_server(sub) < value:
                        return False
    return True
