"""Wardrop splitting of the market across a partition's coalitions.

The customer stream of total rate lambda_total splits so every
coalition sees the same steady-state blocking probability. The split
only depends on each coalition's server total, so WE solutions are
cached per (server-pool multiset, lambda, mu).

Solver: outer bisection on the common blocking probability B*, inner
inversion of the Erlang-B formula per coalition; the map from B* to
the implied total arrival rate is strictly increasing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

from .erlang import blocking_probability, inverse_load
from .errors import DomainError
from .partitions import AgentSet, Coalition, Partition, enumerate_partitions

WE_RESIDUAL_TOL = 1e-9  # asserted on every solve, per contract


@dataclass(frozen=True)
class QueueSystem:
    """Per-agent server counts plus market size and service rate."""

    servers: tuple[int, ...]
    lambda_total: float
    mu: float = 1.0

    def __post_init__(self) -> None:
        if not self.servers:
            raise DomainError("need at least one provider")
        if any(int(s) != s or s < 1 for s in self.servers):
            raise DomainError(f"server counts must be positive integers: {self.servers}")
        if not (self.lambda_total > 0):
            raise DomainError(f"lambda_total must be positive, got {self.lambda_total}")
        if not (self.mu > 0):
            raise DomainError(f"mu must be positive, got {self.mu}")

    @classmethod
    def of(cls, servers, lambda_total, mu=1.0) -> "QueueSystem":
        return cls(tuple(int(s) for s in servers), float(lambda_total), float(mu))

    @property
    def n(self) -> int:
        return len(self.servers)

    @property
    def agents(self) -> AgentSet:
        return AgentSet(self.n)

    @property
    def total_servers(self) -> int:
        return sum(self.servers)

    def coalition_servers(self, c: Coalition) -> int:
        return sum(self.servers[m - 1] for m in c)

    def with_lambda(self, lam: float) -> "QueueSystem":
        return QueueSystem(self.servers, float(lam), self.mu)


@dataclass(frozen=True)
class WardropSplit:
    """Per-coalition WE arrival rates plus the common blocking probability."""

    rates: tuple[float, ...]
    common_blocking: float


@lru_cache(maxsize=None)
def _pool_rates(pools: tuple[int, ...], lam: float, mu: float) -> tuple[float, ...]:
    """WE arrival rates for server pools (descending sizes)."""
    if len(pools) == 1:
        return (lam,)
    a_total = lam / mu
    b_hi = blocking_probability(min(pools), a_total)
    b_lo = 0.0

    def implied_rates(b: float) -> list[float]:
        return [inverse_load(m, b) * mu for m in pools]

    rates = implied_rates(b_hi)
    for _ in range(200):
        mid = 0.5 * (b_lo + b_hi)
        if mid <= b_lo or mid >= b_hi:
            break
        rates = implied_rates(mid)
        gap = sum(rates) - lam
        if abs(gap) <= 1e-12 * lam:
            break
        if gap < 0:
            b_lo = mid
        else:
            b_hi = mid

    # fold the remaining residual into the largest pool's rate
    imax = rates.index(max(rates))
    rates[imax] = lam - (sum(rates) - rates[imax])

    blockings = [blocking_probability(m, r / mu) for m, r in zip(pools, rates)]
    spread = max(blockings) - min(blockings)
    if spread > WE_RESIDUAL_TOL or abs(sum(rates) - lam) > WE_RESIDUAL_TOL:
        raise ArithmeticError(
            f"WE solve failed invariants for pools={pools} lam={lam}: "
            f"blocking spread {spread:.3e}, rate residual {sum(rates) - lam:.3e}"
        )
    return tuple(rates)


def _rates_for_pools(pools: list[int], lam: float, mu: float) -> list[float]:
    canon = tuple(sorted(pools, reverse=True))
    solved = _pool_rates(canon, lam, mu)
    # positional mapping keeps the rate sum exact when pools tie
    order = sorted(range(len(pools)), key=lambda i: -pools[i])
    out = [0.0] * len(pools)
    for slot, idx in enumerate(order):
        out[idx] = solved[slot]
    return out


def solve_we(sys: QueueSystem, p: Partition) -> WardropSplit:
    """Unique Wardrop split of sys.lambda_total across p's coalitions."""
    if p.n != sys.n:
        raise DomainError(f"partition over {p.n} agents, system has {sys.n}")
    pools = [sys.coalition_servers(c) for c in p.coalitions]
    rates = _rates_for_pools(pools, sys.lambda_total, sys.mu)
    b_star = blocking_probability(pools[0], rates[0] / sys.mu)
    return WardropSplit(tuple(rates), b_star)


def we_worths(sys: QueueSystem, p: Partition) -> tuple[float, ...]:
    """Coalition worths (their WE arrival rates), aligned with p."""
    return solve_we(sys, p).rates


def pessimal_rate(sys: QueueSystem, q: Coalition, exhaustive: bool = False) -> float:
    """Minimum over all partitions containing q of q's WE rate.

    The minimizer is the two-coalition partition {q, rest}: merging the
    opponents maximizes their share, hence minimizes q's. That shortcut
    is validated against the exhaustive enumeration in tests and remains
    available here behind the ``exhaustive`` flag.
    """
    members = set(q.members)
    if not members <= set(range(1, sys.n + 1)):
        raise DomainError(f"coalition {q.format()} outside agent set 1..{sys.n}")
    if len(members) == sys.n:
        return sys.lambda_total

    if exhaustive:
        complement = [a for a in range(1, sys.n + 1) if a not in members]
        best = float("inf")
        for sub in enumerate_partitions(len(complement)):
            groups = [[complement[i - 1] for i in c] for c in sub.coalitions]
            p = Partition.of(sys.n, [list(members), *groups])
            idx = p.coalitions.index(Coalition.of(members))
            best = min(best, solve_we(sys, p).rates[idx])
        return best

    n_q = sys.coalition_servers(q)
    rates = _rates_for_pools([n_q, sys.total_servers - n_q], sys.lambda_total, sys.mu)
    return rates[0]


def psi(sys: QueueSystem, k: int) -> float:
    """Per-server WE rate of a k-server coalition facing the other N-k servers."""
    total = sys.total_servers
    if not (0 < k < total):
        raise DomainError(f"psi needs 0 < k < {total}, got {k}")
    rates = _rates_for_pools([int(k), total - int(k)], sys.lambda_total, sys.mu)
    return rates[0] / k


def realizable_duopoly_sizes(sys: QueueSystem) -> list[int]:
    """Larger-side server totals achievable by some 2-partition."""
    total = sys.total_servers
    sums: set[int] = set()
    agents = list(range(1, sys.n + 1))
    for r in range(1, sys.n):
        for combo in combinations(agents, r):
            sums.add(sum(sys.servers[a - 1] for a in combo))
    return sorted(k for k in sums if k >= total - k)


def k_star(sys: QueueSystem) -> set[int]:
    """Larger-coalition sizes maximizing the per-server WE rate."""
    candidates = realizable_duopoly_sizes(sys)
    values = {k: psi(sys, k) for k in candidates}
    best = max(values.values())
    return {k for k, v in values.items() if v >= best * (1.0 - 1e-12)}


def c_star_set(sys: QueueSystem) -> list[Coalition]:
    """All strict coalitions whose server total lies in k_star."""
    ks = k_star(sys)
    agents = list(range(1, sys.n + 1))
    out: list[Coalition] = []
    for r in range(1, sys.n):
        for combo in combinations(agents, r):
            if sum(sys.servers[a - 1] for a in combo) in ks:
                out.append(Coalition(tuple(combo)))
    if not out:
        raise DomainError("no strict coalition realizes k*; inconsistent system")
    return sorted(out, key=lambda c: c.members)
