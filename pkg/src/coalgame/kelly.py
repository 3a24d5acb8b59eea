"""Kelly-mechanism resource-sharing coalition game.

Coalitions of bidders play a reduced noncooperative game: each
coalition's payoff is its proportional resource share minus a linear
bid cost, and only the strongest member of a coalition bids. The NE
utilities have a closed form driven by the reciprocal influence
factors of the active players: with units sorted by factor descending
and w_m the reciprocal of unit m's factor,

    M = max{ m : sum_{i<=m} w_i - (m-1) w_m > 0 },   s = sum_{m<=M} w_m,
    utility_m = ((s - (M-1) w_m) / s)^2   for m <= M, else 0,

and the active player's aggregate bid is (M-1)(s - (M-1)w_m) w_m / (gamma s^2).
An adamant bidder (never cooperates) enters as one more unit.

Coalition worths are split by a within-coalition Shapley value whose
sub-coalition worths fix the environment and scatter the leftover
members as singletons (the pessimal arrangement).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import factorial, sqrt

from .errors import DomainError, SizeCapError
from .partitions import (
    Coalition,
    Partition,
    PayoffVector,
    coarser_than,
    enumerate_partitions,
)
from .queue_stability import BlockingWitness, StabilityVerdict

EPS = 1e-12
SHAPLEY_SIZE_CAP = 12
SCAN_CAP = 8

# exact threshold constants (often quoted rounded to 3 decimals)
ETA_LOW = sqrt(2.0) - 1.0    # 0.414...
ETA_HIGH = 1.0 / sqrt(2.0)   # 0.707...


@dataclass(frozen=True)
class KellySystem:
    """Influence factors of the cooperating bidders, an optional adamant
    bidder (relative strength eta, symmetric systems only), the bid cost
    factor and the action bound that guarantees NE existence."""

    influence: tuple[float, ...]
    adamant_eta: float | None = None
    gamma: float = 1.0
    action_bound: float | None = None

    def __post_init__(self) -> None:
        if not self.influence:
            raise DomainError("need at least one player")
        if any(not f > 0 for f in self.influence):
            raise DomainError(f"influence factors must be positive: {self.influence}")
        if list(self.influence) != sorted(self.influence, reverse=True):
            raise DomainError("influence factors must be sorted nonincreasing; use KellySystem.of")
        if self.adamant_eta is not None:
            if self.adamant_eta < 0:
                raise DomainError(f"eta must be nonnegative, got {self.adamant_eta}")
            if self.adamant_eta > 0 and len(set(self.influence)) > 1:
                raise DomainError("adamant player is only modelled for symmetric bidders")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.action_bound is not None and not self.action_bound > self.n / self.gamma:
            raise DomainError(
                f"action bound must exceed n/gamma = {self.n / self.gamma}"
            )

    @classmethod
    def of(cls, influence, adamant_eta=None, gamma=1.0, action_bound=None) -> "KellySystem":
        factors = tuple(sorted((float(f) for f in influence), reverse=True))
        eta = None if adamant_eta is None else float(adamant_eta)
        return cls(factors, eta, float(gamma), action_bound)

    @property
    def n(self) -> int:
        return len(self.influence)

    @property
    def has_adamant(self) -> bool:
        # eta = 0 means the adamant player is absent
        return self.adamant_eta is not None and self.adamant_eta > 0

    @property
    def adamant_factor(self) -> float:
        if not self.has_adamant:
            raise DomainError("system has no adamant player")
        return self.adamant_eta * self.influence[0]

    @property
    def symmetric(self) -> bool:
        return len(set(self.influence)) == 1

    @property
    def effective_action_bound(self) -> float:
        if self.action_bound is not None:
            return self.action_bound
        return 2.0 * (self.n + 1) / self.gamma


@dataclass(frozen=True)
class RSGOutcome:
    coalition_utilities: tuple[float, ...]
    aggregate_actions: tuple[float, ...]
    significant_count: int  # across all units, adamant included
    s_value: float
    adamant_utility: float | None = None
    adamant_action: float | None = None


@dataclass(frozen=True)
class ShapleyShares:
    shares: tuple[float, ...]

    def agent(self, label: int) -> float:
        return self.shares[label - 1]


def _ne_units(factors: tuple[float, ...], gamma: float):
    """Closed-form NE utilities/aggregate actions for one unit per factor."""
    k = len(factors)
    order = sorted(range(k), key=lambda i: (-factors[i], i))
    w = [1.0 / factors[i] for i in order]
    m_sig = 0
    prefix = 0.0
    for m in range(1, k + 1):
        prefix += w[m - 1]
        if prefix - (m - 1) * w[m - 1] > 0:
            m_sig = m
    s = sum(w[:m_sig])
    utils = [0.0] * k
    actions = [0.0] * k
    for pos, i in enumerate(order):
        wm = w[pos]
        if pos < m_sig:
            frac = (s - (m_sig - 1) * wm) / s
            utils[i] = frac * frac
            actions[i] = (m_sig - 1) * (s - (m_sig - 1) * wm) * wm / (gamma * s * s)
    return utils, actions, m_sig, s


def _unit_factors(sys: KellySystem, p: Partition) -> list[float]:
    if p.n != sys.n:
        raise DomainError(f"partition over {p.n} players, system has {sys.n}")
    factors = [max(sys.influence[i - 1] for i in c) for c in p.coalitions]
    if sys.has_adamant:
        factors.append(sys.adamant_factor)
    return factors


@lru_cache(maxsize=1 << 16)
def _rsg_cached(sys: KellySystem, p: Partition) -> RSGOutcome:
    factors = _unit_factors(sys, p)
    utils, actions, m_sig, s = _ne_units(tuple(factors), sys.gamma)
    k = len(p.coalitions)
    adamant_u = utils[k] if sys.has_adamant else None
    adamant_a = actions[k] if sys.has_adamant else None
    return RSGOutcome(tuple(utils[:k]), tuple(actions[:k]), m_sig, s, adamant_u, adamant_a)


def rsg_ne(sys: KellySystem, p: Partition) -> RSGOutcome:
    """NE utilities and aggregate actions of p's coalitions (and adamant)."""
    return _rsg_cached(sys, p)


def subcoalition_worth(sys: KellySystem, p: Partition, c: Coalition) -> float:
    """Worth of c inside its coalition: c's NE utility with the rest of its
    coalition scattered as singletons and the environment fixed."""
    parent = None
    for s_i in p.coalitions:
        if set(c.members) <= set(s_i.members):
            parent = s_i
            break
    if parent is None:
        raise DomainError(f"{c.format()} does not lie inside a single coalition of {p.format()}")
    if c == parent:
        return rsg_ne(sys, p).coalition_utilities[p.coalitions.index(parent)]
    groups = [list(c.members)]
    groups.extend([i] for i in parent.members if i not in c)
    groups.extend(list(other.members) for other in p.coalitions if other != parent)
    q = Partition.of(sys.n, groups)
    idx = q.coalitions.index(Coalition.of(c.members))
    return rsg_ne(sys, q).coalition_utilities[idx]


@lru_cache(maxsize=1 << 14)
def _shapley_cached(sys: KellySystem, p: Partition) -> ShapleyShares:
    shares = [0.0] * sys.n
    outcome = rsg_ne(sys, p)
    for ci, coalition in enumerate(p.coalitions):
        m = len(coalition)
        if m > SHAPLEY_SIZE_CAP:
            raise SizeCapError(f"coalition {coalition.format()} exceeds size cap {SHAPLEY_SIZE_CAP}")
        worth: dict[frozenset[int], float] = {frozenset(): 0.0}
        for r in range(1, m + 1):
            for sub in combinations(coalition.members, r):
                worth[frozenset(sub)] = subcoalition_worth(sys, p, Coalition(sub))
        fact = factorial(m)
        for j in coalition:
            total = 0.0
            others = [i for i in coalition if i != j]
            for r in range(0, m):
                weight = factorial(r) * factorial(m - r - 1) / fact
                for sub in combinations(others, r):
                    s = frozenset(sub)
                    total += weight * (worth[s | {j}] - worth[s])
            shares[j - 1] = total
        got = sum(shares[j - 1] for j in coalition)
        if abs(got - outcome.coalition_utilities[ci]) > 1e-9:
            raise ArithmeticError(
                f"Shapley shares of {coalition.format()} sum to {got}, worth {outcome.coalition_utilities[ci]}"
            )
    return ShapleyShares(tuple(shares))


def shapley_within(sys: KellySystem, p: Partition) -> ShapleyShares:
    """Per-player Shapley shares of each coalition's NE worth."""
    return _shapley_cached(sys, p)


@dataclass(frozen=True)
class StrategyProfile:
    """Per-player coalition proposals; player i always proposes itself."""

    choices: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.choices)
        for i, x in enumerate(self.choices, start=1):
            if i not in x:
                raise DomainError(f"player {i} must propose itself, got {x}")
            if any(j < 1 or j > n for j in x):
                raise DomainError(f"proposal {x} outside player set 1..{n}")
            if list(x) != sorted(set(x)):
                raise DomainError(f"proposal must be sorted and distinct: {x}")

    @classmethod
    def of(cls, choices) -> "StrategyProfile":
        return cls(tuple(tuple(sorted(set(int(j) for j in x))) for x in choices))

    @classmethod
    def natural(cls, p: Partition) -> "StrategyProfile":
        choices = [tuple(p.coalition_of(i).members) for i in range(1, p.n + 1)]
        return cls(tuple(choices))

    @property
    def n(self) -> int:
        return len(self.choices)


def partitions_from_profile(x: StrategyProfile) -> list[Partition]:
    """All coarsest partitions into mutual-consent coalitions.

    Coalitions are cliques of the mutual-consent graph, and preference
    for coarser partitions means every coalition must be a maximal
    clique among the players still unassigned when it forms (peeling
    maximal cliques in every order). A pair that could unanimously
    admit a willing third player therefore never stops at two.
    """
    n = x.n
    if n > 10:
        raise SizeCapError(f"profile resolution capped at 10 players, got {n}")
    consent: dict[int, set[int]] = {i: set() for i in range(1, n + 1)}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if j in x.choices[i - 1] and i in x.choices[j - 1]:
                consent[i].add(j)
                consent[j].add(i)

    def maximal_cliques(players: tuple[int, ...]) -> list[tuple[int, ...]]:
        members = set(players)
        cliques = []
        for r in range(1, len(players) + 1):
            for sub in combinations(players, r):
                if all(b in consent[a] for ai, a in enumerate(sub) for b in sub[ai + 1 :]):
                    cliques.append(sub)
        out = []
        for c in cliques:
            cs = set(c)
            extendable = any(cs <= consent[j] for j in members - cs)
            if not extendable:
                out.append(c)
        return out

    results: set[Partition] = set()

    def peel(remaining: tuple[int, ...], acc: list[tuple[int, ...]]) -> None:
        if not remaining:
            results.add(Partition.of(n, acc))
            return
        for clique in maximal_cliques(remaining):
            rest = tuple(i for i in remaining if i not in clique)
            peel(rest, acc + [clique])

    peel(tuple(range(1, n + 1)), [])
    found = list(results)
    minimal = [
        p for p in found if not any(q != p and coarser_than(q, p) for q in found)
    ]
    return sorted(minimal, key=lambda p: p.format())


def player_utility(sys: KellySystem, x: StrategyProfile) -> PayoffVector:
    """Worst-case Shapley share over the partitions the profile can form."""
    parts = partitions_from_profile(x)
    shares = [
        min(shapley_within(sys, p).agent(i) for p in parts) for i in range(1, sys.n + 1)
    ]
    return PayoffVector.of(shares)


def split_partition(p: Partition, agent: int) -> Partition:
    """The unique partition after `agent` unilaterally goes alone."""
    home = p.coalition_of(agent)
    groups = [[i for i in c] for c in p.coalitions if c != home]
    groups.append([agent])
    rest = [i for i in home if i != agent]
    if rest:
        groups.append(rest)
    return Partition.of(p.n, groups)


def u_stable(sys: KellySystem, p: Partition) -> StabilityVerdict:
    """No player gains by unilaterally going alone (which is sufficient:
    any other deviation also yields the alone-split among its partitions,
    and utilities take the minimum over formed partitions)."""
    shares = shapley_within(sys, p)
    for coalition in p.coalitions:
        if len(coalition) < 2:
            continue
        for i in coalition:
            p_dev = split_partition(p, i)
            idx = p_dev.coalitions.index(Coalition((i,)))
            u_dev = rsg_ne(sys, p_dev).coalition_utilities[idx]
            if u_dev > shares.agent(i) + EPS:
                return StabilityVerdict(
                    False, BlockingWitness(Coalition((i,)), "split", u_dev, shares.agent(i))
                )
    return StabilityVerdict(True)


def ss_partition(n: int, members) -> Partition:
    """SS(C): coalition C with every other player alone."""
    c = sorted(set(members))
    groups = [c] + [[i] for i in range(1, n + 1) if i not in set(c)]
    return Partition.of(n, groups)


def c_stable(sys: KellySystem, p: Partition) -> StabilityVerdict:
    """No outside coalition strictly improves all its members, with the
    deviators' worth assessed under the all-singletons arrangement.

    Coalitional stability subsumes unilateral stability: a partition a
    single player profitably walks out of is not stable, so the
    unilateral check runs first (its witness is returned when it bites).
    """
    if sys.n > SCAN_CAP:
        raise SizeCapError(f"coalitional stability capped at {SCAN_CAP} players, got {sys.n}")
    unilateral = u_stable(sys, p)
    if not unilateral.stable:
        return unilateral
    shares = shapley_within(sys, p)
    agents = list(range(1, sys.n + 1))
    for r in range(1, sys.n + 1):
        for combo in combinations(agents, r):
            s = Coalition(combo)
            if s in p.coalitions:
                continue
            q_s = ss_partition(sys.n, combo)
            dev_shares = shapley_within(sys, q_s)
            if all(dev_shares.agent(j) > shares.agent(j) + EPS for j in combo):
                return StabilityVerdict(
                    False,
                    BlockingWitness(
                        s,
                        "general",
                        sum(dev_shares.agent(j) for j in combo),
                        sum(shares.agent(j) for j in combo),
                    ),
                )
    return StabilityVerdict(True)


@dataclass(frozen=True)
class SOResult:
    value: float
    classes: tuple[str, ...] | None = None  # symmetric branch
    partitions: tuple[Partition, ...] | None = None  # exhaustive branch


def _symmetric_sum_utility(sys: KellySystem, k: int) -> float:
    """Total utility of the cooperating players split into k coalitions."""
    factors = [sys.influence[0]] * k
    if sys.has_adamant:
        factors.append(sys.adamant_factor)
    utils, _, _, _ = _ne_units(tuple(factors), sys.gamma)
    return sum(utils[:k])


def _significance_suffix(sys: KellySystem, k: int) -> str:
    significant = sys.has_adamant and sys.adamant_eta > (k - 1) / k
    return "" if significant else "o"


def _class_label(sys: KellySystem, k: int) -> str:
    if k == 1:
        label = "GC"
    elif k == sys.n:
        label = "ALC"
    else:
        label = "P" + str(k)
    return label + _significance_suffix(sys, k)


def partition_class(sys: KellySystem, p: Partition) -> str:
    """Shape class of a partition: GC, ALC, TTC (two pairs, rest alone),
    or Pk by coalition count; an 'o' suffix marks an insignificant
    (zero-utility or absent) adamant player at that partition."""
    sizes = sorted((len(c) for c in p.coalitions), reverse=True)
    k = len(sizes)
    if k == 1:
        label = "GC"
    elif k == p.n:
        label = "ALC"
    elif sizes[0] == 2 and sizes[1] == 2 and (len(sizes) < 3 or sizes[2] == 1):
        label = "TTC"
    else:
        label = "P" + str(k)
    return label + _significance_suffix(sys, k)


def so_partition(sys: KellySystem) -> SOResult:
    """Partition(s) maximizing the cooperating players' total utility."""
    if sys.symmetric:
        values = {k: _symmetric_sum_utility(sys, k) for k in range(1, sys.n + 1)}
        best = max(values.values())
        ks = [k for k, v in values.items() if v >= best - EPS]
        return SOResult(best, tuple(_class_label(sys, k) for k in ks), None)
    if sys.n > SCAN_CAP:
        raise SizeCapError(f"exhaustive SO capped at {SCAN_CAP} players, got {sys.n}")
    best_val = -1.0
    best_parts: list[Partition] = []
    for p in enumerate_partitions(sys.n):
        val = sum(rsg_ne(sys, p).coalition_utilities)
        if val > best_val + EPS:
            best_val = val
            best_parts = [p]
        elif val >= best_val - EPS:
            best_parts.append(p)
    return SOResult(best_val, None, tuple(best_parts))


def poa(sys: KellySystem) -> float:
    """Social optimum over the worst NE total utility (the all-alone one)."""
    alc = Partition.singletons(sys.n)
    worst = sum(rsg_ne(sys, alc).coalition_utilities)
    if sys.symmetric:
        so_value = so_partition(sys).value
    else:
        so_value = 1.0  # grand coalition corners the whole resource at no cost
    return so_value / worst


def moa(sys: KellySystem) -> float:
    """First measure of asymmetry of the influence factors."""
    if sys.has_adamant:
        raise DomainError("asymmetry measure is defined without an adamant player")
    if sys.n < 2:
        raise DomainError("asymmetry measure needs at least two players")
    lam1 = sys.influence[0]
    rho = {j: lam1 / (lam1 + sys.influence[j - 1]) for j in range(2, sys.n + 1)}
    rho[sys.n + 1] = 1.0
    best = float("inf")
    for j in range(2, sys.n + 1):
        c_j = 1.0 if j == 2 else float(j)
        best = min(best, (rho[j + 1] ** 2 - rho[j] ** 2) / (c_j * (1.0 - rho[j]) ** 2))
    return best


def _a2_standard(sys: KellySystem, j: int) -> bool:
    lam1 = sys.influence[0]
    rho_j = lam1 / (lam1 + sys.influence[j - 1])
    rho_next = 1.0 if j == sys.n else lam1 / (lam1 + sys.influence[j])
    c_j = 1.0 if j == 2 else float(j)
    return rho_next**2 - rho_j**2 >= c_j * (1.0 - rho_j) ** 2


def absolute_stability_check(sys: KellySystem) -> tuple[bool, str]:
    """Does every partition resist unilateral deviations?

    Evaluates the reciprocal-gap condition (all gaps at least the top
    player's reciprocal) and then the asymmetry condition; the primed
    variants cover the case of two equal middle players (3 and 4).
    """
    if sys.has_adamant:
        raise DomainError("absolute stability is analysed without an adamant player")
    w = [1.0 / f for f in sys.influence]
    n = sys.n

    gaps_ok = all(w[j] - w[j - 1] >= w[0] for j in range(2, n))
    if gaps_ok:
        for j in range(2, n + 1):
            if not _a2_standard(sys, j):
                return False, f"A.2 fails at j={j}"
        return True, "A.1+A.2"

    primed = (
        n >= 4
        and w[2] == w[3]
        and all(w[j] - w[j - 1] >= w[0] for j in range(2, n) if j != 3)
    )
    if primed:
        lam1, lam3 = sys.influence[0], sys.influence[2]
        rho = {j: lam1 / (lam1 + sys.influence[j - 1]) for j in range(2, n + 1)}
        rho[n + 1] = 1.0
        mid = (2 * lam1 - lam3) / (2 * lam1 + lam3)
        if not mid**2 >= rho[2] ** 2 + (1.0 - rho[2]) ** 2:
            return False, "A.2' fails at j=2"
        if not rho[4] ** 2 - mid**2 >= 3.0 * (lam3 / (2 * lam1 + lam3)) ** 2:
            return False, "A.2' fails at j=3"
        lhs = (rho[5 if n >= 5 else n + 1] ** 2 - rho[4] ** 2) + (rho[4] ** 2 - mid**2) / 3.0
        if not lhs >= 4.0 * (1.0 - rho[3]) ** 2:
            return False, "A.2' fails at j=4"
        for j in range(5, n + 1):
            if not _a2_standard(sys, j):
                return False, f"A.2' fails at j={j}"
        return True, "A.1'+A.2'"

    return False, "A.1 fails"


def weak_partition(sys: KellySystem, p: Partition) -> bool:
    """Symmetric players: someone always gains by going alone when the
    largest coalition tops (k+1)^2/k^2."""
    if not sys.symmetric:
        raise DomainError("weak-partition test applies to symmetric systems")
    m_star = max(len(c) for c in p.coalitions)
    k = len(p.coalitions)
    return m_star * k * k > (k + 1) * (k + 1)


def stable_partition_scan(sys: KellySystem) -> list[tuple[Partition, bool]]:
    """U-stability verdict for every partition, canonical order."""
    if sys.n > SCAN_CAP:
        raise SizeCapError(f"partition scan capped at {SCAN_CAP} players, got {sys.n}")
    return [(p, u_stable(sys, p).stable) for p in enumerate_partitions(sys.n)]


def spectral_shares(sys: KellySystem, p: Partition) -> tuple[float, ...]:
    """Per-player fraction of the resource, splitting each coalition's
    allocation in the ratio of the members' Shapley shares.

    With an adamant player present the players' fractions sum to one
    minus the adamant's fraction.
    """
    outcome = rsg_ne(sys, p)
    factors = [max(sys.influence[i - 1] for i in c) for c in p.coalitions]
    weights = [f * a for f, a in zip(factors, outcome.aggregate_actions)]
    total = sum(weights)
    if sys.has_adamant:
        total += sys.adamant_factor * (outcome.adamant_action or 0.0)
    if total == 0.0:
        # single active unit bidding vanishingly little: it gets everything
        fractions = [1.0 if u > 0 else 0.0 for u in outcome.coalition_utilities]
    else:
        fractions = [w / total for w in weights]
    shares = [0.0] * sys.n
    shapley = shapley_within(sys, p)
    for c, frac, util in zip(p.coalitions, fractions, outcome.coalition_utilities):
        if util <= 0.0:
            continue
        for i in c:
            shares[i - 1] = frac * shapley.agent(i) / util
    return tuple(shares)
