"""Payoff rules and stability notions for the constant-sum congestion game.

Three blocking rules are implemented. GB-PA lets any outside coalition
block when its pessimal worth beats its members' current payoffs.
RB-PA restricts blockers to mergers of existing coalitions and splits
of a single coalition. RB-IA keeps that restriction but assesses the
deviators' prevailing worth imperfectly (by server-proportional
contribution) before a final validation against the projection
partition.

Strict blocking inequalities carry a small relative margin so that
exact-equality cases (notably the grand-coalition merger, whose
pessimal worth equals the total payoff by the constant-sum identity)
never block due to float noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import factorial

from . import lp
from .errors import DomainError, SizeCapError
from .partitions import (
    Coalition,
    Configuration,
    Partition,
    PayoffVector,
    enumerate_two_partitions,
    mergers_of,
    splits_of,
)
from .wardrop import QueueSystem, _pool_rates, pessimal_rate, solve_we, we_worths

CONSISTENCY_TOL = 1e-9
SHAPLEY_SIZE_CAP = 12
RULES = ("gbpa", "rbpa", "rbia")


def _margin(sys: QueueSystem) -> float:
    return 1e-9 * max(1.0, sys.lambda_total)


@dataclass(frozen=True)
class BlockingWitness:
    """A coalition that blocks a configuration under some rule.

    ``anticipated_rate`` is the blocker's pessimal worth; for RB-IA
    splits ``prevailing_worth`` is the imperfect (server-proportional)
    assessment, otherwise it is the members' actual payoff sum.
    """

    coalition: Coalition
    kind: str  # "merger" | "split" | "general"
    anticipated_rate: float
    prevailing_worth: float

    def __post_init__(self) -> None:
        if self.anticipated_rate <= self.prevailing_worth:
            raise DomainError("witness must anticipate strictly more than it prevails")


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    witness: BlockingWitness | None = None

    def __post_init__(self) -> None:
        if self.stable == (self.witness is not None):
            raise DomainError("verdict must carry a witness exactly when unstable")


@dataclass(frozen=True)
class PayoffRule:
    variant: str  # "proportional" | "shapley" | "explicit"
    vector: PayoffVector | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("proportional", "shapley", "explicit"):
            raise DomainError(f"unknown payoff rule {self.variant!r}")
        if (self.variant == "explicit") != (self.vector is not None):
            raise DomainError("explicit payoff rule needs a vector, others must not carry one")

    @classmethod
    def proportional(cls) -> "PayoffRule":
        return cls("proportional")

    @classmethod
    def shapley(cls) -> "PayoffRule":
        return cls("shapley")

    @classmethod
    def explicit(cls, vector: PayoffVector) -> "PayoffRule":
        return cls("explicit", vector)


def proportional_payoff(sys: QueueSystem, p: Partition) -> PayoffVector:
    """Each member earns its server share of the coalition's WE worth."""
    worths = we_worths(sys, p)
    shares = [0.0] * sys.n
    for c, worth in zip(p.coalitions, worths):
        n_c = sys.coalition_servers(c)
        for i in c:
            shares[i - 1] = sys.servers[i - 1] / n_c * worth
    return PayoffVector.of(shares)


def subcoalition_worth_queue(sys: QueueSystem, p: Partition, c: Coalition, sub: Coalition) -> float:
    """Worth of sub inside coalition c of p: its WE rate when c splits
    into {sub, c minus sub} with the rest of p intact."""
    if not set(sub.members) <= set(c.members):
        raise DomainError(f"{sub.format()} is not inside {c.format()}")
    if sub == c:
        return we_worths(sys, p)[p.coalitions.index(c)]
    rest = set(c.members) - set(sub.members)
    groups = [list(sub.members), sorted(rest)]
    groups.extend(list(other.members) for other in p.coalitions if other != c)
    split_p = Partition.of(sys.n, groups)
    idx = split_p.coalitions.index(Coalition.of(sub.members))
    return solve_we(sys, split_p).rates[idx]


def shapley_payoff_queue(sys: QueueSystem, p: Partition) -> PayoffVector:
    """Within-coalition Shapley shares of the WE worths."""
    shares = [0.0] * sys.n
    for c in p.coalitions:
        m = len(c)
        if m > SHAPLEY_SIZE_CAP:
            raise SizeCapError(f"coalition {c.format()} exceeds Shapley size cap {SHAPLEY_SIZE_CAP}")
        worth: dict[frozenset[int], float] = {frozenset(): 0.0}
        for r in range(1, m + 1):
            for sub in combinations(c.members, r):
                worth[frozenset(sub)] = subcoalition_worth_queue(sys, p, c, Coalition(sub))
        fact = factorial(m)
        for j in c:
            total = 0.0
            others = [i for i in c if i != j]
            for r in range(0, m):
                w = factorial(r) * factorial(m - r - 1) / fact
                for sub in combinations(others, r):
                    s = frozenset(sub)
                    total += w * (worth[s | {j}] - worth[s])
            shares[j - 1] = total
    return PayoffVector.of(shares)


def payoff_for(sys: QueueSystem, p: Partition, rule: PayoffRule) -> PayoffVector:
    if rule.variant == "proportional":
        return proportional_payoff(sys, p)
    if rule.variant == "shapley":
        return shapley_payoff_queue(sys, p)
    assert rule.vector is not None
    check_consistency(sys, p, rule.vector)
    return rule.vector


def check_consistency(sys: QueueSystem, p: Partition, payoff: PayoffVector) -> None:
    worths = we_worths(sys, p)
    for c, worth in zip(p.coalitions, worths):
        got = payoff.coalition_sum(c)
        if abs(got - worth) > CONSISTENCY_TOL * max(1.0, sys.lambda_total):
            raise DomainError(
                f"payoff inconsistent with WE worth for {c.format()}: {got} vs {worth}"
            )


def make_configuration(sys: QueueSystem, p: Partition, payoff: PayoffVector | PayoffRule) -> Configuration:
    vec = payoff_for(sys, p, payoff) if isinstance(payoff, PayoffRule) else payoff
    check_consistency(sys, p, vec)
    return Configuration(p, vec)


def _all_outside_coalitions(n: int, p: Partition) -> list[Coalition]:
    out = []
    agents = list(range(1, n + 1))
    for r in range(1, n + 1):
        for combo in combinations(agents, r):
            c = Coalition(combo)
            if c not in p.coalitions:
                out.append(c)
    return out


def _kind_of(p: Partition, q: Coalition) -> str:
    members = set(q.members)
    for c in p.coalitions:
        if members < set(c.members):
            return "split"
    covered: set[int] = set()
    parts = 0
    for c in p.coalitions:
        cm = set(c.members)
        if cm <= members:
            covered |= cm
            parts += 1
    if covered == members and parts >= 2:
        return "merger"
    return "general"


def _apply_block(p: Partition, q: Coalition) -> Partition:
    """Partition after q forms: every other coalition keeps its leftovers."""
    members = set(q.members)
    groups: list[list[int]] = [sorted(members)]
    for c in p.coalitions:
        rest = [i for i in c if i not in members]
        if rest:
            groups.append(rest)
    return Partition.of(p.n, groups)


def _gbpa_candidate_order(sys: QueueSystem, p: Partition) -> list[Coalition]:
    """Constructive candidates from the impossibility proof first, then the rest."""
    n = sys.n
    ordered: list[Coalition] = []
    for j in range(1, n + 1):
        if n > 1:
            ordered.append(Coalition.of(i for i in range(1, n + 1) if i != j))
    for j in range(1, n + 1):
        ordered.append(Coalition((j,)))
    seen = {c for c in ordered}
    for c in _all_outside_coalitions(n, p):
        if c not in seen:
            ordered.append(c)
    return [c for c in ordered if c not in p.coalitions]


def gbpa_check(sys: QueueSystem, cfg: Configuration) -> StabilityVerdict:
    """Stability under general blocking with perfect assessment."""
    check_consistency(sys, cfg.partition, cfg.payoff)
    eps = _margin(sys)
    grand = Coalition.of(range(1, sys.n + 1))
    for q in _gbpa_candidate_order(sys, cfg.partition):
        if q == grand:
            continue  # pessimal worth equals total payoff; never strict
        anticipated = pessimal_rate(sys, q)
        prevailing = cfg.payoff.coalition_sum(q)
        if anticipated > prevailing + eps:
            return StabilityVerdict(
                False,
                BlockingWitness(q, _kind_of(cfg.partition, q), anticipated, prevailing),
            )
    return StabilityVerdict(True)


def _merger_blocks(sys: QueueSystem, p: Partition, worths, q: Coalition) -> tuple[bool, float, float]:
    members = set(q.members)
    prevailing = sum(w for c, w in zip(p.coalitions, worths) if set(c.members) <= members)
    anticipated = pessimal_rate(sys, q)
    blocked = anticipated > prevailing + _margin(sys)
    if blocked:
        # the projection partition gives at least the pessimal worth, so the
        # final-validation condition is implied for mergers; assert it
        new_rate = _rate_after_block(sys, p, q)
        assert new_rate >= anticipated - _margin(sys)
    return blocked, anticipated, prevailing


def _rate_after_block(sys: QueueSystem, p: Partition, q: Coalition) -> float:
    moved = _apply_block(p, q)
    idx = moved.coalitions.index(Coalition.of(q.members))
    return solve_we(sys, moved).rates[idx]


def rbpa_check(sys: QueueSystem, cfg: Configuration) -> StabilityVerdict:
    """Restricted blocking (mergers/splits) with perfect assessment."""
    check_consistency(sys, cfg.partition, cfg.payoff)
    p = cfg.partition
    eps = _margin(sys)
    grand = Coalition.of(range(1, sys.n + 1))
    candidates = sorted(set(mergers_of(p)) | set(splits_of(p)), key=lambda c: c.members)
    for q in candidates:
        if q == grand:
            continue
        anticipated = pessimal_rate(sys, q)
        prevailing = cfg.payoff.coalition_sum(q)
        if anticipated > prevailing + eps:
            return StabilityVerdict(
                False, BlockingWitness(q, _kind_of(p, q), anticipated, prevailing)
            )
    return StabilityVerdict(True)


def rbia_check(sys: QueueSystem, cfg: Configuration) -> StabilityVerdict:
    """Restricted blocking with imperfect assessment of prevailing worths."""
    check_consistency(sys, cfg.partition, cfg.payoff)
    p = cfg.partition
    worths = we_worths(sys, p)
    eps = _margin(sys)
    grand = Coalition.of(range(1, sys.n + 1))
    candidates = sorted(set(mergers_of(p)) | set(splits_of(p)), key=lambda c: c.members)
    for q in candidates:
        if q == grand:
            continue
        kind = _kind_of(p, q)
        if kind == "merger":
            blocked, anticipated, prevailing = _merger_blocks(sys, p, worths, q)
            if blocked:
                return StabilityVerdict(False, BlockingWitness(q, kind, anticipated, prevailing))
        else:
            parent = p.coalition_of(q.members[0])
            assessed = sys.coalition_servers(q) / sys.coalition_servers(parent) * worths[
                p.coalitions.index(parent)
            ]
            anticipated = pessimal_rate(sys, q)
            if anticipated > assessed + eps:
                validated = _rate_after_block(sys, p, q)
                if validated > cfg.payoff.coalition_sum(q) + eps:
                    return StabilityVerdict(False, BlockingWitness(q, kind, anticipated, assessed))
    return StabilityVerdict(True)


_CHECKS = {"gbpa": gbpa_check, "rbpa": rbpa_check, "rbia": rbia_check}


def check_stability(sys: QueueSystem, cfg: Configuration, rule: str) -> StabilityVerdict:
    if rule not in _CHECKS:
        raise DomainError(f"unknown stability rule {rule!r}; expected one of {RULES}")
    return _CHECKS[rule](sys, cfg)


def blocking_coalitions(sys: QueueSystem, cfg: Configuration, rule: str) -> list[BlockingWitness]:
    """Every coalition that blocks cfg under the rule, canonical order.

    Used by the dynamics to draw a uniformly random blocking move.
    """
    if rule not in _CHECKS:
        raise DomainError(f"unknown stability rule {rule!r}; expected one of {RULES}")
    p = cfg.partition
    worths = we_worths(sys, p)
    eps = _margin(sys)
    grand = Coalition.of(range(1, sys.n + 1))
    if rule == "gbpa":
        pool = _all_outside_coalitions(sys.n, p)
    else:
        pool = set(mergers_of(p)) | set(splits_of(p))
    candidates = sorted((c for c in pool if c != grand), key=lambda c: c.members)
    found: list[BlockingWitness] = []
    for q in candidates:
        kind = _kind_of(p, q)
        if rule == "rbia":
            if kind == "merger":
                blocked, anticipated, prevailing = _merger_blocks(sys, p, worths, q)
                if blocked:
                    found.append(BlockingWitness(q, kind, anticipated, prevailing))
            else:
                parent = p.coalition_of(q.members[0])
                assessed = sys.coalition_servers(q) / sys.coalition_servers(parent) * worths[
                    p.coalitions.index(parent)
                ]
                anticipated = pessimal_rate(sys, q)
                if anticipated > assessed + eps and _rate_after_block(sys, p, q) > cfg.payoff.coalition_sum(q) + eps:
                    found.append(BlockingWitness(q, kind, anticipated, assessed))
        else:
            anticipated = pessimal_rate(sys, q)
            prevailing = cfg.payoff.coalition_sum(q)
            if anticipated > prevailing + eps:
                found.append(BlockingWitness(q, kind, anticipated, prevailing))
    return found


def apply_block(p: Partition, q: Coalition) -> Partition:
    return _apply_block(p, q)


def rbia_stable_partition(sys: QueueSystem, p: Partition) -> bool:
    """True iff p is RB-IA stable under every consistent payoff.

    Mergers block independently of payoffs; a split that passes the
    first-stage feasibility check can always be completed by some
    consistent payoff (one paying the split's members arbitrarily
    little), so "no merger blocks and no split passes the first-stage
    check" is necessary as well as sufficient.
    """
    worths = we_worths(sys, p)
    eps = _margin(sys)
    grand = Coalition.of(range(1, sys.n + 1))
    for q in mergers_of(p):
        if q == grand:
            continue
        if _merger_blocks(sys, p, worths, q)[0]:
            return False
    for q in splits_of(p):
        parent = p.coalition_of(q.members[0])
        assessed = sys.coalition_servers(q) / sys.coalition_servers(parent) * worths[
            p.coalitions.index(parent)
        ]
        if pessimal_rate(sys, q) > assessed + eps:
            return False
    return True


def gc_stabilizing_payoffs(sys: QueueSystem) -> PayoffVector | None:
    """A payoff stabilizing the grand coalition under RB-IA, if one exists.

    Exists iff some agent owns at least half the servers; the witness
    pays that agent the best pessimal worth over coalitions containing
    it and splits the remainder equally.
    """
    dominant = max(range(1, sys.n + 1), key=lambda i: sys.servers[i - 1])
    n_dom = sys.servers[dominant - 1]
    if 2 * n_dom < sys.total_servers:
        return None
    if sys.n == 1:
        return PayoffVector.of([sys.lambda_total])
    best = 0.0
    others = [i for i in range(1, sys.n + 1) if i != dominant]
    for r in range(0, sys.n - 1):
        for combo in combinations(others, r):
            c = Coalition.of([dominant, *combo])
            best = max(best, pessimal_rate(sys, c))
    shares = [(sys.lambda_total - best) / (sys.n - 1)] * sys.n
    shares[dominant - 1] = best
    return PayoffVector.of(shares)


def rbpa_stable_payoff_exists(sys: QueueSystem, p: Partition) -> tuple[bool, PayoffVector | None]:
    """Exact feasibility of the RB-PA stable-payoff polyhedron for p.

    Per coalition: member payoffs are nonnegative, sum to the WE worth,
    and every sub-coalition keeps at least its pessimal worth. Solved
    exactly over rationals, maximizing the minimum slack so the witness
    is interior whenever the polyhedron has interior.
    """
    worths = we_worths(sys, p)
    shares = [0.0] * sys.n
    lam_cap = Fraction.from_float(float(sys.lambda_total))
    for c, worth in zip(p.coalitions, worths):
        m = len(c)
        if m > SHAPLEY_SIZE_CAP:
            raise SizeCapError(f"coalition {c.format()} exceeds size cap {SHAPLEY_SIZE_CAP}")
        if m == 1:
            shares[c.members[0] - 1] = worth
            continue
        members = list(c.members)
        nv = m + 2  # member payoffs, then t+ and t-
        c_obj = [Fraction(0)] * nv
        c_obj[m] = Fraction(1)
        c_obj[m + 1] = Fraction(-1)
        a_ub: list[list[Fraction]] = []
        b_ub: list[Fraction] = []
        for r in range(1, m):
            for sub in combinations(members, r):
                row = [Fraction(0)] * nv
                for i in sub:
                    row[members.index(i)] = Fraction(-1)
                row[m] = Fraction(1)
                row[m + 1] = Fraction(-1)
                a_ub.append(row)
                b_ub.append(-Fraction.from_float(pessimal_rate(sys, Coalition(sub))))
        cap_row = [Fraction(0)] * nv
        cap_row[m] = Fraction(1)
        cap_row[m + 1] = Fraction(-1)
        a_ub.append(cap_row)
        b_ub.append(lam_cap)
        a_eq = [[Fraction(1)] * m + [Fraction(0), Fraction(0)]]
        b_eq = [Fraction.from_float(float(worth))]
        status, x, value = lp.solve_lp_max(c_obj, a_ub, b_ub, a_eq, b_eq)
        if status != lp.OPTIMAL or value < 0:
            return False, None
        for idx, i in enumerate(members):
            shares[i - 1] = float(x[idx])
    return True, PayoffVector.of(shares)


def unilateral_stable_payoff(sys: QueueSystem, p: Partition) -> PayoffVector:
    """Pessimal singleton worths plus an equal split of each coalition's surplus."""
    worths = we_worths(sys, p)
    shares = [0.0] * sys.n
    for c, worth in zip(p.coalitions, worths):
        floors = {i: pessimal_rate(sys, Coalition((i,))) for i in c}
        surplus = (worth - sum(floors.values())) / len(c)
        for i in c:
            shares[i - 1] = floors[i] + surplus
    return PayoffVector.of(shares)


def light_traffic_stable_set(sys: QueueSystem) -> list[Partition]:
    """Duopolies whose larger side has no sub-coalition above half the servers.

    Purely structural (no WE solve); this is the light-traffic stable set.
    """
    total = sys.total_servers
    out: list[Partition] = []
    for p in enumerate_two_partitions(sys.n):
        sizes = [sys.coalition_servers(c) for c in p.coalitions]
        big = p.coalitions[sizes.index(max(sizes))]
        ok = True
        for r in range(1, len(big)):
            for sub in combinations(big.members, r):
                if 2 * sum(sys.servers[i - 1] for i in sub) > total:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(p)
    return out


def heavy_traffic_stable_set(sys: QueueSystem, verify_at: float | None = None) -> list[Partition]:
    """All duopolies (the heavy-traffic answer), optionally verified numerically."""
    duopolies = enumerate_two_partitions(sys.n)
    if verify_at is not None:
        heavy = sys.with_lambda(verify_at)
        for p in duopolies:
            if not rbia_stable_partition(heavy, p):
                raise ArithmeticError(
                    f"duopoly {p.format()} not RB-IA stable at lambda={verify_at}"
                )
    return duopolies


def verify_witness(sys: QueueSystem, cfg: Configuration, rule: str, w: BlockingWitness) -> bool:
    """Re-verify a witness by recomputing both sides without the WE cache."""
    q = w.coalition
    if len(q) == sys.n:
        return False
    pools = (sys.coalition_servers(q), sys.total_servers - sys.coalition_servers(q))
    canon = tuple(sorted(pools, reverse=True))
    fresh = _pool_rates.__wrapped__(canon, sys.lambda_total, sys.mu)
    anticipated = dict(zip(canon, fresh))[pools[0]]
    eps = _margin(sys)
    if abs(anticipated - w.anticipated_rate) > 1e-6 * max(1.0, sys.lambda_total):
        return False
    if rule == "rbia" and w.kind == "split":
        p = cfg.partition
        parent = p.coalition_of(q.members[0])
        assessed = (
            sys.coalition_servers(q)
            / sys.coalition_servers(parent)
            * we_worths(sys, p)[p.coalitions.index(parent)]
        )
        if not anticipated > assessed + eps:
            return False
        return _rate_after_block(sys, p, q) > cfg.payoff.coalition_sum(q) + eps
    prevailing = (
        cfg.payoff.coalition_sum(q)
        if w.kind != "merger" or rule != "rbia"
        else sum(
            we
            for c, we in zip(cfg.partition.coalitions, we_worths(sys, cfg.partition))
            if set(c.members) <= set(q.members)
        )
    )
    return anticipated > prevailing + eps


def stability_report(
    sys: QueueSystem, p: Partition, rule: str, payoff_rule: PayoffRule
) -> dict:
    """JSON-ready stability report for one (partition, rule, payoff) cell."""
    cfg = make_configuration(sys, p, payoff_rule)
    verdict = check_stability(sys, cfg, rule)
    report = {
        "system": {
            "servers": list(sys.servers),
            "lambda": sys.lambda_total,
            "mu": sys.mu,
        },
        "partition": p.format(),
        "payoff_rule": payoff_rule.variant,
        "verdict": "stable" if verdict.stable else "unstable",
        "witness": None,
    }
    if verdict.witness is not None:
        w = verdict.witness
        report["witness"] = {
            "coalition": w.coalition.format(),
            "kind": w.kind,
            "anticipated": w.anticipated_rate,
            "prevailing": w.prevailing_worth,
        }
    return report
