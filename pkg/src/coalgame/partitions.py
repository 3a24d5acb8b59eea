"""Agent sets, coalitions, partitions and their combinatorics.

Conventions used everywhere in this package:

* agents are labelled 1..n;
* a coalition is stored as a sorted tuple of distinct agent labels;
* a partition stores its coalitions sorted by smallest member;
* the text form of a partition is ``{{1,2},{3}}`` (canonical order,
  no spaces) and round-trips through :func:`parse_partition`.

All types are immutable values and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

from .errors import DomainError, SizeCapError

ENUMERATION_CAP = 12  # Bell(12) ~ 4.2e6; desk-scale studies stay at n <= 5


@dataclass(frozen=True)
class AgentSet:
    """The set of strategic agents, labelled 1..n."""

    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"agent count must be a positive integer, got {self.n!r}")

    @property
    def labels(self) -> range:
        return range(1, self.n + 1)


@dataclass(frozen=True, order=True)
class Coalition:
    """A nonempty set of agents, canonically a sorted tuple."""

    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("coalition must be nonempty")
        if list(self.members) != sorted(set(self.members)):
            raise DomainError(f"coalition members must be sorted and distinct: {self.members}")
        if self.members[0] < 1:
            raise DomainError(f"agent labels start at 1: {self.members}")

    @classmethod
    def of(cls, members: Iterable[int]) -> "Coalition":
        return cls(tuple(sorted(set(int(m) for m in members))))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, agent: int) -> bool:
        return agent in self.members

    def union(self, *others: "Coalition") -> "Coalition":
        merged: set[int] = set(self.members)
        for c in others:
            merged.update(c.members)
        return Coalition.of(merged)

    def issubset(self, other: "Coalition") -> bool:
        return set(self.members) <= set(other.members)

    def format(self) -> str:
        return "{" + ",".join(str(m) for m in self.members) + "}"


@dataclass(frozen=True)
class Partition:
    """A disjoint, exhaustive set of coalitions over agents 1..n."""

    n: int
    coalitions: tuple[Coalition, ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for c in self.coalitions:
            if seen & set(c.members):
                raise DomainError(f"coalitions overlap: {self.format()}")
            seen.update(c.members)
        if seen != set(range(1, self.n + 1)):
            raise DomainError(
                f"partition does not cover agents 1..{self.n}: {self.format()}"
            )
        if list(self.coalitions) != sorted(self.coalitions, key=lambda c: c.members[0]):
            raise DomainError(f"coalitions must be ordered by smallest member: {self.format()}")

    @classmethod
    def of(cls, n: int, groups: Iterable[Iterable[int]]) -> "Partition":
        coalitions = sorted((Coalition.of(g) for g in groups), key=lambda c: c.members[0])
        return cls(n, tuple(coalitions))

    @classmethod
    def grand(cls, n: int) -> "Partition":
        return cls.of(n, [range(1, n + 1)])

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls.of(n, [[i] for i in range(1, n + 1)])

    def __len__(self) -> int:
        return len(self.coalitions)

    def __iter__(self) -> Iterator[Coalition]:
        return iter(self.coalitions)

    def __contains__(self, coalition: Coalition) -> bool:
        return coalition in self.coalitions

    def coalition_of(self, agent: int) -> Coalition:
        for c in self.coalitions:
            if agent in c:
                return c
        raise DomainError(f"agent {agent} not in partition {self.format()}")

    def format(self) -> str:
        return "{" + ",".join(c.format() for c in self.coalitions) + "}"


def parse_partition(text: str, n: int | None = None) -> Partition:
    """Parse the ``{{1,2},{3}}`` text form.

    When ``n`` is omitted it is inferred as the number of agents
    mentioned; the partition must still cover 1..n exactly.
    """
    s = text.replace(" ", "")
    if not (s.startswith("{") and s.endswith("}")):
        raise DomainError(f"partition text must be brace-delimited, got {text!r}")
    body = s[1:-1]
    groups: list[list[int]] = []
    i = 0
    while i < len(body):
        if body[i] == ",":
            i += 1
            continue
        if body[i] != "{":
            raise DomainError(f"unexpected token {body[i]!r} in partition {text!r}")
        j = body.find("}", i)
        if j < 0:
            raise DomainError(f"unbalanced braces in partition {text!r}")
        inner = body[i + 1 : j]
        members = []
        for tok in inner.split(","):
            if not tok:
                raise DomainError(f"empty coalition member in partition {text!r}")
            try:
                members.append(int(tok))
            except ValueError:
                raise DomainError(f"bad agent label {tok!r} in partition {text!r}") from None
        groups.append(members)
        i = j + 1
    if not groups:
        raise DomainError(f"no coalitions in partition {text!r}")
    agents = sorted(a for g in groups for a in g)
    inferred = max(agents)
    if n is None:
        n = inferred
    return Partition.of(n, groups)


def bell_number(n: int) -> int:
    """Bell number via the triangle recurrence."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _as_n(agents: AgentSet | int) -> int:
    return agents.n if isinstance(agents, AgentSet) else int(agents)


def enumerate_partitions(agents: AgentSet | int, max_n: int = ENUMERATION_CAP) -> Iterator[Partition]:
    """Yield every partition of 1..n exactly once, in canonical order.

    Enumeration walks restricted-growth strings lexicographically, which
    produces partitions whose block order already matches the canonical
    smallest-member order. Count equals Bell(n).
    """
    n = _as_n(agents)
    if n < 1:
        raise DomainError(f"need at least one agent, got {n}")
    if n > max_n:
        raise SizeCapError(
            f"refusing to enumerate partitions of {n} agents (cap {max_n}, Bell({n})={bell_number(n)})"
        )

    code = [0] * n

    def emit() -> Partition:
        k = max(code) + 1
        groups: list[list[int]] = [[] for _ in range(k)]
        for idx, block in enumerate(code):
            groups[block].append(idx + 1)
        return Partition.of(n, groups)

    while True:
        yield emit()
        # next restricted-growth string: code[i] <= max(code[:i]) + 1
        i = n - 1
        while i > 0:
            if code[i] <= max(code[:i]):
                code[i] += 1
                for j in range(i + 1, n):
                    code[j] = 0
                break
            code[i] = 0
            i -= 1
        else:
            return


def enumerate_two_partitions(agents: AgentSet | int) -> list[Partition]:
    """All partitions with exactly two coalitions; count is 2^(n-1) - 1."""
    n = _as_n(agents)
    if n < 2:
        raise DomainError(f"2-partitions need n >= 2, got {n}")
    out: list[Partition] = []
    rest = list(range(2, n + 1))
    # agent 1's side determines the duopoly uniquely
    for r in range(0, n - 1):
        for extra in combinations(rest, r):
            side1 = [1, *extra]
            side2 = [a for a in rest if a not in extra]
            out.append(Partition.of(n, [side1, side2]))
    return out


def mergers_of(p: Partition) -> list[Coalition]:
    """Every union of >= 2 coalitions of p (the grand merger included)."""
    out: list[Coalition] = []
    k = len(p.coalitions)
    for r in range(2, k + 1):
        for combo in combinations(p.coalitions, r):
            out.append(combo[0].union(*combo[1:]))
    out = [c for c in out if c not in p.coalitions]
    return sorted(out, key=lambda c: c.members)


def splits_of(p: Partition) -> list[Coalition]:
    """Every nonempty strict subset of a single coalition of p."""
    out: list[Coalition] = []
    for c in p.coalitions:
        for r in range(1, len(c)):
            for sub in combinations(c.members, r):
                out.append(Coalition(sub))
    return sorted(out, key=lambda c: c.members)


def coarser_than(p1: Partition, p2: Partition) -> bool:
    """True iff p1 != p2 and every coalition of p2 lies inside one of p1."""
    if p1.n != p2.n:
        raise DomainError(f"partitions over different agent sets: {p1.n} vs {p2.n}")
    if p1 == p2:
        return False
    return all(any(c2.issubset(c1) for c1 in p1.coalitions) for c2 in p2.coalitions)


@dataclass(frozen=True)
class PayoffVector:
    """Per-agent nonnegative payoff shares."""

    shares: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(s < -1e-9 for s in self.shares):
            raise DomainError(f"payoff shares must be nonnegative: {self.shares}")

    @classmethod
    def of(cls, shares: Iterable[float]) -> "PayoffVector":
        return cls(tuple(float(s) for s in shares))

    def __len__(self) -> int:
        return len(self.shares)

    def __getitem__(self, i: int) -> float:
        return self.shares[i]

    def agent(self, label: int) -> float:
        return self.shares[label - 1]

    def coalition_sum(self, c: Coalition) -> float:
        return sum(self.shares[m - 1] for m in c)


@dataclass(frozen=True)
class Configuration:
    """A partition paired with a payoff vector consistent with it.

    Consistency (per-coalition sums equal to the owning game's worths)
    is checked by the game module that builds the configuration.
    """

    partition: Partition
    payoff: PayoffVector

    def __post_init__(self) -> None:
        if len(self.payoff) != self.partition.n:
            raise DomainError(
                f"payoff length {len(self.payoff)} != agent count {self.partition.n}"
            )
