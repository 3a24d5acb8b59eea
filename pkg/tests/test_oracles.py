import pytest

from coalgame import kelly as kl
from coalgame import oracles as orc
from coalgame import queue_stability as qs
from coalgame.errors import SizeCapError
from coalgame.partitions import Coalition, Partition, enumerate_partitions
from coalgame.wardrop import QueueSystem, pessimal_rate


def test_budget_validation():
    with pytest.raises(SizeCapError):
        orc.OracleBudget(max_agents=0)


def test_pessimal_exhaustive_basics():
    s = QueueSystem.of([3, 2], 4.0)
    q = Coalition.of([1])
    assert orc.pessimal_rate_exhaustive(s, q) == pytest.approx(
        pessimal_rate(s, q), abs=1e-12
    )
    assert orc.pessimal_rate_exhaustive(s, Coalition.of([1, 2])) == s.lambda_total
    with pytest.raises(SizeCapError):
        orc.pessimal_rate_exhaustive(QueueSystem.of([1] * 7, 3.0), Coalition.of([1]))


def test_pessimal_exhaustive_agrees_with_engine(rng):
    for _ in range(8):
        n = rng.randint(3, 5)
        servers = [rng.randint(1, 9) for _ in range(n)]
        s = QueueSystem.of(servers, rng.uniform(0.3, 3.0) * sum(servers))
        q = Coalition.of(rng.sample(range(1, n + 1), rng.randint(1, n - 1)))
        assert orc.pessimal_rate_exhaustive(s, q) == pytest.approx(
            pessimal_rate(s, q), abs=1e-9
        )


def test_best_response_examples():
    s = kl.KellySystem.of([1.0, 1.0], adamant_eta=1.0)
    res = orc.best_response_rsg(s, Partition.grand(2))
    assert res.converged
    assert res.utilities[0] == pytest.approx(0.25, abs=1e-4)
    assert res.adamant_utility == pytest.approx(0.25, abs=1e-4)

    s2 = kl.KellySystem.of([3.0, 2.0, 1.0])
    res2 = orc.best_response_rsg(s2, Partition.singletons(3))
    assert res2.converged
    assert res2.utilities == pytest.approx((9 / 25, 4 / 25, 0.0), abs=1e-4)
    assert res2.utilities[2] == pytest.approx(0.0, abs=1e-6)  # insignificant bids ~0


def test_best_response_matches_closed_form(rng):
    for _ in range(15):
        n = rng.randint(2, 5)
        s = kl.KellySystem.of(
            [rng.uniform(0.5, 50.0) for _ in range(n)], gamma=rng.uniform(0.5, 5.0)
        )
        parts = list(enumerate_partitions(n))
        p = parts[rng.randrange(len(parts))]
        res = orc.best_response_rsg(s, p)
        assert res.converged, res.diagnostic
        closed = kl.rsg_ne(s, p).coalition_utilities
        assert max(abs(a - b) for a, b in zip(res.utilities, closed)) <= 1e-4


def test_exhaustive_ne_small_tables():
    s2 = kl.KellySystem.of([1.0] * 2, adamant_eta=1.0)
    got = {p.format() for p in orc.exhaustive_ne_partitions(s2)}
    assert got == {"{{1,2}}", "{{1},{2}}"}

    s3 = kl.KellySystem.of([1.0] * 3, adamant_eta=1.0)
    got3 = {p.format() for p in orc.exhaustive_ne_partitions(s3)}
    assert got3 == {"{{1},{2},{3}}"}

    s4 = kl.KellySystem.of([1.0] * 4, adamant_eta=3.0)
    got4 = {kl.partition_class(s4, p) for p in orc.exhaustive_ne_partitions(s4)}
    assert got4 == {"TTC", "ALC"}

    with pytest.raises(SizeCapError):
        orc.exhaustive_ne_partitions(kl.KellySystem.of([1.0] * 5))


def test_exhaustive_ne_matches_u_stable_scan(rng):
    # every U-stable partition is an NE-partition; for profiles forming a
    # unique partition the converse filtering happens inside the oracle
    for _ in range(3):
        n = rng.randint(2, 4)
        s = kl.KellySystem.of([rng.uniform(0.5, 20.0) for _ in range(n)])
        ne = set(orc.exhaustive_ne_partitions(s))
        for p, ok in kl.stable_partition_scan(s):
            if ok:
                assert p in ne, f"U-stable {p.format()} missing from NE set"


def test_gbpa_witness_oracle():
    s = QueueSystem.of([3, 2], 4.0)
    cfg = qs.make_configuration(s, Partition.singletons(2), qs.PayoffRule.proportional())
    assert orc.gbpa_exhaustive_witness(s, cfg) is None
    assert qs.gbpa_check(s, cfg).stable

    s3 = QueueSystem.of([4, 2, 3], 6.0)
    for p in enumerate_partitions(3):
        cfg3 = qs.make_configuration(s3, p, qs.PayoffRule.proportional())
        w = orc.gbpa_exhaustive_witness(s3, cfg3)
        v = qs.gbpa_check(s3, cfg3)
        assert (w is None) == v.stable
        assert w is not None  # impossibility at n >= 3
        assert w.anticipated_rate > w.prevailing_worth
