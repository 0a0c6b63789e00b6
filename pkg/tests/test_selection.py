import numpy as np
import pytest
from scipy import stats

from rarag import kernels
from rarag.errors import ConfigError, ProviderFailure
from rarag.selection import ProviderReply, aggregate_kappa, kappa_rrss, kappa_rss, probe_order
from rarag.simulation import SimulatedProvider, SourceWorld, WorldSpec
from rarag.types import IDK, Answer, PriorSpec, WeightVector


class TableProvider:
    """Replies from a fixed {source_id: (label or None, score)} table."""

    def __init__(self, table):
        self.table = table
        self.n_sources = len(table)
        self.calls = []

    def probe(self, query_id, source_id):
        self.calls.append(source_id)
        label, score = self.table[source_id]
        return ProviderReply(IDK if label is None else Answer.text(label), score)


def test_probe_order_ties_by_id():
    assert probe_order([1.0, 3.0, 1.0, 3.0, -1.0]) == [1, 3, 0, 2, 4]
    assert probe_order(WeightVector.from_w_hat([0.2, 0.9, 0.5])) == [1, 2, 0]


def test_rrss_stops_at_kappa():
    v = [5.0, 4.0, 3.0, 2.0, 1.0, 0.0]
    prov = TableProvider({0: ("a", 1), 1: (None, 0), 2: ("a", 0.05), 3: ("b", 0.9), 4: ("a", 0.9), 5: ("c", 1)})
    sel, log = kappa_rrss(0, v, 3, prov, tau=0.1)
    assert [s for s, _ in sel] == [0, 3, 4]
    assert prov.calls == [0, 1, 2, 3, 4]
    assert log.probes_made == 5 and log.n_selected == 3
    assert [e.was_selected for e in log.entries] == [True, False, False, True, True]
    assert log.entries[2].answer is IDK  # filtered below tau
    assert aggregate_kappa(sel, v).canonical_id == "a"


def test_rrss_exhausts_when_too_few_relevant():
    prov = TableProvider({i: (None, 0.0) for i in range(7)})
    sel, log = kappa_rrss(0, [1.0] * 7, 4, prov, 0.1)
    assert sel == [] and log.probes_made == 7
    assert aggregate_kappa(sel, [1.0] * 7) is IDK


def test_rrss_selected_entries_are_the_non_idk_ones():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 12))
        table = {i: (None if rng.random() < 0.5 else str(rng.integers(3)), float(rng.random())) for i in range(n)}
        v = rng.normal(size=n)
        kappa = int(rng.integers(1, 5))
        sel, log = kappa_rrss(0, v, kappa, TableProvider(table), 0.3)
        order = [e.source_id for e in log.entries]
        assert order == probe_order(v)[: len(order)]
        assert all(e.was_selected == (not e.answer.is_idk) for e in log.entries)
        assert len(sel) == log.n_selected <= kappa


def test_rss_probes_exactly_top_kappa():
    v = [0.1, 0.9, 0.5, 0.7, 0.3, 0.2, 0.8, 0.6, 0.4, 0.0]
    prov = TableProvider({i: (None if i in (1, 6) else "x", 1.0) for i in range(10)})
    resp, log = kappa_rss(0, v, 4, prov, 0.1)
    assert sorted(prov.calls) == [1, 3, 6, 7]
    assert [s for s, _ in resp] == [1, 6, 3, 7]
    assert log.probes_made == 4 and all(e.was_selected for e in log.entries)
    _, log = kappa_rss(0, v, 40, TableProvider(prov.table), 0.1)
    assert log.probes_made == 10


def test_rss_top_sources_all_idk():
    prov = TableProvider({0: (None, 0), 1: (None, 0), 2: ("x", 1)})
    resp, _ = kappa_rss(0, [3, 2, 1], 2, prov, 0.1)
    assert aggregate_kappa(resp, [3, 2, 1]) is IDK


def test_rss_concurrent_matches_sequential():
    prov = TableProvider({i: (str(i % 3), 1.0) for i in range(8)})
    v = list(range(8))
    assert kappa_rss(0, v, 5, prov, 0.1) == kappa_rss(0, v, 5, prov, 0.1, max_in_flight=4)


def test_aggregate_kappa_example():
    v = [0.0] * 8
    v[3], v[7], v[1], v[5] = 6.1, 5.4, 4.1, 3.8
    resp = [(3, Answer.text("gold")), (7, Answer.text("gold")), (1, Answer.text("d2")), (5, Answer.text("d2"))]
    assert aggregate_kappa(resp, v).canonical_id == "gold"
    assert aggregate_kappa(resp[2:3], v).canonical_id == "d2"
    same = [(i, Answer.text("z")) for i in range(3)]
    assert aggregate_kappa(same, [-5, -5, -5]).canonical_id == "z"


def test_kappa_validation():
    with pytest.raises(ConfigError):
        kappa_rrss(0, [1, 1], 0, TableProvider({0: ("a", 1), 1: ("a", 1)}), 0.1)


def test_provider_failure_is_not_idk():
    class Broken:
        n_sources = 3

        def probe(self, q, s):
            if s == 1:
                raise ProviderFailure(s, "connection reset")
            return ProviderReply(IDK, 0.0)

    with pytest.raises(ProviderFailure) as exc:
        kappa_rrss(0, [3, 2, 1], 2, Broken(), 0.1)
    assert exc.value.source_id == 1

    bad = TableProvider({0: ("a", 1.4), 1: ("a", 1.0)})
    with pytest.raises(ProviderFailure):
        kappa_rrss(0, [1, 0], 1, bad, 0.1)


def test_object_route_matches_kernel_route():
    spec = WorldSpec(60, 12, PriorSpec.beta(0.6), seed=99)
    world = SourceWorld.from_spec(spec)
    rng = np.random.default_rng(4)
    v = rng.normal(size=12) * 2
    order = np.asarray(probe_order(v))
    codes = world.codes(np.arange(60), tau=0.1)
    for relevance, fn in ((True, kappa_rrss), (False, kappa_rss)):
        win, col, probes, _ = kernels.select_rows(codes, order, v, 4, relevance)
        for j in range(60):
            sel, log = fn(j, v, 4, SimulatedProvider(world), 0.1)
            ans = aggregate_kappa(sel, v)
            assert log.probes_made == probes[j]
            if win[j] < 0:
                assert ans is IDK
            else:
                assert ans == world.answer(j, int(win[j]), int(world.draw([j], [int(col[j])]).paraphrase[0, 0]))


def _rrss_probe_counts(n_sources, n_queries, q, kappa=4, seed=0, block=10_000):
    rng = np.random.default_rng(seed)
    order = np.arange(n_sources)
    w = np.ones(n_sources)
    out = []
    for start in range(0, n_queries, block):
        m = min(block, n_queries - start)
        codes = np.where(rng.random((m, n_sources)) < q, 0, -1).astype(np.int64)
        out.append(kernels.select_rows(codes, order, w, kappa, True)[2])
    return np.concatenate(out)


def test_rrss_probe_count_negative_binomial():
    probes = _rrss_probe_counts(1000, 100_000, 0.6)
    expected = 4 / 0.6
    assert abs(probes.mean() - expected) / expected < 0.01


def test_probe_count_at_small_n_is_truncated_negative_binomial():
    n, kappa, q = 10, 4, 0.6
    probes = _rrss_probe_counts(n, 100_000, q, kappa, seed=1)
    # E[min(T, N)] = sum_{k<N} P(T > k) = sum_{k<N} P(Binomial(k, q) < kappa)
    expected = sum(stats.binom.cdf(kappa - 1, k, q) for k in range(n))
    sem = probes.std() / np.sqrt(probes.size)
    assert abs(probes.mean() - expected) < 4 * sem
