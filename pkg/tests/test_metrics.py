import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lteu_pcf import des_engine
from lteu_pcf.core_model import Direction, NodeKind
from lteu_pcf.metrics import (
    Dir,
    NodeCounters,
    TraceMetrics,
    class_throughput,
    dl_opportunity_pct,
    jain_index,
    mean_std,
    network_throughput,
    successful_access_pct,
    successful_dl_pct,
    throughput,
)


def _tm(window=(0, 1000), **nodes):
    nodes = nodes or {"AP": NodeCounters(), "STA1": NodeCounters()}
    return TraceMetrics(
        window=window,
        nodes=nodes,
        net_bits_dl=sum(c.bits_dl for c in nodes.values()),
        net_bits_ul=sum(c.bits_ul for c in nodes.values()),
    )


def test_zero_successes_zero_throughput():
    tm = _tm()
    assert throughput(tm, "STA1") == 0
    assert network_throughput(tm) == 0


def test_one_burst_per_millisecond():
    tm = _tm(AP=NodeCounters(), STA1=NodeCounters(bits_dl=32592, successful_exchanges=1, attempted_exchanges=1))
    assert throughput(tm, "STA1", Dir.DL) == pytest.approx(32.592)
    assert throughput(tm, "STA1", "ul") == 0


def test_access_pct_conventions():
    assert successful_access_pct(_tm(), "AP") == 0
    only = _tm(AP=NodeCounters(successful_exchanges=5, attempted_exchanges=6), STA1=NodeCounters())
    assert successful_access_pct(only, "AP") == 100


def test_percent_guards():
    tm = _tm()
    assert dl_opportunity_pct(tm) == 0
    assert successful_dl_pct(tm) == 0


def test_jain_examples():
    assert jain_index([5, 5]) == 1.0
    assert jain_index([10, 0]) == 0.5
    assert jain_index([3, 3, 3, 3]) == 1.0
    with pytest.raises(ValueError):
        jain_index([])


def test_mean_std():
    assert mean_std([4.0]) == (4.0, 0.0)
    m, s = mean_std([1.0, 2.0, 3.0])
    assert (m, s) == (2.0, 1.0)


def test_violations_reported():
    bad = _tm(AP=NodeCounters(successful_exchanges=2, attempted_exchanges=1))
    assert "AP: successes exceed attempts" in bad.violations()
    assert _tm(window=(5, 5)).violations()


def test_empty_window_rejected():
    with pytest.raises(ValueError):
        throughput(_tm(window=(3, 3)), "STA1")


def test_dl_only_without_interference_is_clean(fig1):
    sc = fig1.with_(nodes=tuple(n for n in fig1.nodes if n.kind != NodeKind.LTE_ENB), sim_duration=1.0, warmup_periods=1)
    tm = des_engine.run(sc, seed=1)
    assert successful_dl_pct(tm) == 100.0
    assert dl_opportunity_pct(tm) == 100.0


def test_standard_full_duty_victim_has_no_access(fig1_uldl_short):
    tm = des_engine.run(fig1_uldl_short.with_(eta=1.0), seed=1)
    assert successful_access_pct(tm, "STA1") == 0
    assert class_throughput(tm, victim=True) == 0


def test_three_contenders_share_access(fig1):
    tm = des_engine.run(fig1.with_(traffic__direction_mode=Direction.UL_AND_DL, sim_duration=4.0), seed=2)
    for node in ("AP", "STA1", "STA2"):
        assert successful_access_pct(tm, node) == pytest.approx(33.3, abs=2.5)


counters = st.builds(
    NodeCounters,
    bits_dl=st.integers(0, 10**9),
    bits_ul=st.integers(0, 10**9),
    successful_exchanges=st.integers(0, 1000),
    attempted_exchanges=st.integers(1000, 2000),
)


@given(a=st.dictionaries(st.sampled_from(["AP", "S1", "S2", "S3"]), counters, min_size=1),
       b=st.dictionaries(st.sampled_from(["AP", "S1", "S2", "S3"]), counters, min_size=1),
       d1=st.integers(1, 10**6), d2=st.integers(1, 10**6))
def test_merge_is_duration_weighted(a, b, d1, d2):
    a.setdefault("AP", NodeCounters())
    b.setdefault("AP", NodeCounters())
    w1 = _tm((0, d1), **a)
    w2 = _tm((d1, d1 + d2), **b)
    both = w1.merge(w2)
    assert both.window == (0, d1 + d2)
    for node in both.nodes:
        expected = (
            (throughput(w1, node) * d1 if node in w1.nodes else 0)
            + (throughput(w2, node) * d2 if node in w2.nodes else 0)
        ) / (d1 + d2)
        assert throughput(both, node) == pytest.approx(expected, rel=1e-12, abs=1e-12)
    assert network_throughput(both) == pytest.approx(
        (network_throughput(w1) * d1 + network_throughput(w2) * d2) / (d1 + d2), rel=1e-12
    )


def test_merge_requires_contiguous_windows():
    with pytest.raises(ValueError):
        _tm((0, 10)).merge(_tm((11, 20)))


@given(st.dictionaries(st.text(min_size=1, max_size=4), counters, min_size=1, max_size=6), st.randoms())
def test_totals_invariant_under_relabeling(nodes, rnd):
    names = list(nodes)
    shuffled = names[:]
    rnd.shuffle(shuffled)
    relabeled = {f"n{shuffled.index(k)}": v for k, v in nodes.items()}
    t1, t2 = _tm(**nodes), _tm(**relabeled)
    for d in Dir:
        assert network_throughput(t1, d) == network_throughput(t2, d)
    total = sum(c.successful_exchanges for c in nodes.values())
    if total:
        assert math.fsum(successful_access_pct(t1, n) for n in nodes) == pytest.approx(100.0)
