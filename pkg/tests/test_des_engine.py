import hashlib
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lteu_pcf import analytic_model as am
from lteu_pcf import des_engine as de
from lteu_pcf.core_model import ContentionParams, Direction, NodeKind, Scheme
from lteu_pcf.metrics import class_throughput, successful_access_pct
from lteu_pcf.pcf_coordinator import sync_controller
from lteu_pcf.phy_channel import LinkMap

P = ContentionParams()


def _state(cw, retries=0):
    return de.DcfState(cw=cw, retry_count=retries, pending_frame=de.Frame("AP", "STA1", retries))


def test_retry_doubles_window():
    assert de.retry_update(_state(16), de.Outcome.SINR_FAIL, P).cw == 32


def test_retry_clamps_at_cw_max():
    assert de.retry_update(_state(1024, 3), de.Outcome.COLLISION, P).cw == 1024


def test_retry_limit_drop_walk():
    s = _state(16)
    windows = []
    for _ in range(6):
        s = de.retry_update(s, False, P)
        windows.append(s.cw)
        assert s.pending_frame is not None
    assert windows == [32, 64, 128, 256, 512, 1024]
    assert s.retry_count == 6
    s = de.retry_update(s, False, P)
    assert (s.cw, s.retry_count, s.pending_frame) == (16, 0, None)


def test_success_resets():
    s = de.retry_update(_state(256, 4), de.Outcome.SUCCESS, P)
    assert (s.cw, s.retry_count, s.pending_frame) == (16, 0, None)


@given(st.lists(st.booleans(), max_size=60))
def test_retry_state_stays_in_range(outcomes):
    s = _state(16)
    for ok in outcomes:
        s = de.retry_update(s, ok, P)
        assert P.cw_min <= s.cw <= P.cw_max
        assert 0 <= s.retry_count < P.retry_limit
        if s.pending_frame is None:
            s = _state(s.cw)


def test_backoff_draw_cw_one():
    rng = de.make_rng(1, "AP")
    assert all(de.backoff_draw(rng, 1) == 0 for _ in range(100))


def test_backoff_draw_mean():
    rng = de.make_rng(7, "AP")
    draws = [de.backoff_draw(rng, 16) for _ in range(10**6)]
    assert min(draws) == 0 and max(draws) == 15
    assert statistics.fmean(draws) == pytest.approx(7.5, abs=0.05)


def test_rng_streams_reproducible_and_distinct():
    a = [de.make_rng(3, "STA1").random() for _ in range(3)]
    b = [de.make_rng(3, "STA1").random() for _ in range(3)]
    assert a == b
    assert de.make_rng(3, "STA1").random() != de.make_rng(3, "STA2").random()
    assert de.make_rng(3, "STA1").random() != de.make_rng(4, "STA1").random()


def test_backoff_draw_rejects_zero_window():
    with pytest.raises(ValueError):
        de.backoff_draw(de.make_rng(1, "x"), 0)


def test_resolve_medium_examples(fig1):
    links = LinkMap(fig1)
    assert de.resolve_medium(["AP"], {"AP": "STA1"}, True, links) == {"AP": de.Outcome.SINR_FAIL}
    assert de.resolve_medium(["AP"], {"AP": "STA2"}, True, links) == {"AP": de.Outcome.SUCCESS}
    assert de.resolve_medium(["AP"], {"AP": "STA1"}, False, links) == {"AP": de.Outcome.SUCCESS}
    both = de.resolve_medium(["STA1", "STA2"], {"STA1": "AP", "STA2": "AP"}, False, links)
    assert both == {"STA1": de.Outcome.COLLISION, "STA2": de.Outcome.COLLISION}
    with pytest.raises(ValueError):
        de.resolve_medium([], {}, False, links)


def test_event_priority_order():
    order = sorted(de.EventKind, key=int)
    assert order[0] == de.EventKind.LTE_OFF_START
    assert order[-1] == de.EventKind.BACKOFF_EXPIRE


def test_zero_stations_rejected(fig1):
    sc = fig1.with_(nodes=tuple(n for n in fig1.nodes if n.kind != NodeKind.WIFI_STA))
    with pytest.raises(ValueError):
        de.run(sc)


def test_invalid_scenario_rejected(fig1):
    with pytest.raises(ValueError):
        de.run(fig1.with_(eta=2.0))


def test_victim_starves_at_full_duty(fig1_short):
    tm = de.run(fig1_short.with_(eta=1.0), seed=2)
    assert class_throughput(tm, victim=True) == 0
    assert class_throughput(tm, victim=False) > 0


def test_symmetric_at_eta_zero(fig1):
    tm = de.run(fig1.with_(eta=0.0), seed=1)
    v, nv = class_throughput(tm, True), class_throughput(tm, False)
    assert abs(v - nv) / nv < 0.05


@pytest.mark.parametrize("eta", [0.2, 0.5])
def test_standard_matches_closed_form(fig1, eta):
    inp = am.inputs_from_scenario(fig1, eta=eta)
    ref = am.standard_throughputs(inp)
    tms = [de.run(fig1.with_(eta=eta), seed=s) for s in (1, 2, 3)]
    v = statistics.fmean(class_throughput(t, True) for t in tms)
    nv = statistics.fmean(class_throughput(t, False) for t in tms)
    assert v == pytest.approx(float(ref.gamma_v), rel=0.10)
    assert nv == pytest.approx(float(ref.gamma_nv), rel=0.10)


def test_dcf_access_fairness_with_lte_off(fig1):
    # AP plus two saturated uplink stations, LTE silent: equal access shares
    tm = de.run(fig1.with_(eta=0.0, traffic__direction_mode=Direction.UL_AND_DL), seed=5)
    shares = [successful_access_pct(tm, n) for n in ("AP", "STA1", "STA2")]
    assert sum(shares) == pytest.approx(100.0)
    for s in shares:
        assert s == pytest.approx(100 / 3, abs=2.0)


def _trace_hash(sc, seed):
    trace = []
    tm = de.run(sc, seed=seed, trace=trace)
    return hashlib.sha256("\n".join(trace).encode()).hexdigest(), tm.fingerprint(), trace


@pytest.mark.parametrize("scheme", list(Scheme))
def test_replay_is_bit_exact(fig1_uldl_short, scheme):
    sc = fig1_uldl_short.with_(eta=0.6, scheme=scheme)
    h1, f1, _ = _trace_hash(sc, 11)
    h2, f2, _ = _trace_hash(sc, 11)
    h3, _, _ = _trace_hash(sc, 12)
    assert (h1, f1) == (h2, f2)
    assert h3 != h1


def test_trace_time_monotone_and_well_formed(fig1_uldl_short):
    _, _, trace = _trace_hash(fig1_uldl_short.with_(eta=0.5, scheme=Scheme.PROPOSED), 4)
    times = [int(line.split("\t")[0]) for line in trace]
    assert times == sorted(times)
    kinds = {k.name for k in de.EventKind}
    assert all(len(line.split("\t")) == 4 and line.split("\t")[1] in kinds for line in trace)


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("direction", list(Direction))
def test_victim_gets_nothing_during_on(fig1_short, scheme, direction):
    sc = fig1_short.with_(eta=0.5, scheme=scheme, traffic__direction_mode=direction)
    trace = []
    de.run(sc, seed=9, trace=trace)
    sched = sync_controller(sc.timings.beacon_interval, sc.eta)
    delivered = 0
    for line in trace:
        t, kind, subject, outcome = line.split("\t")
        if kind == "TX_END" and outcome == "STA1:SUCCESS":
            delivered += 1
            assert not sched.lte_on(int(t))
    assert delivered > 0


@settings(max_examples=12, deadline=None)
@given(
    eta=st.sampled_from([0.0, 0.1, 0.35, 0.5, 0.8, 1.0]),
    seed=st.integers(0, 10**6),
    scheme=st.sampled_from(list(Scheme)),
    direction=st.sampled_from(list(Direction)),
)
def test_run_invariants(fig1, eta, seed, scheme, direction):
    sc = fig1.with_(eta=eta, scheme=scheme, traffic__direction_mode=direction,
                    sim_duration=0.8, warmup_periods=2)
    tm = de.run(sc, seed=seed)
    assert tm.violations() == []
    assert tm.busy_us <= tm.duration_us
    assert sum(c.bits_dl for c in tm.nodes.values()) == tm.net_bits_dl
    assert sum(c.bits_ul for c in tm.nodes.values()) == tm.net_bits_ul
    if direction == Direction.DL_ONLY:
        assert tm.net_bits_ul == 0
