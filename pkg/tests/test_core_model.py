import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lteu_pcf.core_model import (
    ContentionParams,
    Direction,
    NodeKind,
    ScenarioError,
    Scheme,
    bundled_scenario,
    bundled_scenarios,
    load_scenario,
    resolve_scenario,
    scenario_to_dict,
    serialize,
    validate,
)


def _doc(**overrides):
    doc = {
        "schema_version": 1,
        "nodes": [
            {"id": "AP", "kind": "WIFI_AP", "position": [0, 0]},
            {"id": "STA1", "kind": "WIFI_STA", "position": [5, 0]},
        ],
    }
    doc.update(overrides)
    return doc


def test_m_is_derived_from_window_sizes():
    sc = load_scenario(_doc(contention={"cw_min": 16, "cw_max": 1024}))
    assert sc.contention.m == 6


def test_m_in_input_is_ignored():
    sc = load_scenario(_doc(contention={"cw_min": 16, "cw_max": 64, "m": 9}))
    assert sc.contention.m == 2


def test_two_aps_rejected():
    doc = _doc()
    doc["nodes"].append({"id": "AP2", "kind": "WIFI_AP", "position": [1, 1]})
    with pytest.raises(ScenarioError, match="multiple APs"):
        load_scenario(doc)


def test_table_defaults_give_burst_payload(fig1):
    assert fig1.traffic.payload_bits == 32592
    assert load_scenario(_doc()).traffic.payload_bits == 32592


def test_default_parameter_values(fig1):
    t = fig1.timings
    assert (t.t_slot, t.t_difs, t.t_sifs, t.t_cts_timeout) == (9, 34, 16, 50)
    assert (t.phy_header_bits, t.mac_header_bits, t.ack_bits, t.rts_bits, t.cts_bits) == (128, 272, 240, 288, 240)
    assert t.beacon_interval == 100_000
    assert (fig1.contention.cw_min, fig1.contention.cw_max, fig1.contention.retry_limit) == (16, 1024, 7)
    assert fig1.alpha == 0.5
    assert fig1.radio.ed_threshold_dbm == -62.0
    assert fig1.seeds == tuple(range(1, 11))


def test_validate_eta_out_of_range(fig1):
    rules = [v.rule for v in validate(fig1.with_(eta=1.2))]
    assert rules == ["eta out of [0,1]"]


def test_validate_clean_defaults(fig1):
    assert validate(fig1) == []


def test_validate_cw_max_not_power_of_two(fig1):
    sc = fig1.with_(contention=ContentionParams(cw_min=16, cw_max=1000))
    assert [v.rule for v in validate(sc)] == ["cw_max not power-of-two multiple"]


def test_violation_names_type_and_field(fig1):
    (v,) = validate(fig1.with_(alpha=1.5))
    assert (v.type, v.field) == ("Scenario", "alpha")
    assert str(v).startswith("Scenario.alpha")


def test_parse_failure_and_missing_fields():
    with pytest.raises(ScenarioError, match="parse"):
        load_scenario("{not json")
    with pytest.raises(ScenarioError):
        load_scenario({"schema_version": 1})
    with pytest.raises(ScenarioError):
        load_scenario(_doc(unknown_key=3))


def test_field_path_in_errors():
    with pytest.raises(ScenarioError, match="eta"):
        load_scenario(_doc(eta=-0.1))


def test_round_trip_bundled(fig1):
    assert load_scenario(serialize(fig1)) == fig1
    assert json.loads(serialize(fig1))["schema_version"] == 1


def test_bundled_catalogue():
    assert "fig1" in bundled_scenarios()
    with pytest.raises(ScenarioError):
        bundled_scenario("does-not-exist")


def test_resolve_from_path(tmp_path, fig1):
    p = tmp_path / "s.json"
    p.write_text(serialize(fig1.with_(eta=0.3)))
    assert resolve_scenario(str(p)).eta == 0.3
    assert resolve_scenario("fig1") == fig1


def test_fig1_layout(fig1):
    assert fig1.ap.id == "AP"
    assert fig1.enb.id == "eNB"
    assert [s.id for s in fig1.stations] == ["STA1", "STA2"]
    ap, enb = fig1.ap.position, fig1.enb.position
    assert ((ap[0] - enb[0]) ** 2 + (ap[1] - enb[1]) ** 2) ** 0.5 == pytest.approx(20.0)


def test_with_nested_section(fig1):
    sc = fig1.with_(traffic__direction_mode=Direction.UL_AND_DL, eta=0.4)
    assert sc.traffic.direction_mode == Direction.UL_AND_DL
    assert sc.traffic.mpdu_bits == fig1.traffic.mpdu_bits
    assert sc.eta == 0.4


coords = st.floats(-200, 200, allow_nan=False).map(lambda v: round(v, 3))


@settings(max_examples=60, deadline=None)
@given(
    eta=st.floats(0, 1),
    alpha=st.floats(0.01, 0.99),
    scheme=st.sampled_from(list(Scheme)),
    direction=st.sampled_from(list(Direction)),
    k=st.integers(0, 4),
    sta=st.tuples(coords, coords),
    seeds=st.lists(st.integers(0, 10**6), min_size=1, max_size=5),
)
def test_round_trip_property(fig1, eta, alpha, scheme, direction, k, sta, seeds):
    sc = fig1.with_(
        eta=eta, alpha=alpha, scheme=scheme, seeds=tuple(seeds),
        contention=ContentionParams(cw_min=8, cw_max=8 * 2 ** k, retry_limit=3),
        traffic__direction_mode=direction,
    )
    nodes = list(sc.nodes)
    nodes[2] = type(nodes[2])("STA1", NodeKind.WIFI_STA, sta, 1.5)
    sc = sc.with_(nodes=tuple(nodes))
    back = load_scenario(serialize(sc))
    assert back == sc
    assert back.contention.m == k
    assert scenario_to_dict(back)["contention"]["m"] == k
