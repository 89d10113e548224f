"""Scenario, timing and parameter types plus the scenario file loader.

A scenario document is JSON with a ``schema_version`` field. Every section
except ``nodes`` is optional; omitted values fall back to the Table I
defaults carried by the dataclasses below.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .phy_channel import TABLE_I_MCS, McsTable

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised when a scenario document cannot be turned into a valid Scenario."""


class NodeKind(str, Enum):
    WIFI_AP = "WIFI_AP"
    WIFI_STA = "WIFI_STA"
    LTE_ENB = "LTE_ENB"
    LTE_UE = "LTE_UE"


class Direction(str, Enum):
    DL_ONLY = "DL_ONLY"
    UL_AND_DL = "UL_AND_DL"


class Buffer(str, Enum):
    FULL = "FULL"


class Scheme(str, Enum):
    STANDARD = "STANDARD"
    PROPOSED = "PROPOSED"


@dataclass(frozen=True)
class MacTimings:
    # all durations in integer microseconds, sizes in bits
    t_slot: int = 9
    t_difs: int = 34
    t_sifs: int = 16
    t_cts_timeout: int = 50
    phy_header_bits: int = 128
    mac_header_bits: int = 272
    ack_bits: int = 240
    rts_bits: int = 288
    cts_bits: int = 240
    beacon_interval: int = 100_000
    beacon_bits: int = 400
    cf_end_bits: int = 160


@dataclass(frozen=True)
class ContentionParams:
    cw_min: int = 16
    cw_max: int = 1024
    retry_limit: int = 7

    @property
    def m(self) -> int:
        """Number of window doublings; always derived from cw_min and cw_max."""
        if self.cw_min <= 0 or self.cw_max < self.cw_min:
            return 0
        return int(round(math.log2(self.cw_max / self.cw_min)))


@dataclass(frozen=True)
class TrafficModel:
    mpdu_bits: int = 8148
    aggregation: int = 4
    direction_mode: Direction = Direction.DL_ONLY
    buffer: Buffer = Buffer.FULL

    @property
    def payload_bits(self) -> int:
        """Average burst payload E[P]."""
        return self.mpdu_bits * self.aggregation


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float = 20.0
    freq_ghz: float = 5.3
    noise_dbm: float = -101.0
    bandwidth_mhz: float = 20.0
    ed_threshold_dbm: float = -62.0


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    position: tuple[float, float]
    antenna_height: float = 1.0


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[Node, ...]
    timings: MacTimings = field(default_factory=MacTimings)
    contention: ContentionParams = field(default_factory=ContentionParams)
    traffic: TrafficModel = field(default_factory=TrafficModel)
    radio: RadioParams = field(default_factory=RadioParams)
    mcs_table: McsTable = TABLE_I_MCS
    eta: float = 0.0
    scheme: Scheme = Scheme.STANDARD
    alpha: float = 0.5
    sim_duration: float = 10.0
    seeds: tuple[int, ...] = tuple(range(1, 11))
    warmup_periods: int = 5
    name: str = ""

    @property
    def ap(self) -> Node:
        return next(n for n in self.nodes if n.kind == NodeKind.WIFI_AP)

    @property
    def enb(self) -> Optional[Node]:
        return next((n for n in self.nodes if n.kind == NodeKind.LTE_ENB), None)

    @property
    def stations(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == NodeKind.WIFI_STA]

    @property
    def sim_duration_us(self) -> int:
        return int(round(self.sim_duration * 1e6))

    def with_(self, **changes) -> "Scenario":
        """Copy with top-level fields or ``section__field`` keys replaced."""
        top = {}
        nested: dict[str, dict[str, Any]] = {}
        for key, value in changes.items():
            if "__" in key:
                section, name = key.split("__", 1)
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, values in nested.items():
            top[section] = replace(getattr(self, section), **values)
        return replace(self, **top)


@dataclass(frozen=True)
class Violation:
    type: str
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.type}.{self.field}: {self.rule}"


def validate(scenario: Scenario) -> list[Violation]:
    """Every broken invariant as data; an empty list means the scenario is valid."""
    out: list[Violation] = []

    def bad(type_name, field_name, rule):
        out.append(Violation(type_name, field_name, rule))

    t = scenario.timings
    for f in fields(MacTimings):
        if getattr(t, f.name) <= 0:
            bad("MacTimings", f.name, f"{f.name} must be positive")
    if t.t_difs <= t.t_sifs:
        bad("MacTimings", "t_difs", "t_difs must exceed t_sifs")
    if t.beacon_interval < 1000:
        bad("MacTimings", "beacon_interval", "beacon_interval below 1000 us")

    c = scenario.contention
    if c.cw_min < 2:
        bad("ContentionParams", "cw_min", "cw_min below 2")
    elif c.cw_max < c.cw_min or c.cw_max != c.cw_min * 2 ** c.m:
        bad("ContentionParams", "cw_max", "cw_max not power-of-two multiple")
    if c.retry_limit < 1:
        bad("ContentionParams", "retry_limit", "retry_limit below 1")

    tr = scenario.traffic
    if tr.mpdu_bits <= 0:
        bad("TrafficModel", "mpdu_bits", "mpdu_bits must be positive")
    if tr.aggregation < 1:
        bad("TrafficModel", "aggregation", "aggregation below 1")

    r = scenario.radio
    if r.noise_dbm >= r.tx_power_dbm:
        bad("RadioParams", "noise_dbm", "noise not below tx power")
    if r.freq_ghz <= 0:
        bad("RadioParams", "freq_ghz", "freq_ghz must be positive")

    for rule in scenario.mcs_table.violations():
        bad("McsTable", "entries", rule)

    ids = [n.id for n in scenario.nodes]
    if len(set(ids)) != len(ids):
        bad("Node", "id", "duplicate node ids")
    n_ap = sum(n.kind == NodeKind.WIFI_AP for n in scenario.nodes)
    if n_ap > 1:
        bad("Scenario", "nodes", "multiple APs")
    elif n_ap == 0:
        bad("Scenario", "nodes", "no AP")
    if sum(n.kind == NodeKind.LTE_ENB for n in scenario.nodes) > 1:
        bad("Scenario", "nodes", "multiple eNBs")
    for n in scenario.nodes:
        if n.antenna_height <= 0:
            bad("Node", "antenna_height", f"node {n.id}: antenna_height must be positive")

    if not 0.0 <= scenario.eta <= 1.0:
        bad("Scenario", "eta", "eta out of [0,1]")
    if not 0.0 < scenario.alpha < 1.0:
        bad("Scenario", "alpha", "alpha out of (0,1)")
    if scenario.sim_duration <= 0:
        bad("Scenario", "sim_duration", "sim_duration must be positive")
    if scenario.warmup_periods < 0:
        bad("Scenario", "warmup_periods", "warmup_periods negative")
    return out


# -- (de)serialization --------------------------------------------------------

_SECTIONS = {
    "timings": MacTimings,
    "contention": ContentionParams,
    "traffic": TrafficModel,
    "radio": RadioParams,
}
_ENUM_FIELDS = {("traffic", "direction_mode"): Direction, ("traffic", "buffer"): Buffer}


def _section(name: str, cls, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"{name}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known) - ({"m"} if cls is ContentionParams else set())
    if unknown:
        raise ScenarioError(f"{name}.{sorted(unknown)[0]}: unknown field")
    kwargs = {}
    for key, value in raw.items():
        if key == "m":
            # derived quantity; never trusted from input
            continue
        enum = _ENUM_FIELDS.get((name, key))
        try:
            if enum is not None:
                kwargs[key] = enum(value)
            elif known[key].type in ("int",):
                if isinstance(value, bool) or not float(value).is_integer():
                    raise ValueError(value)
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except (TypeError, ValueError):
            raise ScenarioError(f"{name}.{key}: invalid value {value!r}") from None
    return cls(**kwargs)


def _node(i: int, raw: Any) -> Node:
    path = f"nodes[{i}]"
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"{path}: expected an object")
    for key in ("id", "kind", "position"):
        if key not in raw:
            raise ScenarioError(f"{path}.{key}: missing mandatory field")
    try:
        kind = NodeKind(raw["kind"])
    except ValueError:
        raise ScenarioError(f"{path}.kind: unknown node kind {raw['kind']!r}") from None
    pos = raw["position"]
    if not (isinstance(pos, (list, tuple)) and len(pos) == 2):
        raise ScenarioError(f"{path}.position: expected [x, y]")
    default_h = 10.0 if kind in (NodeKind.WIFI_AP, NodeKind.LTE_ENB) else 1.0
    try:
        return Node(
            id=str(raw["id"]),
            kind=kind,
            position=(float(pos[0]), float(pos[1])),
            antenna_height=float(raw.get("antenna_height", default_h)),
        )
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: invalid numeric value") from None


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("document: expected an object at top level")
    if "schema_version" not in doc:
        raise ScenarioError("schema_version: missing mandatory field")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported version {doc['schema_version']!r}")
    if "nodes" not in doc:
        raise ScenarioError("nodes: missing mandatory field")
    allowed = {
        "schema_version", "name", "nodes", "mcs_table", "eta", "scheme", "alpha",
        "sim_duration", "seeds", "warmup_periods", *_SECTIONS,
    }
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"{sorted(unknown)[0]}: unknown field")
    if not isinstance(doc["nodes"], list):
        raise ScenarioError("nodes: expected a list")
    kwargs: dict[str, Any] = {"nodes": tuple(_node(i, n) for i, n in enumerate(doc["nodes"]))}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _section(name, cls, doc.get(name))
    if "mcs_table" in doc:
        try:
            kwargs["mcs_table"] = McsTable.from_pairs(doc["mcs_table"])
        except (TypeError, ValueError, IndexError):
            raise ScenarioError("mcs_table: expected a list of [rate_mbps, required_snr_db]") from None
    try:
        for key in ("eta", "alpha", "sim_duration"):
            if key in doc:
                kwargs[key] = float(doc[key])
        if "scheme" in doc:
            kwargs["scheme"] = Scheme(doc["scheme"])
        if "seeds" in doc:
            kwargs["seeds"] = tuple(int(s) for s in doc["seeds"])
        if "warmup_periods" in doc:
            kwargs["warmup_periods"] = int(doc["warmup_periods"])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"scenario: invalid value ({exc})") from None
    kwargs["name"] = str(doc.get("name", ""))
    return Scenario(**kwargs)


def load_scenario(document: Union[str, Mapping[str, Any]]) -> Scenario:
    """Parse a JSON scenario document (text or already-decoded mapping).

    Missing optional sections take Table I defaults. Raises ScenarioError on
    malformed JSON, missing mandatory fields, or any invariant violation.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"parse failure: {exc}") from None
    scenario = scenario_from_dict(document)
    problems = validate(scenario)
    if problems:
        raise ScenarioError("; ".join(str(p) for p in problems))
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "name": scenario.name}
    doc["nodes"] = [
        {
            "id": n.id,
            "kind": n.kind.value,
            "position": list(n.position),
            "antenna_height": n.antenna_height,
        }
        for n in scenario.nodes
    ]
    for name in _SECTIONS:
        section = asdict(getattr(scenario, name))
        doc[name] = {k: (v.value if isinstance(v, Enum) else v) for k, v in section.items()}
    doc["contention"]["m"] = scenario.contention.m
    doc["mcs_table"] = scenario.mcs_table.to_pairs()
    doc["eta"] = scenario.eta
    doc["scheme"] = scenario.scheme.value
    doc["alpha"] = scenario.alpha
    doc["sim_duration"] = scenario.sim_duration
    doc["seeds"] = list(scenario.seeds)
    doc["warmup_periods"] = scenario.warmup_periods
    return doc


def serialize(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    return load_scenario(text)


def bundled_scenarios() -> list[str]:
    root = resources.files("lteu_pcf") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario(name: str = "fig1") -> Scenario:
    root = resources.files("lteu_pcf") / "scenarios"
    res = root / f"{name}.json"
    if not res.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return load_scenario(res.read_text())


def resolve_scenario(name_or_path: str) -> Scenario:
    """A bundled scenario name, or a path to a scenario file."""
    if Path(name_or_path).is_file():
        return load_scenario_file(name_or_path)
    return bundled_scenario(name_or_path)
