"""Deterministic link model: path loss, SINR, MCS selection, energy detection.

Links are time-invariant within each LTE-U state (no fading), so every
(transmitter, receiver, lte_on) triple is evaluated once and cached in a
:class:`LinkMap`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

if TYPE_CHECKING:
    from .core_model import Node, Scenario


class OutOfCoverageError(ValueError):
    """A Wi-Fi station has no usable MCS even with LTE-U silent."""


@dataclass(frozen=True, order=True)
class McsEntry:
    rate_mbps: float
    required_snr_db: float


@dataclass(frozen=True)
class McsTable:
    """Paired PHY-rate / required-SNR ladder, ascending in both columns."""

    entries: tuple[McsEntry, ...]

    def __post_init__(self):
        entries = tuple(
            e if isinstance(e, McsEntry) else McsEntry(float(e[0]), float(e[1])) for e in self.entries
        )
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "McsTable":
        return cls(tuple(pairs))

    def violations(self) -> list[str]:
        out = []
        if not self.entries:
            return ["mcs table empty"]
        for a, b in zip(self.entries, self.entries[1:]):
            if not (b.rate_mbps > a.rate_mbps and b.required_snr_db > a.required_snr_db):
                out.append("mcs table not strictly increasing")
                break
        if self.entries[0].rate_mbps <= 0:
            out.append("mcs rates must be positive")
        return out

    @property
    def base(self) -> McsEntry:
        return self.entries[0]

    def to_pairs(self) -> list[list[float]]:
        return [[e.rate_mbps, e.required_snr_db] for e in self.entries]


TABLE_I_MCS = McsTable.from_pairs(
    zip(
        (6.5, 13, 26, 39, 52, 78, 104, 117, 130),
        (2, 5, 7, 9, 13, 17, 20, 22, 23),
    )
)


def path_loss_db(distance: float, freq: float) -> float:
    """Path loss in dB for ``distance`` metres at ``freq`` GHz."""
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    if freq <= 0:
        raise ValueError(f"frequency must be positive, got {freq}")
    return 36.7 * math.log10(distance) + 22.7 + 26.0 * math.log10(freq)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def sinr_db(signal: float, interferers: Iterable[float], noise: float) -> float:
    denom = dbm_to_mw(noise) + sum(dbm_to_mw(i) for i in interferers)
    return 10.0 * math.log10(dbm_to_mw(signal) / denom)


def select_mcs(sinr: float, table: McsTable) -> Optional[McsEntry]:
    """Highest-rate entry whose threshold is met, or None below the ladder."""
    chosen = None
    for entry in table.entries:
        if entry.required_snr_db <= sinr:
            chosen = entry
        else:
            break
    return chosen


def senses_busy(lte_rx_power: float, ed_threshold: float) -> bool:
    return lte_rx_power >= ed_threshold


def airtime_us(bits: float, rate_mbps: float) -> float:
    """Air time in microseconds; Mbps is bits per microsecond."""
    return bits / rate_mbps


def control_frame_us(payload_bits: int, phy_header_bits: int, base_rate: float) -> float:
    """Control/management frame sent entirely at the base rate."""
    return airtime_us(phy_header_bits + payload_bits, base_rate)


def data_frame_us(
    mpdu_bits: int,
    aggregation: int,
    mac_header_bits: int,
    phy_header_bits: int,
    rate_mbps: float,
    base_rate: float,
) -> float:
    """Aggregated data burst: PHY header at base rate, one MAC header per MPDU."""
    return airtime_us(phy_header_bits, base_rate) + airtime_us(
        aggregation * (mpdu_bits + mac_header_bits), rate_mbps
    )


def node_distance(a: "Node", b: "Node") -> float:
    dx = a.position[0] - b.position[0]
    dy = a.position[1] - b.position[1]
    dh = a.antenna_height - b.antenna_height
    return math.sqrt(dx * dx + dy * dy + dh * dh)


@dataclass(frozen=True)
class LinkState:
    rx_power_dbm: float
    sinr_db: float
    mcs: Optional[McsEntry]
    senses_busy: bool


class LinkMap:
    """Precomputed link states for every Wi-Fi pair and LTE-U state."""

    def __init__(self, scenario: "Scenario"):
        from .core_model import NodeKind

        self.scenario = scenario
        radio = scenario.radio
        self.enb = next((n for n in scenario.nodes if n.kind == NodeKind.LTE_ENB), None)
        self.wifi = [n for n in scenario.nodes if n.kind in (NodeKind.WIFI_AP, NodeKind.WIFI_STA)]
        self._lte_rx: dict[str, float] = {}
        for n in self.wifi:
            if self.enb is None:
                self._lte_rx[n.id] = -math.inf
            else:
                self._lte_rx[n.id] = radio.tx_power_dbm - path_loss_db(
                    node_distance(self.enb, n), radio.freq_ghz
                )
        self._links: dict[tuple[str, str, bool], LinkState] = {}
        for tx in self.wifi:
            for rx in self.wifi:
                if tx.id == rx.id:
                    continue
                for lte_on in (False, True):
                    self._links[(tx.id, rx.id, lte_on)] = self._evaluate(tx, rx, lte_on)

    def _evaluate(self, tx: "Node", rx: "Node", lte_on: bool) -> LinkState:
        radio = self.scenario.radio
        signal = radio.tx_power_dbm - path_loss_db(node_distance(tx, rx), radio.freq_ghz)
        interferers = [self._lte_rx[rx.id]] if (lte_on and self.enb is not None) else []
        s = sinr_db(signal, interferers, radio.noise_dbm)
        return LinkState(
            rx_power_dbm=signal,
            sinr_db=s,
            mcs=select_mcs(s, self.scenario.mcs_table),
            senses_busy=lte_on and senses_busy(self._lte_rx[rx.id], radio.ed_threshold_dbm),
        )

    def link(self, tx: str, rx: str, lte_on: bool) -> LinkState:
        return self._links[(tx, rx, lte_on)]

    def lte_rx_power(self, node_id: str) -> float:
        return self._lte_rx[node_id]

    def senses_lte(self, node_id: str) -> bool:
        """True if the node's energy detector fires while LTE-U is ON."""
        return senses_busy(self._lte_rx[node_id], self.scenario.radio.ed_threshold_dbm)


def classify_victims(scenario: "Scenario") -> frozenset[str]:
    """Ids of Wi-Fi stations that cannot be served while LTE-U is ON.

    A station is a victim if its downlink from the AP has no MCS with the eNB
    interfering, or if it energy-detects the eNB. Raises
    :class:`OutOfCoverageError` for a station unreachable even with LTE off.
    """
    links = LinkMap(scenario)
    ap = scenario.ap
    victims = set()
    for sta in scenario.stations:
        if links.link(ap.id, sta.id, False).mcs is None:
            raise OutOfCoverageError(f"station {sta.id!r} out of coverage with LTE-U off")
        if links.enb is None:
            continue
        if links.link(ap.id, sta.id, True).mcs is None or links.senses_lte(sta.id):
            victims.add(sta.id)
    return frozenset(victims)
