"""Per-run counters and the measures derived from them.

Per-node ``bits_dl`` / ``bits_ul`` are user-side: bits a station received
from, or delivered to, the AP. The AP row carries zeros there; its DL volume
is the network DL total.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class Dir(str, Enum):
    DL = "dl"
    UL = "ul"
    BOTH = "both"


@dataclass
class NodeCounters:
    bits_dl: int = 0
    bits_ul: int = 0
    successful_exchanges: int = 0
    attempted_exchanges: int = 0

    def __add__(self, other: "NodeCounters") -> "NodeCounters":
        return NodeCounters(
            self.bits_dl + other.bits_dl,
            self.bits_ul + other.bits_ul,
            self.successful_exchanges + other.successful_exchanges,
            self.attempted_exchanges + other.attempted_exchanges,
        )


@dataclass
class TraceMetrics:
    window: tuple[int, int]
    nodes: dict[str, NodeCounters]
    ap_id: str = "AP"
    victims: frozenset = frozenset()
    senses_lte: dict[str, bool] = field(default_factory=dict)
    dl_access_opportunities: int = 0
    total_network_access_opportunities: int = 0
    dl_tx_attempts: int = 0
    dl_tx_successes: int = 0
    net_bits_dl: int = 0
    net_bits_ul: int = 0
    busy_us: int = 0
    cfp_polls: int = 0

    @property
    def duration_us(self) -> int:
        return self.window[1] - self.window[0]

    @property
    def stations(self) -> list[str]:
        return [n for n in self.nodes if n != self.ap_id]

    def violations(self) -> list[str]:
        out = []
        if self.window[0] >= self.window[1]:
            out.append("window start not before end")
        for nid, c in self.nodes.items():
            if c.successful_exchanges > c.attempted_exchanges:
                out.append(f"{nid}: successes exceed attempts")
            if c.bits_dl < 0 or c.bits_ul < 0:
                out.append(f"{nid}: negative bit counter")
        if self.dl_tx_successes > self.dl_tx_attempts:
            out.append("AP: dl successes exceed attempts")
        if self.dl_access_opportunities > self.total_network_access_opportunities:
            out.append("AP: dl opportunities exceed network total")
        if self.busy_us > self.duration_us:
            out.append("busy time exceeds window")
        return out

    def merge(self, other: "TraceMetrics") -> "TraceMetrics":
        """Combine two adjacent windows of the same run into one."""
        if self.window[1] != other.window[0]:
            raise ValueError("windows are not contiguous")
        nodes = {k: self.nodes.get(k, NodeCounters()) + other.nodes.get(k, NodeCounters())
                 for k in {**self.nodes, **other.nodes}}
        return TraceMetrics(
            window=(self.window[0], other.window[1]),
            nodes=dict(sorted(nodes.items())),
            ap_id=self.ap_id,
            victims=self.victims,
            senses_lte=self.senses_lte,
            dl_access_opportunities=self.dl_access_opportunities + other.dl_access_opportunities,
            total_network_access_opportunities=self.total_network_access_opportunities
            + other.total_network_access_opportunities,
            dl_tx_attempts=self.dl_tx_attempts + other.dl_tx_attempts,
            dl_tx_successes=self.dl_tx_successes + other.dl_tx_successes,
            net_bits_dl=self.net_bits_dl + other.net_bits_dl,
            net_bits_ul=self.net_bits_ul + other.net_bits_ul,
            busy_us=self.busy_us + other.busy_us,
            cfp_polls=self.cfp_polls + other.cfp_polls,
        )

    def fingerprint(self) -> str:
        """Canonical text form; equal fingerprints mean bit-identical metrics."""
        parts = [f"window={self.window}"]
        for nid, c in sorted(self.nodes.items()):
            parts.append(
                f"{nid}:{c.bits_dl},{c.bits_ul},{c.successful_exchanges},{c.attempted_exchanges}"
            )
        parts.append(
            f"ap:{self.dl_access_opportunities},{self.total_network_access_opportunities},"
            f"{self.dl_tx_attempts},{self.dl_tx_successes},{self.net_bits_dl},{self.net_bits_ul},"
            f"{self.busy_us},{self.cfp_polls}"
        )
        return "|".join(parts)


def throughput(tm: TraceMetrics, node: str, direction: Dir | str = Dir.BOTH) -> float:
    """Payload throughput in Mbps of one node over the metrics window."""
    direction = Dir(direction)
    if tm.duration_us <= 0:
        raise ValueError("empty metrics window")
    c = tm.nodes[node]
    bits = {Dir.DL: c.bits_dl, Dir.UL: c.bits_ul, Dir.BOTH: c.bits_dl + c.bits_ul}[direction]
    return bits / tm.duration_us


def network_throughput(tm: TraceMetrics, direction: Dir | str = Dir.BOTH) -> float:
    direction = Dir(direction)
    bits = {Dir.DL: tm.net_bits_dl, Dir.UL: tm.net_bits_ul, Dir.BOTH: tm.net_bits_dl + tm.net_bits_ul}
    return bits[direction] / tm.duration_us


def class_throughput(tm: TraceMetrics, victim: bool, direction: Dir | str = Dir.BOTH) -> float:
    """Mean per-user throughput of the victim (or non-victim) class."""
    members = [n for n in tm.stations if (n in tm.victims) == victim]
    if not members:
        return 0.0
    return sum(throughput(tm, n, direction) for n in members) / len(members)


def successful_access_pct(tm: TraceMetrics, node: str) -> float:
    total = sum(c.successful_exchanges for c in tm.nodes.values())
    if total == 0:
        return 0.0
    return 100.0 * tm.nodes[node].successful_exchanges / total


def dl_opportunity_pct(tm: TraceMetrics) -> float:
    """AP share of contention wins across the Wi-Fi network."""
    if tm.total_network_access_opportunities == 0:
        return 0.0
    return 100.0 * tm.dl_access_opportunities / tm.total_network_access_opportunities


def successful_dl_pct(tm: TraceMetrics) -> float:
    if tm.dl_tx_attempts == 0:
        return 0.0
    return 100.0 * tm.dl_tx_successes / tm.dl_tx_attempts


def jain_index(values: Sequence[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("jain index of an empty list")
    s = sum(values)
    sq = sum(v * v for v in values)
    if sq == 0:
        return 1.0
    return s * s / (len(values) * sq)


def mean_std(samples: Iterable[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single sample)."""
    xs = list(samples)
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)
