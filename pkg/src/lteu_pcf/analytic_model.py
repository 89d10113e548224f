"""Closed-form DL-only throughput of standard Wi-Fi and the PCF-based scheme.

All functions are plain arithmetic on their inputs, so passing
:class:`fractions.Fraction` values gives exact results (used by the property
tests). Times are microseconds, sizes bits, throughputs Mbps (bits/us).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from .core_model import MacTimings, Scenario
from .phy_channel import LinkMap, classify_victims, control_frame_us, data_frame_us

BASE_RATE_MBPS = Fraction(13, 2)


@dataclass(frozen=True)
class ControlTimes:
    rts: float
    cts: float
    ack: float

    @classmethod
    def from_timings(cls, timings: MacTimings, base_rate=BASE_RATE_MBPS) -> "ControlTimes":
        h = timings.phy_header_bits
        return cls(
            rts=control_frame_us(timings.rts_bits, h, base_rate),
            cts=control_frame_us(timings.cts_bits, h, base_rate),
            ack=control_frame_us(timings.ack_bits, h, base_rate),
        )


def t_busy(timings: MacTimings, t_data, base_rate=BASE_RATE_MBPS):
    c = ControlTimes.from_timings(timings, base_rate)
    return c.rts + 3 * timings.t_sifs + c.cts + t_data + c.ack


def t_succ(timings: MacTimings, W: int, t_data, base_rate=BASE_RATE_MBPS):
    """Mean time for one RTS/CTS/DATA/ACK exchange including DIFS and backoff."""
    return timings.t_difs + Fraction(W - 1, 2) * timings.t_slot + t_busy(timings, t_data, base_rate)


def backoff_bracket_slots(W: int, m: int, r_limit: int):
    """Total mean backoff, in slots, over ``r_limit`` failed attempts.

    Uses the closed form when the window saturates (r_limit >= m) and the
    explicit per-attempt sum otherwise; both agree wherever both apply.
    """
    if r_limit >= m:
        return Fraction(2 ** m * W * (r_limit - m + 1) - r_limit - W, 2)
    return sum(Fraction(min(2 ** (k - 1), 2 ** m) * W - 1, 2) for k in range(1, r_limit + 1))


def t_unsucc(timings: MacTimings, W: int, m: int, r_limit: int, base_rate=BASE_RATE_MBPS):
    """Time the AP burns on a frame to an unreachable station before dropping it."""
    c = ControlTimes.from_timings(timings, base_rate)
    return backoff_bracket_slots(W, m, r_limit) * timings.t_slot + r_limit * (
        timings.t_difs + c.rts + timings.t_cts_timeout
    )


def t_cfp_exchange(timings: MacTimings, t_data, base_rate=BASE_RATE_MBPS):
    """One polled downlink delivery: SIFS, DATA, SIFS, ACK."""
    c = ControlTimes.from_timings(timings, base_rate)
    return 2 * timings.t_sifs + t_data + c.ack


@dataclass(frozen=True)
class AnalyticInputs:
    n_total: int
    n_victim: int
    W: int
    m: int
    r_limit: int
    timings: MacTimings
    e_p_bits: float
    t_data_on: float
    t_data_off: float
    eta: float = 0
    x: float = 0
    base_rate: float = BASE_RATE_MBPS
    # data time of a polled delivery; None means the victims share t_data_off
    t_data_cfp: Optional[float] = None

    def violations(self) -> list[str]:
        out = []
        if self.n_total < 1:
            out.append("n_total below 1")
        if not 0 <= self.n_victim <= self.n_total:
            out.append("n_victim out of [0, n_total]")
        if not 0 <= self.eta <= 1:
            out.append("eta out of [0,1]")
        if not 0 <= self.x <= 1 - self.eta:
            out.append("x out of [0, 1-eta]")
        if self.t_data_off > self.t_data_on:
            out.append("t_data_off exceeds t_data_on")
        if self.W < 2:
            out.append("W below 2")
        if self.t_data_cfp is not None and self.t_data_cfp < 0:
            out.append("t_data_cfp negative")
        return out

    def with_(self, **changes) -> "AnalyticInputs":
        return replace(self, **changes)

    # phase building blocks
    @property
    def t_succ_on(self):
        return t_succ(self.timings, self.W, self.t_data_on, self.base_rate)

    @property
    def t_succ_off(self):
        return t_succ(self.timings, self.W, self.t_data_off, self.base_rate)

    @property
    def t_unsucc(self):
        return t_unsucc(self.timings, self.W, self.m, self.r_limit, self.base_rate)

    @property
    def t_cfp(self):
        t_data = self.t_data_off if self.t_data_cfp is None else self.t_data_cfp
        return t_cfp_exchange(self.timings, t_data, self.base_rate)


@dataclass(frozen=True)
class ThroughputReport:
    gamma_v: float
    gamma_nv: float
    gamma_total: float
    breakdown: dict = field(default_factory=dict)


def _checked(inp: AnalyticInputs, ignore_x: bool = False) -> None:
    problems = [p for p in inp.violations() if not (ignore_x and p.startswith("x "))]
    if problems:
        raise ValueError("; ".join(problems))


def standard_throughputs(inp: AnalyticInputs) -> ThroughputReport:
    _checked(inp, ignore_x=True)
    n_t, n_v, eta = inp.n_total, inp.n_victim, inp.eta
    n_nv = n_t - n_v
    p = Fraction(n_v, n_t)
    e_p = inp.e_p_bits
    gamma_off = e_p / inp.t_succ_off
    if n_nv > 0:
        gamma_on = (1 - p) * e_p / (p * inp.t_unsucc + (1 - p) * inp.t_succ_on)
        gamma_on_nv = gamma_on / n_nv
    else:
        gamma_on = gamma_on_nv = 0
    gamma_v = (1 - eta) * gamma_off / n_t
    gamma_nv = eta * gamma_on_nv + (1 - eta) * gamma_off / n_t
    total = eta * gamma_on + (1 - eta) * gamma_off
    return ThroughputReport(
        gamma_v=gamma_v if n_v else 0,
        gamma_nv=gamma_nv if n_nv else 0,
        gamma_total=total,
        breakdown={"on": eta * gamma_on, "cp": (1 - eta) * gamma_off, "cfp": 0},
    )


def proposed_throughputs(inp: AnalyticInputs) -> ThroughputReport:
    """Throughputs with victim deferral during ON and a CFP of fraction ``x``."""
    if not 0 <= inp.x <= 1 - inp.eta:
        raise ValueError(f"x={inp.x} outside [0, 1-eta]")
    _checked(inp)
    n_t, n_v, eta = inp.n_total, inp.n_victim, inp.eta
    n_nv = n_t - n_v
    x = inp.x if n_v > 0 else 0
    e_p = inp.e_p_bits
    gamma_off = e_p / inp.t_succ_off
    on_total = e_p / inp.t_succ_on if n_nv > 0 else 0
    cfp_total = e_p / inp.t_cfp if n_v > 0 else 0
    gamma_v = (1 - eta - x) * gamma_off / n_t + (x * cfp_total / n_v if n_v else 0)
    gamma_nv = (eta * on_total / n_nv if n_nv else 0) + (1 - eta - x) * gamma_off / n_t
    return ThroughputReport(
        gamma_v=gamma_v if n_v else 0,
        gamma_nv=gamma_nv if n_nv else 0,
        gamma_total=eta * on_total + (1 - eta - x) * gamma_off + x * cfp_total,
        breakdown={"on": eta * on_total, "cp": (1 - eta - x) * gamma_off, "cfp": x * cfp_total},
    )


def _require_both_classes(inp: AnalyticInputs) -> None:
    if inp.n_victim < 1:
        raise ValueError("fairness undefined: no victim users")
    if inp.n_victim >= inp.n_total:
        raise ValueError("fairness undefined: no non-victim users")


def fair_x_unclamped(inp: AnalyticInputs):
    """Root of gamma_v(x) == gamma_nv(x); both sides are affine in x."""
    _require_both_classes(inp)
    # gamma_v = A + B x, gamma_nv = C - D x; the CP terms cancel in C - A
    # and B + D reduces to the per-victim CFP rate.
    on_nv = inp.e_p_bits / ((inp.n_total - inp.n_victim) * inp.t_succ_on)
    cfp_v = inp.e_p_bits / (inp.n_victim * inp.t_cfp)
    return inp.eta * on_nv / cfp_v


def solve_fair_x(inp: AnalyticInputs) -> Optional[float]:
    """Smallest CFP fraction equalising the classes, or None if 1-eta is not enough."""
    x = fair_x_unclamped(inp)
    if x > 1 - inp.eta:
        return None
    return x


def eta_threshold(inp: AnalyticInputs, tol: float = 1e-4) -> float:
    """Largest eta for which :func:`solve_fair_x` is feasible, by bisection."""
    _require_both_classes(inp)

    def feasible(eta: float) -> bool:
        return solve_fair_x(inp.with_(eta=eta, x=0)) is not None

    lo, hi = 0.0, 1.0
    if feasible(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class GainRow:
    eta: float
    x: float
    gamma_s: float
    gamma_ps: float
    gamma_v_s: float
    gamma_v_ps: float
    gamma_nv_s: float
    gamma_nv_ps: float

    @property
    def gain_pct(self):
        if self.gamma_s == 0:
            return 0 if self.gamma_ps == 0 else float("inf")
        return 100 * (self.gamma_ps - self.gamma_s) / self.gamma_s


def clamped_fair_x(inp: AnalyticInputs):
    if inp.n_victim == 0 or inp.n_victim == inp.n_total:
        return 0
    x = fair_x_unclamped(inp)
    return min(max(x, 0), 1 - inp.eta)


def gain_report(inp: AnalyticInputs, etas: Sequence[float]) -> list[GainRow]:
    rows = []
    for eta in etas:
        at = inp.with_(eta=eta, x=0)
        x = clamped_fair_x(at)
        s = standard_throughputs(at)
        ps = proposed_throughputs(at.with_(x=x))
        rows.append(
            GainRow(eta, x, s.gamma_total, ps.gamma_total, s.gamma_v, ps.gamma_v, s.gamma_nv, ps.gamma_nv)
        )
    return rows


def inputs_from_scenario(scenario: Scenario, eta=None, x=0) -> AnalyticInputs:
    """Derive model inputs from scenario geometry, MCS table and Table I sizes."""
    links = LinkMap(scenario)
    victims = classify_victims(scenario)
    ap = scenario.ap
    t, tr = scenario.timings, scenario.traffic
    base = scenario.mcs_table.base.rate_mbps

    def t_data(rate):
        return data_frame_us(tr.mpdu_bits, tr.aggregation, t.mac_header_bits, t.phy_header_bits, rate, base)

    stas = scenario.stations
    off = [t_data(links.link(ap.id, s.id, False).mcs.rate_mbps) for s in stas]
    on = [t_data(links.link(ap.id, s.id, True).mcs.rate_mbps) for s in stas if s.id not in victims]
    polled = [t_data(links.link(ap.id, v, False).mcs.rate_mbps) for v in sorted(victims)]
    t_off = sum(off) / len(off)
    t_on = sum(on) / len(on) if on else t_off
    return AnalyticInputs(
        n_total=len(stas),
        n_victim=len(victims),
        W=scenario.contention.cw_min,
        m=scenario.contention.m,
        r_limit=scenario.contention.retry_limit,
        timings=t,
        e_p_bits=tr.payload_bits,
        t_data_on=t_on,
        t_data_off=t_off,
        eta=scenario.eta if eta is None else eta,
        x=x,
        base_rate=base,
        t_data_cfp=sum(polled) / len(polled) if polled else None,
    )
