"""Discrete-event simulation of one Wi-Fi BSS sharing a channel with LTE-U.

Model summary:

* integer-microsecond clock; frame air times are rounded up to whole us;
* a single Wi-Fi collision domain with idealized slotted backoff: counters
  freeze while the medium is busy and resume DIFS after it goes idle;
* LTE-U is constant-power interference while ON; a node whose energy
  detector fires (rx >= ED threshold) also freezes for the whole ON time;
* every exchange is RTS/CTS/DATA/ACK and each frame is decoded against the
  LTE-U state at its own end time; losses and collisions cost RTS plus the
  CTS timeout;
* under the PCF scheme the AP beacons at every period start, polls victims
  in a contention-free period, and during LTE-ON skips frames for victims.
"""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Callable, Mapping, Optional, Sequence

from .core_model import ContentionParams, Direction, NodeKind, Scenario, Scheme, validate
from .metrics import NodeCounters, TraceMetrics
from .pcf_coordinator import (
    AdaptiveCfpPlanner,
    SuperframePlan,
    TxDecision,
    ap_tx_filter,
    plan_superframe,
    sync_controller,
)
from .phy_channel import LinkMap, McsEntry, classify_victims, control_frame_us, data_frame_us

RNG_NAME = "mt19937-str-seed/v1"


class SimulationError(RuntimeError):
    pass


class EventKind(IntEnum):
    # value doubles as tie-break priority at equal timestamps
    LTE_OFF_START = 0
    LTE_ON_START = 1
    TX_END = 2
    TIMEOUT = 3
    BEACON_DUE = 4
    CFP_POLL_DUE = 5
    CFP_END = 6
    BACKOFF_EXPIRE = 7


class Outcome(str, Enum):
    SUCCESS = "SUCCESS"
    COLLISION = "COLLISION"
    SINR_FAIL = "SINR_FAIL"


@dataclass(frozen=True)
class Frame:
    src: str
    dst: str
    retries: int = 0


@dataclass(frozen=True)
class DcfState:
    cw: int
    backoff_remaining: int = 0
    retry_count: int = 0
    pending_frame: Optional[Frame] = None
    frozen: bool = False


def make_rng(seed: int, node_id: str) -> random.Random:
    """Per-node generator; string seeding is stable across Python versions."""
    return random.Random(f"{RNG_NAME}:{seed}:{node_id}")


def backoff_draw(rng: random.Random, cw: int) -> int:
    if cw < 1:
        raise ValueError("cw must be at least 1")
    return rng.randrange(cw)


def retry_update(state: DcfState, outcome: Outcome | bool, params: ContentionParams) -> DcfState:
    """Binary exponential backoff bookkeeping after one exchange.

    On success or drop the pending frame is cleared so the caller fetches a
    fresh head-of-line frame.
    """
    ok = outcome is True or outcome == Outcome.SUCCESS
    if ok:
        return replace(state, cw=params.cw_min, retry_count=0, pending_frame=None)
    retries = state.retry_count + 1
    if retries >= params.retry_limit:
        return replace(state, cw=params.cw_min, retry_count=0, pending_frame=None)
    frame = state.pending_frame
    if frame is not None:
        frame = replace(frame, retries=retries)
    return replace(state, cw=min(2 * state.cw, params.cw_max), retry_count=retries, pending_frame=frame)


def resolve_medium(
    transmitters: Sequence[str],
    receivers: Mapping[str, str],
    lte_on: bool,
    links: LinkMap,
    rate: Optional[McsEntry] = None,
) -> dict[str, Outcome]:
    """Outcome of frames that start in the same slot.

    Two or more Wi-Fi transmitters collide. A lone frame succeeds iff the
    receiver's SINR meets ``rate``'s threshold (base MCS by default).
    """
    if not transmitters:
        raise ValueError("no transmitters")
    if len(transmitters) > 1:
        return {t: Outcome.COLLISION for t in transmitters}
    tx = transmitters[0]
    need = rate if rate is not None else links.scenario.mcs_table.base
    ok = links.link(tx, receivers[tx], lte_on).sinr_db >= need.required_snr_db
    return {tx: Outcome.SUCCESS if ok else Outcome.SINR_FAIL}


class _Contender:
    __slots__ = ("id", "is_ap", "senses", "rng", "state", "resume_at", "hold", "rank")

    def __init__(self, node_id, is_ap, senses, rng, cw, rank):
        self.id = node_id
        self.is_ap = is_ap
        self.senses = senses
        self.rng = rng
        self.state = DcfState(cw=cw)
        self.resume_at: Optional[int] = None
        self.hold = False
        self.rank = rank


class _Simulation:
    def __init__(self, scenario: Scenario, planner, seed: int, trace: Optional[list]):
        problems = validate(scenario)
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(map(str, problems)))
        if not scenario.stations:
            raise ValueError("scenario has no Wi-Fi stations")
        self.sc = scenario
        self.seed = seed
        self.trace = trace
        self.links = LinkMap(scenario)
        self.victims = classify_victims(scenario)
        self.stations = [n.id for n in scenario.stations]
        self.non_victims = [s for s in self.stations if s not in self.victims]
        self.ap = scenario.ap.id
        self.scheme = scenario.scheme
        self.ul = scenario.traffic.direction_mode == Direction.UL_AND_DL
        self.payload = scenario.traffic.payload_bits

        t = scenario.timings
        self.slot, self.difs, self.sifs = t.t_slot, t.t_difs, t.t_sifs
        self.pifs = t.t_sifs + t.t_slot
        self.cts_timeout = t.t_cts_timeout
        self.base = scenario.mcs_table.base
        br = self.base.rate_mbps
        h = t.phy_header_bits
        self.rts_us = math.ceil(control_frame_us(t.rts_bits, h, br))
        self.cts_us = math.ceil(control_frame_us(t.cts_bits, h, br))
        self.ack_us = math.ceil(control_frame_us(t.ack_bits, h, br))
        self.beacon_us = math.ceil(control_frame_us(t.beacon_bits, h, br))
        self.cf_end_us = math.ceil(control_frame_us(t.cf_end_bits, h, br))
        self._data_cache: dict[float, int] = {}

        self.BI = t.beacon_interval
        self.schedule = sync_controller(self.BI, scenario.eta)
        self.end = scenario.sim_duration_us
        ws = scenario.warmup_periods * self.BI
        self.window = (ws if ws < self.end else 0, self.end)

        self.poll_us = {v: self._poll_duration(v) for v in self.victims}
        self.planner = planner
        if self.scheme == Scheme.PROPOSED:
            if self.planner is None:
                self.planner = AdaptiveCfpPlanner(alpha=scenario.alpha)
            floor = min(self.poll_us.values()) + self.cf_end_us if self.poll_us else 0
            self.planner.start(self.schedule, self.beacon_us, floor)

        rank = {self.ap: 0}
        for i, s in enumerate(self.stations):
            rank[s] = i + 1
        self.rank = rank
        cp = scenario.contention
        self.cp = cp
        self.contenders: list[_Contender] = [
            _Contender(self.ap, True, self.links.senses_lte(self.ap), make_rng(seed, self.ap), cp.cw_min, 0)
        ]
        if self.ul:
            for s in self.stations:
                self.contenders.append(
                    _Contender(s, False, self.links.senses_lte(s), make_rng(seed, s), cp.cw_min, rank[s])
                )
        self.dest_rng = make_rng(seed, self.ap + "/dest")

        self.counters = {nid: NodeCounters() for nid in [self.ap, *self.stations]}
        self.tm = TraceMetrics(
            window=self.window,
            nodes=self.counters,
            ap_id=self.ap,
            victims=self.victims,
            senses_lte={nid: self.links.senses_lte(nid) for nid in self.counters},
        )
        self.period_bits = {s: 0 for s in self.stations}

        self.heap: list = []
        self.seq = 0
        self.gen = 0
        self.lte = False
        self.busy = False
        self.in_cfp = False
        self.beacon_pending: Optional[tuple[int, SuperframePlan]] = None
        self.rotation = 0
        self.cfp_state: Optional[dict] = None

    # -- plumbing -------------------------------------------------------------

    def _push(self, time: int, kind: EventKind, subject: str = "", payload=None) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, int(kind), self.rank.get(subject, 0), self.seq, subject, payload))

    def _log(self, time: int, kind: EventKind, subject: str, outcome: str) -> None:
        if self.trace is not None:
            self.trace.append(f"{time}\t{kind.name}\t{subject}\t{outcome}")

    def _in_window(self, t: int) -> bool:
        return self.window[0] <= t < self.window[1]

    def _data_us(self, rate: McsEntry) -> int:
        d = self._data_cache.get(rate.rate_mbps)
        if d is None:
            t, tr = self.sc.timings, self.sc.traffic
            d = math.ceil(
                data_frame_us(tr.mpdu_bits, tr.aggregation, t.mac_header_bits, t.phy_header_bits,
                              rate.rate_mbps, self.base.rate_mbps)
            )
            self._data_cache[rate.rate_mbps] = d
        return d

    def _poll_duration(self, victim: str) -> int:
        dl = self._data_us(self.links.link(self.ap, victim, False).mcs)
        d = 2 * self.sifs + dl + self.ack_us
        if self.ul:
            d += self.sifs + self._data_us(self.links.link(victim, self.ap, False).mcs)
        return d

    def _ok(self, tx: str, rx: str, t: int, need: McsEntry) -> bool:
        return self.links.link(tx, rx, self.schedule.lte_on(t)).sinr_db >= need.required_snr_db

    # -- frames ---------------------------------------------------------------

    def _new_frame(self, c: _Contender) -> Frame:
        if not c.is_ap:
            return Frame(c.id, self.ap)
        return Frame(self.ap, self.stations[self.dest_rng.randrange(len(self.stations))])

    def _load(self, c: _Contender) -> None:
        frame = self._new_frame(c)
        c.state = replace(c.state, pending_frame=frame, retry_count=frame.retries,
                          backoff_remaining=backoff_draw(c.rng, c.state.cw))

    # -- contention -----------------------------------------------------------

    def _eligible(self, c: _Contender) -> bool:
        return c.state.pending_frame is not None and not c.hold and not (self.lte and c.senses)

    def _freeze(self, c: _Contender, now: int) -> None:
        if c.resume_at is None:
            return
        if now > c.resume_at:
            k = min((now - c.resume_at) // self.slot, c.state.backoff_remaining)
            c.state = replace(c.state, backoff_remaining=c.state.backoff_remaining - k)
        c.resume_at = None

    def _reschedule(self) -> None:
        self.gen += 1
        if self.busy or self.in_cfp:
            return
        best = None
        for c in self.contenders:
            if c.resume_at is not None and self._eligible(c):
                t = c.resume_at + c.state.backoff_remaining * self.slot
                if best is None or t < best:
                    best = t
        if best is not None:
            self._push(best, EventKind.BACKOFF_EXPIRE, "", self.gen)

    def _medium_idle(self, now: int) -> None:
        self.busy = False
        if self.beacon_pending is not None:
            # beacon has priority: it goes out after PIFS, before anyone's DIFS ends
            self.busy = True
            tbtt, plan = self.beacon_pending
            self._push(now + self.pifs, EventKind.BEACON_DUE, self.ap, ("deferred", tbtt, plan))
            self.gen += 1
            return
        for c in self.contenders:
            if self._eligible(c):
                c.resume_at = now + self.difs
        self._reschedule()

    def _start_busy(self, now: int, until: int) -> None:
        for c in self.contenders:
            self._freeze(c, now)
        self.busy = True
        self.gen += 1
        lo, hi = max(now, self.window[0]), min(until, self.window[1])
        if hi > lo:
            self.tm.busy_us += hi - lo

    # -- exchange resolution --------------------------------------------------

    def _exchange(self, src: str, dst: str, start: int) -> tuple[Outcome, int]:
        base = self.base
        rts_end = start + self.rts_us
        if not self._ok(src, dst, rts_end, base):
            return Outcome.SINR_FAIL, rts_end + self.cts_timeout
        cts_end = rts_end + self.sifs + self.cts_us
        if not self._ok(dst, src, cts_end, base):
            return Outcome.SINR_FAIL, max(cts_end, rts_end + self.cts_timeout)
        mcs = self.links.link(src, dst, self.schedule.lte_on(cts_end)).mcs
        if mcs is None:
            return Outcome.SINR_FAIL, cts_end + self.sifs + self._data_us(base) + self.cts_timeout
        data_end = cts_end + self.sifs + self._data_us(mcs)
        if not self._ok(src, dst, data_end, mcs):
            return Outcome.SINR_FAIL, data_end + self.cts_timeout
        ack_end = data_end + self.sifs + self.ack_us
        if not self._ok(dst, src, ack_end, base):
            return Outcome.SINR_FAIL, max(ack_end, data_end + self.cts_timeout)
        return Outcome.SUCCESS, ack_end

    def _apply_filter(self, ap: _Contender) -> bool:
        """Swap a victim-bound frame out during LTE-ON; False if nothing to send.

        Buffers are full, so the victim's queue loses nothing by being skipped.
        """
        frame = ap.state.pending_frame
        if ap_tx_filter(frame.dst, self.lte, self.victims, self.scheme) == TxDecision.SERVE:
            return True
        if not self.non_victims:
            ap.state = replace(ap.state, pending_frame=None)
            ap.hold = True
            return False
        dst = self.non_victims[self.dest_rng.randrange(len(self.non_victims))]
        ap.state = replace(ap.state, pending_frame=Frame(self.ap, dst), retry_count=0)
        return True

    # -- event handlers -------------------------------------------------------

    def _on_backoff_expire(self, now: int, gen: int) -> None:
        if gen != self.gen:
            return
        winners = []
        for c in self.contenders:
            if c.resume_at is not None and self._eligible(c):
                if c.resume_at + c.state.backoff_remaining * self.slot == now:
                    winners.append(c)
        if not winners:
            raise SimulationError(f"backoff expiry at {now} without a winner")
        for c in winners:
            c.state = replace(c.state, backoff_remaining=0)
            c.resume_at = None
        transmitting = []
        for c in winners:
            if c.is_ap and not self._apply_filter(c):
                continue
            transmitting.append(c)
        if not transmitting:
            self._reschedule()
            return
        if self._in_window(now):
            self.tm.total_network_access_opportunities += len(transmitting)
            for c in transmitting:
                self.counters[c.id].attempted_exchanges += 1
                if c.is_ap:
                    self.tm.dl_access_opportunities += 1
        if len(transmitting) > 1:
            outcome, end = Outcome.COLLISION, now + self.rts_us + self.cts_timeout
        else:
            f = transmitting[0].state.pending_frame
            outcome, end = self._exchange(f.src, f.dst, now)
        self._start_busy(now, end)
        desc = ",".join(f"{c.id}>{c.state.pending_frame.dst}" for c in transmitting)
        self._log(now, EventKind.BACKOFF_EXPIRE, "+".join(c.id for c in transmitting), desc)
        kind = EventKind.TX_END if outcome == Outcome.SUCCESS else EventKind.TIMEOUT
        self._push(end, kind, transmitting[0].id, (tuple(transmitting), outcome, now))

    def _credit(self, now: int, dst_or_src: str, downlink: bool) -> None:
        if self._in_window(now):
            c = self.counters[dst_or_src]
            if downlink:
                c.bits_dl += self.payload
                self.tm.net_bits_dl += self.payload
            else:
                c.bits_ul += self.payload
                self.tm.net_bits_ul += self.payload
        self.period_bits[dst_or_src] += self.payload

    def _on_exchange_end(self, now: int, kind: EventKind, payload) -> None:
        transmitting, outcome, started = payload
        for c in transmitting:
            frame = c.state.pending_frame
            ok = outcome == Outcome.SUCCESS
            if ok:
                if c.is_ap:
                    self._credit(now, frame.dst, True)
                else:
                    self._credit(now, frame.src, False)
                # attempts are counted at start, so successes are too
                if self._in_window(started):
                    self.counters[c.id].successful_exchanges += 1
            if c.is_ap and self._in_window(now):
                # every (re)transmission counts as one DL attempt
                self.tm.dl_tx_attempts += 1
                self.tm.dl_tx_successes += int(ok)
            c.state = retry_update(c.state, ok, self.cp)
            if c.state.pending_frame is None:
                self._load(c)
            else:
                c.state = replace(c.state, backoff_remaining=backoff_draw(c.rng, c.state.cw))
            self._log(now, kind, c.id, f"{frame.dst}:{outcome.value}")
        self._medium_idle(now)

    def _on_lte(self, now: int, on: bool) -> None:
        self.lte = on
        self._log(now, EventKind.LTE_ON_START if on else EventKind.LTE_OFF_START, "eNB", "")
        if on:
            for c in self.contenders:
                if c.senses:
                    self._freeze(c, now)
            nxt = now - now % self.BI + self.BI
            if self.schedule.off_time > 0 and nxt < self.end:
                self._push(nxt, EventKind.LTE_OFF_START, "eNB")
        else:
            for c in self.contenders:
                c.hold = False
                if c.is_ap and c.state.pending_frame is None:
                    self._load(c)
                if c.senses and not self.busy and not self.in_cfp and self._eligible(c):
                    c.resume_at = now + self.difs
            on_at = now + self.schedule.off_time
            if self.schedule.on_time > 0 and on_at < self.end:
                self._push(on_at, EventKind.LTE_ON_START, "eNB")
        self._reschedule()

    def _end_period(self, period: int) -> None:
        """Feed the finished period's class throughputs to the controller."""
        if self.planner is not None and self.victims and self.non_victims:
            nv = len(self.victims)
            nnv = len(self.non_victims)
            gv = sum(self.period_bits[s] for s in self.victims) / (nv * self.BI)
            gnv = sum(self.period_bits[s] for s in self.non_victims) / (nnv * self.BI)
            self.planner.observe(period, gv, gnv)
        self.period_bits = {s: 0 for s in self.stations}

    def _on_beacon_due(self, now: int, payload) -> None:
        if payload is None:
            k = now // self.BI
            if k > 0:
                self._end_period(k - 1)
            if now + self.BI < self.end:
                self._push(now + self.BI, EventKind.BEACON_DUE, self.ap)
            t_cfp = self.planner.t_cfp() if self.scheme == Scheme.PROPOSED else 0
            plan = plan_superframe(
                self.schedule, t_cfp, self.victims if self.scheme == Scheme.PROPOSED else (),
                self.beacon_us, self.poll_us, self.rotation, self.cf_end_us,
            )
            tbtt = now
            if self.busy or self.in_cfp:
                self.beacon_pending = (tbtt, plan)
                self._log(now, EventKind.BEACON_DUE, self.ap, "deferred")
                return
        else:
            _, tbtt, plan = payload
            self.beacon_pending = None
        end = now + self.beacon_us
        self._start_busy(now, end)
        self._log(now, EventKind.BEACON_DUE, self.ap, f"cfp={plan.cfp_duration}")
        if plan.cfp_duration > 0 and plan.poll_order:
            self.in_cfp = True
            self.cfp_state = {"end": tbtt + plan.beacon_duration + plan.cfp_duration, "order": plan.poll_order, "i": 0}
            self._push(end, EventKind.CFP_POLL_DUE, self.ap)
        else:
            self._push(end, EventKind.TX_END, self.ap, None)

    def _on_cfp_poll(self, now: int) -> None:
        st = self.cfp_state
        if st["i"] < len(st["order"]):
            v = st["order"][st["i"]]
            d = self.poll_us[v]
            if now + d + self.cf_end_us <= st["end"]:
                st["i"] += 1
                done = now + d
                self._start_busy(now, done)
                self._credit(done, v, True)
                if self.ul:
                    self._credit(done, v, False)
                if self._in_window(done):
                    c = self.counters[v]
                    c.successful_exchanges += 1
                    c.attempted_exchanges += 1
                    self.tm.dl_tx_attempts += 1
                    self.tm.dl_tx_successes += 1
                    self.tm.cfp_polls += 1
                self._log(now, EventKind.CFP_POLL_DUE, v, "SUCCESS")
                self._push(done, EventKind.CFP_POLL_DUE, self.ap)
                return
        if self.victims:
            self.rotation = (self.rotation + st["i"]) % len(self.victims)
        self._start_busy(now, now + self.cf_end_us)
        self._log(now, EventKind.CFP_POLL_DUE, self.ap, f"CF-End polls={st['i']}")
        self._push(now + self.cf_end_us, EventKind.CFP_END, self.ap)

    # -- main loop ------------------------------------------------------------

    def run(self) -> TraceMetrics:
        for c in self.contenders:
            self._load(c)
        if self.schedule.on_time > 0:
            if self.schedule.off_time == 0:
                self._push(0, EventKind.LTE_ON_START, "eNB")
            else:
                self._push(self.schedule.off_time, EventKind.LTE_ON_START, "eNB")
        self._push(0, EventKind.BEACON_DUE, self.ap)
        self._medium_idle(0)
        while self.heap:
            time, kind, _, _, subject, payload = heapq.heappop(self.heap)
            if time >= self.end:
                break
            kind = EventKind(kind)
            if kind == EventKind.BACKOFF_EXPIRE:
                self._on_backoff_expire(time, payload)
            elif kind in (EventKind.TX_END, EventKind.TIMEOUT):
                if payload is None:
                    self._medium_idle(time)
                else:
                    self._on_exchange_end(time, kind, payload)
            elif kind == EventKind.LTE_ON_START:
                self._on_lte(time, True)
            elif kind == EventKind.LTE_OFF_START:
                self._on_lte(time, False)
            elif kind == EventKind.BEACON_DUE:
                self._on_beacon_due(time, payload)
            elif kind == EventKind.CFP_POLL_DUE:
                self._on_cfp_poll(time)
            elif kind == EventKind.CFP_END:
                self.in_cfp = False
                self.cfp_state = None
                self._medium_idle(time)
        else:
            raise SimulationError("event queue starved before the end of the run")
        return self.tm


def run(
    scenario: Scenario,
    plan_source=None,
    seed: Optional[int] = None,
    trace: Optional[list] = None,
) -> TraceMetrics:
    """Simulate ``scenario.sim_duration`` of channel time.

    ``plan_source`` sizes the CFP under the PCF scheme (adaptive controller
    by default) and is ignored for standard Wi-Fi. If ``trace`` is a list,
    one tab-separated record per handled event is appended to it.
    """
    if seed is None:
        seed = scenario.seeds[0] if scenario.seeds else 0
    return _Simulation(scenario, plan_source, seed, trace).run()
