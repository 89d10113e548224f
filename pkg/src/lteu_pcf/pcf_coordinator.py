"""Inter-RAT coordination and the PCF-based victim scheme.

The LTE-U duty cycle is aligned to the Wi-Fi beacon interval with OFF
first. Each beacon interval the AP runs beacon -> CFP (victims polled
round-robin) -> CP. During LTE-ON the AP defers frames addressed to victims.
The CFP length is adapted once per period from smoothed class throughputs.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Union

from .core_model import Scheme


@dataclass(frozen=True)
class DutyCycleSchedule:
    """LTE-U ON/OFF square wave; OFF starts every period."""

    period: int
    eta: float
    off_first: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta={self.eta} out of [0,1]")
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def on_time(self) -> int:
        return int(round(self.eta * self.period))

    @property
    def off_time(self) -> int:
        return self.period - self.on_time

    def lte_on(self, t: int) -> bool:
        return self.on_time > 0 and (t % self.period) >= self.off_time

    def period_start(self, t: int) -> int:
        return t - t % self.period

    def boundaries(self, until: int) -> list[tuple[int, bool]]:
        """(time, lte_on) for every state change in [0, until)."""
        out = []
        if self.on_time == 0:
            return out
        if self.off_time == 0:
            return [(0, True)]
        k = 0
        while k * self.period < until:
            base = k * self.period
            if k > 0:
                out.append((base, False))
            if base + self.off_time < until:
                out.append((base + self.off_time, True))
            k += 1
        return out


def sync_controller(ap_beacon_interval: int, eta: float) -> DutyCycleSchedule:
    """Align the duty cycle to the beacon interval and hand eta to the AP side."""
    return DutyCycleSchedule(period=int(ap_beacon_interval), eta=eta, off_first=True)


@dataclass(frozen=True)
class SuperframePlan:
    beacon_at: int
    beacon_duration: int
    cfp_duration: int
    poll_order: tuple[str, ...]
    cp_start: int
    on_start: int
    off_time: int
    degenerate: bool = False
    # CP continues into LTE-ON with the AP skipping frames for victims
    on_defers_victims: bool = True

    @property
    def cp_duration(self) -> int:
        return self.on_start - self.cp_start


@dataclass(frozen=True)
class CfpController:
    t_cfp: float
    alpha: float
    max_cfp: float
    gamma_v_smoothed: Optional[float] = None
    gamma_nv_smoothed: Optional[float] = None
    restart: float = 0.0
    min_cfp: float = 0.0

    def __post_init__(self):
        if not self.min_cfp <= self.t_cfp <= self.max_cfp:
            object.__setattr__(self, "t_cfp", min(max(self.t_cfp, self.min_cfp), self.max_cfp))


def update_cfp_duration(
    controller: CfpController, gamma_v_prev: float, gamma_nv_prev: float
) -> CfpController:
    """One controller step from the throughputs measured over the last period."""
    if gamma_v_prev < 0 or gamma_nv_prev < 0:
        raise ValueError("throughputs must be non-negative")
    a = controller.alpha
    if controller.gamma_v_smoothed is None:
        gv, gnv = gamma_v_prev, gamma_nv_prev
    else:
        gv = (1 - a) * gamma_v_prev + a * controller.gamma_v_smoothed
        gnv = (1 - a) * gamma_nv_prev + a * controller.gamma_nv_smoothed
    old = controller.t_cfp
    if gv == 0 and gnv == 0:
        new = old
    elif gv == 0:
        new = controller.max_cfp
    elif gnv == 0:
        new = controller.min_cfp
    else:
        # a zero CFP cannot grow multiplicatively; restart from the seed value
        base = old if old > 0 else controller.restart
        new = (gnv / gv) * base
    new = min(max(new, controller.min_cfp), controller.max_cfp)
    return replace(controller, t_cfp=new, gamma_v_smoothed=gv, gamma_nv_smoothed=gnv)


def plan_superframe(
    schedule: DutyCycleSchedule,
    t_cfp: Union[float, CfpController],
    victims: Iterable[str],
    beacon_duration: int,
    poll_duration: Union[int, Mapping[str, int]] = 0,
    rotation: int = 0,
    cf_end_duration: int = 0,
) -> SuperframePlan:
    """Lay out one beacon interval.

    The CFP is clamped to the OFF window left after the beacon and is forced
    to zero without victims. ``poll_order`` lists the victims in round-robin
    order, starting at ``rotation``, as many times as polls fit.
    """
    if isinstance(t_cfp, CfpController):
        t_cfp = t_cfp.t_cfp
    victims = sorted(victims)
    off = schedule.off_time
    room = max(0, off - beacon_duration)
    cfp = 0 if not victims else int(min(max(t_cfp, 0), room))
    polls: list[str] = []
    if cfp > 0:
        n = len(victims)
        budget = cfp - cf_end_duration
        i = 0
        while True:
            v = victims[(rotation + i) % n]
            d = poll_duration[v] if isinstance(poll_duration, Mapping) else poll_duration
            if d <= 0 or budget < d:
                break
            budget -= d
            polls.append(v)
            i += 1
    cp_start = min(beacon_duration + cfp, max(off, beacon_duration))
    return SuperframePlan(
        beacon_at=0,
        beacon_duration=beacon_duration,
        cfp_duration=cfp,
        poll_order=tuple(polls),
        cp_start=cp_start,
        on_start=max(off, cp_start),
        off_time=off,
        degenerate=off < beacon_duration,
    )


class TxDecision(str, Enum):
    SERVE = "SERVE"
    DEFER = "DEFER"


def ap_tx_filter(dest: str, lte_on: bool, victims: Iterable[str], scheme: Scheme) -> TxDecision:
    if scheme == Scheme.PROPOSED and lte_on and dest in victims:
        return TxDecision.DEFER
    return TxDecision.SERVE


# -- planners consumed by the simulator ---------------------------------------


@dataclass
class ControllerRecord:
    period: int
    gamma_v_prev: float
    gamma_nv_prev: float
    gamma_v_new: float
    gamma_nv_new: float
    t_cfp: float

    def tsv(self) -> str:
        return (
            f"{self.period}\t{self.gamma_v_prev:.6f}\t{self.gamma_nv_prev:.6f}\t"
            f"{self.gamma_v_new:.6f}\t{self.gamma_nv_new:.6f}\t{self.t_cfp:.3f}"
        )


class FixedCfpPlanner:
    """Constant CFP of ``x`` times the beacon interval every period."""

    adaptive = False

    def __init__(self, x: float):
        if x < 0:
            raise ValueError("x must be non-negative")
        self.x = x
        self.log: list[ControllerRecord] = []

    def start(self, schedule: DutyCycleSchedule, beacon_duration: int, poll_floor: int) -> None:
        self.schedule = schedule

    def t_cfp(self) -> float:
        return self.x * self.schedule.period

    def observe(self, period: int, gamma_v: float, gamma_nv: float) -> None:
        pass


class AdaptiveCfpPlanner:
    """Closed-loop CFP sizing driven by :func:`update_cfp_duration`.

    Starts at ``initial_fraction`` of the OFF window.
    """

    adaptive = True

    def __init__(self, alpha: float = 0.5, initial_fraction: float = 0.1):
        self.alpha = alpha
        self.initial_fraction = initial_fraction
        self.controller: Optional[CfpController] = None
        self.log: list[ControllerRecord] = []

    def start(self, schedule: DutyCycleSchedule, beacon_duration: int, poll_floor: int) -> None:
        self.schedule = schedule
        room = max(0, schedule.off_time - beacon_duration)
        self.controller = CfpController(
            t_cfp=self.initial_fraction * schedule.off_time,
            alpha=self.alpha,
            max_cfp=room,
            restart=min(poll_floor, room),
        )
        self.log = []

    def t_cfp(self) -> float:
        return self.controller.t_cfp

    def observe(self, period: int, gamma_v: float, gamma_nv: float) -> None:
        self.controller = update_cfp_duration(self.controller, gamma_v, gamma_nv)
        c = self.controller
        self.log.append(
            ControllerRecord(period, gamma_v, gamma_nv, c.gamma_v_smoothed, c.gamma_nv_smoothed, c.t_cfp)
        )

    def log_tsv(self) -> str:
        header = "period\tgamma_v_prev\tgamma_nv_prev\tgamma_v_new\tgamma_nv_new\tt_cfp_us\n"
        return header + "".join(r.tsv() + "\n" for r in self.log)
