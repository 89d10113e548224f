"""Sweeps over the LTE-U ON fraction, CSV output and the ``lteu-pcf`` command.

A sweep runs one simulation per (eta, seed, scheme), reduces every run to a
flat ``{(metric, entity): value}`` map and aggregates over seeds. Rows are
sorted before they are written, so the CSV does not depend on worker count
or completion order.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import analytic_model as am
from . import des_engine
from .core_model import Direction, Scenario, ScenarioError, Scheme, resolve_scenario
from .metrics import (
    Dir,
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
from .pcf_coordinator import AdaptiveCfpPlanner, FixedCfpPlanner

CSV_COLUMNS = ("eta", "scheme", "traffic", "metric", "entity", "mean", "std")
DEFAULT_ETAS = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_SEEDS = tuple(range(1, 11))
VICTIM, NON_VICTIM, NETWORK = "victim", "non_victim", "network"


class SweepError(RuntimeError):
    """A run inside a sweep failed; the sweep is abandoned."""


@dataclass(frozen=True)
class SweepSpec:
    scenario: str = "fig1"
    eta_grid: tuple = DEFAULT_ETAS
    seeds: tuple = DEFAULT_SEEDS
    schemes: tuple = (Scheme.STANDARD, Scheme.PROPOSED)
    traffic: Direction = Direction.UL_AND_DL
    outputs: Optional[str] = None
    # "adaptive": closed-loop controller; "analytic": fixed CFP at the fair x
    cfp: str = "adaptive"
    workers: int = 1
    metrics: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "eta_grid", tuple(float(e) for e in self.eta_grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        object.__setattr__(self, "traffic", Direction(self.traffic))

    def violations(self) -> list[str]:
        out = []
        if not self.eta_grid:
            out.append("empty eta grid")
        if any(not 0.0 <= e <= 1.0 for e in self.eta_grid):
            out.append("eta grid value out of [0,1]")
        if not self.seeds:
            out.append("empty seed list")
        if not self.schemes:
            out.append("no scheme selected")
        if self.cfp not in ("adaptive", "analytic"):
            out.append(f"unknown cfp mode {self.cfp!r}")
        if self.workers < 1:
            out.append("workers below 1")
        return out


@dataclass(frozen=True, order=True)
class ResultRow:
    eta: float
    scheme: str
    traffic: str
    metric: str
    entity: str
    mean: float
    std: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"non-finite mean for {self.metric}/{self.entity}")
        if self.std < 0:
            raise ValueError("negative standard deviation")


def run_metrics(tm: TraceMetrics) -> dict[tuple[str, str], float]:
    """Everything the figure presets plot, from one run."""
    out: dict[tuple[str, str], float] = {}
    for d, name in ((Dir.BOTH, "throughput"), (Dir.DL, "dl_throughput"), (Dir.UL, "ul_throughput")):
        for sta in tm.stations:
            out[(name, sta)] = throughput(tm, sta, d)
        if tm.victims:
            out[(name, VICTIM)] = class_throughput(tm, True, d)
        if len(tm.victims) < len(tm.stations):
            out[(name, NON_VICTIM)] = class_throughput(tm, False, d)
        out[(name, NETWORK)] = network_throughput(tm, d)
    for node in tm.nodes:
        out[("access_pct", node)] = successful_access_pct(tm, node)
    out[("dl_opportunity_pct", tm.ap_id)] = dl_opportunity_pct(tm)
    out[("successful_dl_pct", tm.ap_id)] = successful_dl_pct(tm)
    if tm.victims and len(tm.victims) < len(tm.stations):
        out[("jain", "classes")] = jain_index(
            [class_throughput(tm, True), class_throughput(tm, False)]
        )
    return out


def _fixed_planner(scenario: Scenario) -> FixedCfpPlanner:
    inp = am.inputs_from_scenario(scenario)
    if inp.n_victim in (0, inp.n_total):
        return FixedCfpPlanner(0.0)
    return FixedCfpPlanner(float(am.clamped_fair_x(inp)))


def simulate(scenario: Scenario, eta: float, scheme: Scheme, seed: int, cfp: str = "adaptive",
             trace: Optional[list] = None) -> TraceMetrics:
    """One sweep point: the CFP is sized by the controller or fixed at the fair x."""
    sc = scenario.with_(eta=eta, scheme=scheme)
    planner = None
    if scheme == Scheme.PROPOSED:
        planner = _fixed_planner(sc) if cfp == "analytic" else AdaptiveCfpPlanner(sc.alpha)
    return des_engine.run(sc, planner, seed=seed, trace=trace)


def _run_one(job) -> tuple:
    scenario, eta, scheme, seed, cfp = job
    return (eta, scheme.value, seed, run_metrics(simulate(scenario, eta, scheme, seed, cfp)))


def _jobs(spec: SweepSpec, scenario: Scenario) -> list[tuple]:
    return [
        (scenario, eta, scheme, seed, spec.cfp)
        for eta in spec.eta_grid
        for scheme in spec.schemes
        for seed in spec.seeds
    ]


def _execute(jobs: list[tuple], workers: int) -> list[tuple]:
    if workers <= 1 or len(jobs) <= 1:
        out = []
        for job in jobs:
            try:
                out.append(_run_one(job))
            except Exception as exc:
                raise SweepError(f"run eta={job[1]} scheme={job[2].value} seed={job[3]}: {exc}") from exc
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_one, job): job for job in jobs}
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        for fut in done:
            exc = fut.exception()
            if exc is not None:
                for p in pending:
                    p.cancel()
                job = futures[fut]
                raise SweepError(
                    f"run eta={job[1]} scheme={job[2].value} seed={job[3]}: {exc}"
                ) from exc
        return [f.result() for f in futures]


def aggregate(results: Iterable[tuple], traffic: Direction, metrics: Optional[Sequence[str]] = None) -> list[ResultRow]:
    """Mean and sample std over seeds for every (eta, scheme, metric, entity)."""
    groups: dict[tuple, list[tuple[int, float]]] = {}
    for eta, scheme, seed, values in results:
        for (metric, entity), v in values.items():
            if metrics is not None and metric not in metrics:
                continue
            groups.setdefault((eta, scheme, metric, entity), []).append((seed, v))
    rows = []
    for (eta, scheme, metric, entity), samples in groups.items():
        samples.sort()
        m, s = mean_std(v for _, v in samples)
        rows.append(ResultRow(eta, scheme, traffic.value, metric, entity, m, s))
    return sorted(rows)


def run_sweep(spec: SweepSpec, scenario: Optional[Scenario] = None) -> list[ResultRow]:
    """Simulate every (eta, seed, scheme) of ``spec`` and aggregate over seeds.

    Any failing run aborts the whole sweep with :class:`SweepError`.
    """
    problems = spec.violations()
    if problems:
        raise ValueError("invalid sweep: " + "; ".join(problems))
    if scenario is None:
        try:
            scenario = resolve_scenario(spec.scenario)
        except ScenarioError as exc:
            raise ScenarioError(f"scenario {spec.scenario!r}: {exc}") from None
    scenario = scenario.with_(traffic__direction_mode=spec.traffic)
    results = _execute(_jobs(spec, scenario), spec.workers)
    return aggregate(results, spec.traffic, spec.metrics)


# -- CSV ------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def csv_text(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow((_fmt(r.eta), r.scheme, r.traffic, r.metric, r.entity, _fmt(r.mean), _fmt(r.std)))
    return buf.getvalue()


def emit_csv(rows: Iterable[ResultRow], path) -> Path:
    path = Path(path)
    try:
        path.write_text(csv_text(rows))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        return [
            ResultRow(float(r["eta"]), r["scheme"], r["traffic"], r["metric"], r["entity"],
                      float(r["mean"]), float(r["std"]))
            for r in csv.DictReader(fh)
        ]


# -- analytic tables and cross-validation ------------------------------------------


def analytic_rows(inp: am.AnalyticInputs, etas: Sequence[float]) -> list[ResultRow]:
    """Closed-form per-class and network throughput, plus the fair CFP fraction."""
    rows = []
    traffic = Direction.DL_ONLY.value
    for eta in etas:
        at = inp.with_(eta=eta, x=0)
        s = am.standard_throughputs(at)
        x = am.clamped_fair_x(at)
        p = am.proposed_throughputs(at.with_(x=x))
        for scheme, rep in ((Scheme.STANDARD, s), (Scheme.PROPOSED, p)):
            for entity, v in ((VICTIM, rep.gamma_v), (NON_VICTIM, rep.gamma_nv), (NETWORK, rep.gamma_total)):
                rows.append(ResultRow(float(eta), scheme.value, traffic, "analytic_throughput", entity, float(v)))
        rows.append(ResultRow(float(eta), Scheme.PROPOSED.value, traffic, "cfp_fraction", "AP", float(x)))
    return sorted(rows)


@dataclass(frozen=True)
class ComparePoint:
    eta: float
    scheme: str
    entity: str
    simulated: float
    analytic: float

    @property
    def rel_error(self) -> float:
        if self.analytic == 0:
            return 0.0 if self.simulated == 0 else math.inf
        return abs(self.simulated - self.analytic) / abs(self.analytic)


@dataclass
class CompareReport:
    points: list[ComparePoint]
    eta_t: Optional[float]
    fairness: dict = field(default_factory=dict)
    tolerance: float = 0.10

    @property
    def flagged(self) -> list[ComparePoint]:
        return [p for p in self.points if p.rel_error > self.tolerance]

    def text(self) -> str:
        lines = ["eta\tscheme\tentity\tsim_mbps\tanalytic_mbps\trel_err\tflag"]
        for p in self.points:
            flag = "OVER" if p.rel_error > self.tolerance else "ok"
            lines.append(
                f"{p.eta:.2f}\t{p.scheme}\t{p.entity}\t{p.simulated:.3f}\t{p.analytic:.3f}\t{p.rel_error:.4f}\t{flag}"
            )
        if self.eta_t is not None:
            lines.append(f"eta_t\t{self.eta_t:.4f}")
        for eta, fair in sorted(self.fairness.items()):
            lines.append(f"fair\t{eta:.2f}\t{fair}")
        lines.append(f"flagged\t{len(self.flagged)}")
        return "\n".join(lines) + "\n"


def compare_analytic_sim(
    rows: Sequence[ResultRow], inputs: am.AnalyticInputs, tolerance: float = 0.10, jain_min: float = 0.99
) -> CompareReport:
    """Relative error of simulated vs closed-form per-class throughput.

    Expects DL-only simulation rows; PROPOSED is compared at the clamped fair
    CFP fraction, which is what the ``analytic`` CFP mode simulates.
    """
    sim = {
        (r.eta, r.scheme, r.entity): r.mean
        for r in rows
        if r.traffic == Direction.DL_ONLY.value and r.metric == "throughput" and r.entity in (VICTIM, NON_VICTIM)
    }
    if not sim:
        raise ValueError("no DL-only throughput rows to compare")
    both = 0 < inputs.n_victim < inputs.n_total
    eta_t = am.eta_threshold(inputs) if both else None
    points, fairness = [], {}
    for (eta, scheme, entity), value in sorted(sim.items()):
        at = inputs.with_(eta=eta, x=0)
        if scheme == Scheme.STANDARD.value:
            rep = am.standard_throughputs(at)
        else:
            rep = am.proposed_throughputs(at.with_(x=am.clamped_fair_x(at)))
        ref = rep.gamma_v if entity == VICTIM else rep.gamma_nv
        points.append(ComparePoint(eta, scheme, entity, value, float(ref)))
    if both:
        for eta in sorted({k[0] for k in sim}):
            v = sim.get((eta, Scheme.PROPOSED.value, VICTIM))
            nv = sim.get((eta, Scheme.PROPOSED.value, NON_VICTIM))
            if v is not None and nv is not None and eta <= eta_t:
                fairness[eta] = jain_index([v, nv]) >= jain_min
    return CompareReport(points, eta_t, fairness, tolerance)


# -- presets ---------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    spec: SweepSpec

    def command(self) -> str:
        return f"lteu-pcf run --preset {self.name} --out results/"


_THROUGHPUT = ("throughput", "access_pct", "jain")
_AP = ("dl_throughput", "dl_opportunity_pct", "successful_dl_pct")
_UL_DL = ("throughput", "dl_throughput", "ul_throughput")

PRESETS = {
    p.name: p
    for p in (
        Preset("fig2", "standard Wi-Fi, UL and DL: per-user throughput and successful access",
               SweepSpec(schemes=(Scheme.STANDARD,), metrics=_THROUGHPUT)),
        Preset("fig3", "standard Wi-Fi, UL and DL: AP DL throughput, DL opportunity, successful DL",
               SweepSpec(schemes=(Scheme.STANDARD,), metrics=_AP)),
        Preset("fig6", "DL only: simulated per-class throughput of both schemes at the fair CFP",
               SweepSpec(traffic=Direction.DL_ONLY, cfp="analytic", metrics=("throughput", "jain"))),
        Preset("fig7", "PCF scheme, UL and DL: per-user throughput and successful access",
               SweepSpec(schemes=(Scheme.PROPOSED,), metrics=_THROUGHPUT)),
        Preset("fig8", "PCF scheme, UL and DL: AP DL throughput, DL opportunity, successful DL",
               SweepSpec(schemes=(Scheme.PROPOSED,), metrics=_AP)),
        Preset("fig9", "both schemes, UL and DL: UL, DL and total network throughput",
               SweepSpec(metrics=_UL_DL)),
    )
}


# -- command line ----------------------------------------------------------------


def parse_etas(text: str) -> tuple[float, ...]:
    """``0,0.5,1`` or ``start:stop:step`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        if step <= 0:
            raise ValueError("eta step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9))
        return tuple(round(start + i * step, 10) for i in range(n + 1))
    return tuple(float(p) for p in text.split(",") if p)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``1,2,5`` or ``1-10``."""
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = (int(p) for p in text.split("-"))
        return tuple(range(lo, hi + 1))
    return tuple(int(p) for p in text.split(",") if p)


_SCHEMES = {
    "both": (Scheme.STANDARD, Scheme.PROPOSED),
    "standard": (Scheme.STANDARD,),
    "proposed": (Scheme.PROPOSED,),
}
_TRAFFIC = {"dl": Direction.DL_ONLY, "dl_only": Direction.DL_ONLY, "ul_and_dl": Direction.UL_AND_DL, "uldl": Direction.UL_AND_DL}


def _add_common(p: argparse.ArgumentParser, traffic_default: Optional[str]) -> None:
    p.add_argument("--scenario", default=None, help="bundled scenario name or JSON file (default fig1)")
    p.add_argument("--etas", default=None, help="e.g. 0:1:0.1 or 0,0.5,1")
    p.add_argument("--seeds", default=None, help="e.g. 1-10 or 1,2,3")
    p.add_argument("--scheme", choices=sorted(_SCHEMES), default=None)
    p.add_argument("--traffic", choices=sorted(_TRAFFIC), default=traffic_default)
    p.add_argument("--out", default=None, help="output directory (CSV to stdout when omitted)")
    p.add_argument("--workers", type=int, default=None, help="parallel simulation processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lteu-pcf", description="Wi-Fi/LTE-U coexistence simulator and analytic model")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate an eta sweep and write aggregated CSV")
    run.add_argument("--preset", choices=sorted(PRESETS), default=None)
    run.add_argument("--spec", default=None, help="JSON file with SweepSpec fields")
    run.add_argument("--cfp", choices=("adaptive", "analytic"), default=None)
    _add_common(run, None)

    ana = sub.add_parser("analytic", help="closed-form DL-only throughput table")
    _add_common(ana, None)

    cmp_ = sub.add_parser("compare", help="simulated vs closed-form DL-only throughput")
    _add_common(cmp_, None)

    sub.add_parser("presets", help="list figure presets")
    return parser


def _spec_from_args(args) -> SweepSpec:
    spec = SweepSpec()
    if getattr(args, "preset", None):
        spec = PRESETS[args.preset].spec
    if getattr(args, "spec", None):
        try:
            doc = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read sweep spec {args.spec}: {exc}") from None
        unknown = set(doc) - set(SweepSpec.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sweep spec fields: {sorted(unknown)}")
        if "metrics" in doc and doc["metrics"] is not None:
            doc["metrics"] = tuple(doc["metrics"])
        spec = replace(spec, **doc)
    changes = {}
    if args.scenario:
        changes["scenario"] = args.scenario
    if args.etas:
        changes["eta_grid"] = parse_etas(args.etas)
    if args.seeds:
        changes["seeds"] = parse_seeds(args.seeds)
    if args.scheme:
        changes["schemes"] = _SCHEMES[args.scheme]
    if args.traffic:
        changes["traffic"] = _TRAFFIC[args.traffic]
    if args.out:
        changes["outputs"] = args.out
    if args.workers is not None:
        changes["workers"] = args.workers
    if getattr(args, "cfp", None):
        changes["cfp"] = args.cfp
    return replace(spec, **changes)


def _write(text: str, out: Optional[str], filename: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / filename).write_text(text)
    print(f"wrote {d / filename}", file=sys.stderr)


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    rows = run_sweep(spec)
    _write(csv_text(rows), spec.outputs, f"{args.preset or 'sweep'}.csv")
    return 0


def _cmd_analytic(args) -> int:
    spec = _spec_from_args(args)
    scenario = resolve_scenario(spec.scenario)
    inp = am.inputs_from_scenario(scenario)
    rows = analytic_rows(inp, spec.eta_grid)
    _write(csv_text(rows), spec.outputs, "analytic.csv")
    if 0 < inp.n_victim < inp.n_total:
        print(f"eta_t\t{am.eta_threshold(inp):.4f}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    spec = replace(_spec_from_args(args), traffic=Direction.DL_ONLY, cfp="analytic",
                   schemes=_SCHEMES[args.scheme or "both"], metrics=("throughput",))
    scenario = resolve_scenario(spec.scenario)
    rows = run_sweep(spec, scenario)
    report = compare_analytic_sim(rows, am.inputs_from_scenario(scenario))
    _write(report.text(), spec.outputs, "compare.tsv")
    return 0


def _cmd_presets(args) -> int:
    for p in PRESETS.values():
        print(f"{p.name}\t{p.command()}\t{p.description}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "analytic": _cmd_analytic, "compare": _cmd_compare, "presets": _cmd_presets}[args.command]
    try:
        return handler(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SweepError, des_engine.SimulationError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
