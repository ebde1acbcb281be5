"""Benchmark harness: baseline vs corner-push pipelines, ratios and reports.

The baseline pipeline is PDHG followed by crossover. The treatment reuses the
same PDHG result, runs a corner push and then crossover. Each instance
produces one :class:`PipelineRecord` per pipeline (and per ``obj_scale`` when
sweeping). Everything in the report is a pure function of the records, so a
report rebuilt from a saved CSV is byte-identical to the original.

Records CSV columns (schema version 1) are listed in ``RECORD_FIELDS``;
columns ending in ``_time`` hold wall-clock seconds from per-phase monotonic
clocks. With parallel workers those timings include machine-load noise.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .corner_push import CornerPushConfig, run_corner_push
from .crossover import CrossoverConfig, CrossoverStatus, estimate_pushes, parse_log_line, run_crossover
from .instance_gen import GenSpec, generate, is_corner_push_candidate
from .lp_model import LinearProgram, Tolerances, off_bound_count
from .mps_io import read_model
from .pdhg import PdhgConfig, Status, solve_pdhg

logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1
SHIFT_SECONDS = 1.0
# floors keep ratios finite: one pivot / iteration for counts, 10 us for times
COUNT_FLOOR = 1.0
TIME_FLOOR = 1e-5
WIN_THRESHOLD = 0.10
OBJ_SCALE_SWEEP = (1e-6, 1e-4, 1.0)
BASELINE, CORNER = "baseline", "corner"


@dataclass
class PipelineRecord:
    instance: str
    pipeline: str
    m: int = 0
    n: int = 0
    seed: int = 0
    obj_scale: float = 0.0
    candidate: bool = False
    pdhg_status: str = ""
    pdhg_iters: int = 0
    corner_status: str = ""
    corner_iters: int = 0
    crossover_status: str = ""
    primal_pushes: int = 0
    dual_pushes: int = 0
    cleanup_pivots: int = 0
    total_pivots: int = 0
    est_primal_pushes: int = 0
    est_dual_pushes: int = 0
    primal_superbasics: int = 0
    dual_superbasics: int = 0
    off_bound_before: int = 0
    off_bound_after: int = 0
    objective: float = math.nan
    error: str = ""
    pdhg_time: float = 0.0
    corner_time: float = 0.0
    crossover_time: float = 0.0
    total_time: float = 0.0
    schema_version: int = RECORD_SCHEMA_VERSION

    @property
    def finished(self) -> bool:
        """All phases completed without a limit or failure."""
        ok = (not self.error and self.pdhg_status == Status.CONVERGED.value
              and self.crossover_status == CrossoverStatus.OPTIMAL_BASIS.value)
        if self.pipeline == CORNER and self.corner_status:
            ok = ok and self.corner_status == Status.CONVERGED.value
        return ok

    def check(self):
        """Raise ``ValueError`` if totals do not add up or times are negative."""
        times = (self.pdhg_time, self.corner_time, self.crossover_time, self.total_time)
        if any(t < 0 for t in times):
            raise ValueError(f"{self.instance}/{self.pipeline}: negative time")
        parts = self.pdhg_time + self.corner_time + self.crossover_time
        if not math.isclose(self.total_time, parts, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"{self.instance}/{self.pipeline}: total_time != sum of phases")
        if self.total_pivots != self.primal_pushes + self.dual_pushes + self.cleanup_pivots:
            raise ValueError(f"{self.instance}/{self.pipeline}: total_pivots != sum of parts")


RECORD_FIELDS = tuple(f.name for f in dataclasses.fields(PipelineRecord))
TIME_FIELDS = tuple(f for f in RECORD_FIELDS if f.endswith("_time"))
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineRecord)}


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Sequence[PipelineRecord], exclude_time: bool = False) -> str:
    cols = [f for f in RECORD_FIELDS if not (exclude_time and f in TIME_FIELDS)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_cell(getattr(r, f)) for f in cols])
    return buf.getvalue()


def records_from_csv(text: str) -> list[PipelineRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        kw = {}
        for k, v in row.items():
            if k not in _FIELD_TYPES:
                raise ValueError(f"unknown records column {k!r}")
            t = _FIELD_TYPES[k]
            if t in ("int", int):
                kw[k] = int(v)
            elif t in ("float", float):
                kw[k] = float(v)
            elif t in ("bool", bool):
                kw[k] = v == "1"
            else:
                kw[k] = v
        if kw.get("schema_version", RECORD_SCHEMA_VERSION) != RECORD_SCHEMA_VERSION:
            raise ValueError(f"unsupported records schema {kw['schema_version']}")
        out.append(PipelineRecord(**kw))
    return out


def write_records(records: Sequence[PipelineRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_records(path) -> list[PipelineRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return records_from_csv(fh.read())


# metrics


def shifted_geomean(values: Iterable[float], shift: float = SHIFT_SECONDS) -> float:
    """``exp(mean(log(v + shift))) - shift``."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("shifted_geomean of an empty list")
    if shift <= 0:
        raise ValueError("shift must be positive")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be finite and nonnegative")
    g = math.exp(float(np.mean(np.log(v + shift)))) - shift
    # clamp rounding so the result stays within [min, max]
    return float(min(max(g, v.min()), v.max()))


def geomean(values: Iterable[float]) -> float:
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("geomean of an empty list")
    if np.any(v <= 0):
        raise ValueError("geomean needs positive values")
    return float(math.exp(float(np.mean(np.log(v)))))


def ratio(after: float, before: float, floor: float = COUNT_FLOOR) -> float:
    """``after / before`` with both sides floored so zero counts stay finite."""
    return max(float(after), floor) / max(float(before), floor)


def classify(r: float, threshold: float = WIN_THRESHOLD) -> str:
    """``win`` when the treatment is at least ``threshold`` faster, ``loss``
    when at least ``threshold`` slower, else ``tie``."""
    if r <= 1.0 - threshold:
        return "win"
    if r >= 1.0 + threshold:
        return "loss"
    return "tie"


# ratio metric name -> record attribute compared across the two arms
PAIR_METRICS = {
    "primal_push_ratio": "primal_pushes",
    "dual_push_ratio": "dual_pushes",
    "crossover_time_ratio": "crossover_time",
    "total_time_ratio": "total_time",
    "pdhg_iteration_ratio": "pdhg_iters",
}


@dataclass
class MetricSummary:
    name: str
    ratios: list  # (instance, before, after, ratio) sorted by instance
    geomean: float
    wins: int
    losses: int
    ties: int

    @property
    def count(self) -> int:
        return len(self.ratios)


@dataclass
class AggregateReport:
    obj_scale: float
    compared: list
    excluded: list
    metrics: dict
    corner_iteration_ratio: Optional[MetricSummary]
    baseline_time_sgm: float
    corner_time_sgm: float

    @property
    def performance_ratio(self) -> float:
        if self.baseline_time_sgm == 0:
            return 1.0 if self.corner_time_sgm == 0 else math.inf
        return self.corner_time_sgm / self.baseline_time_sgm


def _summary(name, rows, threshold) -> MetricSummary:
    counts = {"win": 0, "loss": 0, "tie": 0}
    for *_, r in rows:
        counts[classify(r, threshold)] += 1
    g = geomean([r for *_, r in rows]) if rows else math.nan
    return MetricSummary(name, rows, g, counts["win"], counts["loss"], counts["tie"])


def aggregate(records: Sequence[PipelineRecord], threshold: float = WIN_THRESHOLD
              ) -> list[AggregateReport]:
    """One report per treatment ``obj_scale`` found in ``records``."""
    base = {r.instance: r for r in records if r.pipeline == BASELINE}
    scales = sorted({r.obj_scale for r in records if r.pipeline == CORNER})
    reports = []
    for s in scales:
        treat = {r.instance: r for r in records if r.pipeline == CORNER and r.obj_scale == s}
        compared, excluded = [], []
        for inst in sorted(set(base) | set(treat)):
            b, t = base.get(inst), treat.get(inst)
            if b is None or t is None or not b.finished or not t.finished:
                excluded.append(inst)
            else:
                compared.append(inst)
        metrics = {}
        for name, attr in PAIR_METRICS.items():
            rows = []
            for inst in compared:
                before, after = getattr(base[inst], attr), getattr(treat[inst], attr)
                floor = TIME_FLOOR if attr.endswith("_time") else COUNT_FLOOR
                rows.append((inst, before, after, ratio(after, before, floor)))
            metrics[name] = _summary(name, rows, threshold)
        ran = [i for i in compared if treat[i].corner_status]
        iter_rows = [(i, treat[i].pdhg_iters, treat[i].corner_iters,
                      ratio(treat[i].corner_iters, treat[i].pdhg_iters)) for i in ran]
        reports.append(AggregateReport(
            obj_scale=s,
            compared=compared,
            excluded=excluded,
            metrics=metrics,
            corner_iteration_ratio=_summary("corner_iteration_ratio", iter_rows, threshold)
            if iter_rows else None,
            baseline_time_sgm=shifted_geomean([base[i].total_time for i in compared])
            if compared else math.nan,
            corner_time_sgm=shifted_geomean([treat[i].total_time for i in compared])
            if compared else math.nan,
        ))
    return reports


def _f(v: float, digits: int = 4) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return f"{v:.{digits}g}"


def _ratio_csv(summary: MetricSummary, scale: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["obj_scale", "instance", "before", "after", "ratio"])
    for inst, before, after, r in sorted(summary.ratios, key=lambda t: (t[3], t[0])):
        w.writerow([repr(float(scale)), inst, _cell(before), _cell(after), repr(float(r))])
    return buf.getvalue()


def emit_report(records: Sequence[PipelineRecord],
                trajectories: Optional[dict] = None) -> dict[str, str]:
    """Report files as ``{filename: text}``; a pure function of the inputs.

    ``summary.md`` holds the performance-ratio / wins / losses table plus
    ratio geomeans. Each ``*_ratio.csv`` lists per-instance ratios sorted
    ascending (bar-chart order). ``off_bound_trajectory.csv`` is written when
    corner-push trajectories are supplied.
    """
    if not records:
        raise ValueError("emit_report needs at least one record")
    reports = aggregate(records)
    files: dict[str, str] = {}
    md = ["# Corner push benchmark", ""]
    instances = sorted({r.instance for r in records})
    md.append(f"Instances: {len(instances)}. Shifted geometric means use a shift of "
              f"{SHIFT_SECONDS:g} s; wins/losses use a {WIN_THRESHOLD:.0%} threshold.")
    md.append("")
    if reports:
        header = "| | baseline | " + " | ".join(f"corner (obj_scale={r.obj_scale:g})"
                                                 for r in reports) + " |"
        md += [header, "|---|---|" + "---|" * len(reports)]
        md.append("| Performance Ratio | 1 | " + " | ".join(_f(r.performance_ratio)
                                                         for r in reports) + " |")
        tt = [r.metrics["total_time_ratio"] for r in reports]
        md.append("| Wins | - | " + " | ".join(str(t.wins) for t in tt) + " |")
        md.append("| Losses | - | " + " | ".join(str(t.losses) for t in tt) + " |")
        md.append("| Ties | - | " + " | ".join(str(t.ties) for t in tt) + " |")
        md.append("| Compared | - | " + " | ".join(str(len(r.compared)) for r in reports) + " |")
        md.append("| Excluded | - | " + " | ".join(str(len(r.excluded)) for r in reports) + " |")
        md.append("")
        md += ["## Ratio geometric means (after / before)", "",
               "| metric | " + " | ".join(f"obj_scale={r.obj_scale:g}" for r in reports) + " |",
               "|---|" + "---|" * len(reports)]
        for name in list(PAIR_METRICS) + ["corner_iteration_ratio"]:
            cells = []
            for r in reports:
                s = r.corner_iteration_ratio if name == "corner_iteration_ratio" else r.metrics[name]
                cells.append(_f(s.geomean) if s is not None else "n/a")
            md.append(f"| {name} | " + " | ".join(cells) + " |")
        md.append("")
        for r in reports:
            if r.excluded:
                md.append(f"Excluded at obj_scale={r.obj_scale:g} (limit or failure): "
                          + ", ".join(r.excluded))
        for name in list(PAIR_METRICS) + ["corner_iteration_ratio"]:
            parts = []
            for r in reports:
                s = r.corner_iteration_ratio if name == "corner_iteration_ratio" else r.metrics[name]
                if s is not None:
                    parts.append(_ratio_csv(s, r.obj_scale))
            if parts:
                files[f"{name}.csv"] = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    else:
        md.append("No treatment records; nothing to compare.")
    files["summary.md"] = "\n".join(md).rstrip() + "\n"
    summary = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "instances": instances,
        "reports": [
            {
                "obj_scale": r.obj_scale,
                "compared": r.compared,
                "excluded": r.excluded,
                "performance_ratio": r.performance_ratio if r.compared else None,
                "metrics": {
                    k: {"geomean": v.geomean if v.count else None, "wins": v.wins,
                        "losses": v.losses, "ties": v.ties, "count": v.count}
                    for k, v in list(r.metrics.items())
                    + ([("corner_iteration_ratio", r.corner_iteration_ratio)]
                       if r.corner_iteration_ratio else [])
                },
            }
            for r in reports
        ],
    }
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if trajectories:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "obj_scale", "iteration", "off_bound_count", "primal_residual"])
        for (inst, scale) in sorted(trajectories):
            for k, count, pres in trajectories[(inst, scale)]:
                w.writerow([inst, repr(float(scale)), k, count, repr(float(pres))])
        files["off_bound_trajectory.csv"] = buf.getvalue()
    return files


def write_report(files: dict[str, str], out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# running


@dataclass
class BenchConfig:
    """Harness settings; ``time_limit`` applies to each PDHG phase."""

    eps_rel: float = 1e-6
    eps_abs: float = 1e-6
    time_limit: float = 120.0
    max_iters: int = 200_000
    corner_enabled: bool = True
    obj_scales: tuple = (1.0,)
    seed: int = 0
    jobs: int = 1
    row_mult: float = 2.0
    abs_floor: int = 50
    keep_trajectories: bool = True

    def __post_init__(self):
        self.obj_scales = tuple(float(s) for s in self.obj_scales)
        if not self.obj_scales or any(s <= 0 for s in self.obj_scales):
            raise ValueError("obj_scales must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class InstanceRef:
    """A suite entry: a generator spec, a model file, or an in-memory model."""

    id: str
    spec: Optional[GenSpec] = None
    path: Optional[str] = None
    lp: Optional[LinearProgram] = None

    def load(self) -> LinearProgram:
        if self.lp is not None:
            return self.lp
        if self.spec is not None:
            return generate(self.spec)
        return read_model(self.path)


InstanceLike = Union[InstanceRef, GenSpec, str, os.PathLike, LinearProgram]


def as_instance(obj: InstanceLike) -> InstanceRef:
    if isinstance(obj, InstanceRef):
        return obj
    if isinstance(obj, GenSpec):
        return InstanceRef(obj.instance_id, spec=obj)
    if isinstance(obj, LinearProgram):
        if not obj.name:
            raise ValueError("in-memory models need a name to serve as instance id")
        return InstanceRef(obj.name, lp=obj)
    p = os.fspath(obj)
    base = os.path.basename(p)
    return InstanceRef(base.rsplit(".", 1)[0] if "." in base else base, path=p)


def instance_seed(instance_id: str, base_seed: int) -> int:
    """Deterministic per-instance seed, stable across processes and platforms."""
    return (zlib.crc32(instance_id.encode("utf-8")) + 1_000_003 * base_seed) % (2**31 - 1)


@dataclass
class SuiteResult:
    records: list
    reports: list
    trajectories: dict = field(default_factory=dict)


def _crossover_fields(rec: PipelineRecord, xres, lp: LinearProgram):
    # fill counts from the machine-readable phase log
    parsed = [parse_log_line(line) for line in xres.log_lines()]
    by_phase = {p["phase"]: p for p in parsed}
    rec.primal_superbasics = by_phase["construct"]["primal_superbasics"]
    rec.dual_superbasics = by_phase["construct"]["dual_superbasics"]
    rec.dual_pushes = by_phase["dual"]["pushes"]
    rec.primal_pushes = by_phase["primal"]["pushes"]
    rec.cleanup_pivots = by_phase["cleanup"]["pivots"]
    rec.crossover_status = str(by_phase["cleanup"]["status"])
    rec.total_pivots = rec.primal_pushes + rec.dual_pushes + rec.cleanup_pivots
    rec.objective = float(lp.user_objective(xres.x))


def run_instance(ref: InstanceRef, cfg: BenchConfig) -> tuple[list, dict]:
    """Both pipelines on one instance; failures become records, never exceptions."""
    seed = instance_seed(ref.id, cfg.seed)
    base = PipelineRecord(ref.id, BASELINE, seed=seed)
    treat_scales = cfg.obj_scales if cfg.corner_enabled else (cfg.obj_scales[0],)
    trajectories: dict = {}
    try:
        lp = ref.load()
    except Exception as exc:  # noqa: BLE001 - recorded per instance
        base.error = f"load: {exc}"
        return [base] + [dataclasses.replace(base, pipeline=CORNER, obj_scale=s)
                         for s in treat_scales], trajectories
    base.m, base.n = lp.num_rows, lp.num_cols
    tol = Tolerances(eps_rel=cfg.eps_rel, eps_abs=cfg.eps_abs,
                     time_limit_sec=cfg.time_limit, max_iters=cfg.max_iters)
    xcfg = CrossoverConfig(eps_abs=cfg.eps_abs)
    t = time.perf_counter()
    try:
        pres = solve_pdhg(lp, PdhgConfig(tol=tol, seed=seed))
    except Exception as exc:  # noqa: BLE001
        base.error = f"pdhg: {exc}"
        base.pdhg_time = base.total_time = time.perf_counter() - t
        return [base] + [dataclasses.replace(base, pipeline=CORNER, obj_scale=s)
                         for s in treat_scales], trajectories
    base.pdhg_time = time.perf_counter() - t
    base.pdhg_status = pres.status.value
    base.pdhg_iters = pres.iterations
    est = estimate_pushes(lp, pres.iterate, cfg.eps_abs)
    base.est_primal_pushes, base.est_dual_pushes = est.est_primal_pushes, est.est_dual_pushes
    base.candidate = bool(is_corner_push_candidate(lp, pres.iterate, cfg.eps_abs,
                                                   cfg.row_mult, cfg.abs_floor))
    base.off_bound_before = base.off_bound_after = off_bound_count(lp, pres.iterate.x, cfg.eps_abs)
    t = time.perf_counter()
    try:
        xres = run_crossover(lp, pres.iterate, xcfg)
        base.crossover_time = time.perf_counter() - t
        _crossover_fields(base, xres, lp)
    except Exception as exc:  # noqa: BLE001
        base.crossover_time = time.perf_counter() - t
        base.error = f"crossover: {exc}"
    base.total_time = base.pdhg_time + base.corner_time + base.crossover_time
    records = [base]
    if not cfg.corner_enabled:
        # identical arm: reuse the baseline outcome
        records.append(dataclasses.replace(base, pipeline=CORNER, obj_scale=treat_scales[0]))
        return records, trajectories
    for s in treat_scales:
        rec = dataclasses.replace(base, pipeline=CORNER, obj_scale=s, crossover_time=0.0,
                                  corner_time=0.0, error="", crossover_status="",
                                  primal_pushes=0, dual_pushes=0, cleanup_pivots=0,
                                  total_pivots=0, primal_superbasics=0, dual_superbasics=0,
                                  objective=math.nan)
        if not pres.converged:
            rec.error = "pdhg did not converge"
            rec.total_time = rec.pdhg_time
            records.append(rec)
            continue
        t = time.perf_counter()
        try:
            cres = run_corner_push(lp, pres, CornerPushConfig(
                eps_abs=cfg.eps_abs, eps_rel=cfg.eps_rel, obj_scale=s, seed=seed,
                max_iters=cfg.max_iters, time_limit_sec=cfg.time_limit))
            rec.corner_time = time.perf_counter() - t
            rec.corner_status = cres.status.value
            rec.corner_iters = cres.iterations
            rec.off_bound_after = cres.off_bound_after
            if cfg.keep_trajectories:
                trajectories[(ref.id, s)] = cres.trajectory
            t = time.perf_counter()
            xres = run_crossover(lp, cres.iterate, xcfg)
            rec.crossover_time = time.perf_counter() - t
            _crossover_fields(rec, xres, lp)
        except Exception as exc:  # noqa: BLE001
            elapsed = time.perf_counter() - t
            if rec.corner_status:
                rec.crossover_time = elapsed
            else:
                rec.corner_time = elapsed
            rec.error = f"{type(exc).__name__}: {exc}"
        rec.total_time = rec.pdhg_time + rec.corner_time + rec.crossover_time
        records.append(rec)
    return records, trajectories


def _worker(args):
    ref, cfg = args
    return run_instance(ref, cfg)


def _sort_key(r: PipelineRecord):
    return (r.instance, r.pipeline != BASELINE, r.obj_scale)


def run_suite(instances: Sequence[InstanceLike], cfg: Optional[BenchConfig] = None,
              out_dir=None) -> SuiteResult:
    """Run both pipelines on every instance.

    With ``out_dir`` set, ``records.csv`` and ``summary.json`` are written
    there. Record order does not depend on ``jobs``.
    """
    cfg = cfg or BenchConfig()
    refs = [as_instance(i) for i in instances]
    ids = [r.id for r in refs]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids must be unique")
    tasks = [(r, cfg) for r in refs]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_worker, tasks))
    else:
        results = [_worker(t) for t in tasks]
    records, trajectories = [], {}
    for recs, traj in results:
        records.extend(recs)
        trajectories.update(traj)
    records.sort(key=_sort_key)
    for r in records:
        r.check()
    reports = aggregate(records)
    result = SuiteResult(records, reports, trajectories)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_records(records, os.path.join(out_dir, "records.csv"))
        files = emit_report(records, trajectories)
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            fh.write(files["summary.json"])
    return result
