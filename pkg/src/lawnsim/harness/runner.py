"""Seeded Monte Carlo runner, result tables and summaries."""
from __future__ import annotations

import csv
import dataclasses
import datetime
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Iterable

import lawnsim
from lawnsim.delivery import DelayParams, run_delivery_experiment
from lawnsim.errors import ConfigError, ContractError, DomainError
from lawnsim.exttarget import run_exttarget_trial
from lawnsim.harness.config import Case, ExperimentSpec
from lawnsim.scenario import generate_scenario
from lawnsim.selection import (SelectionMethod, select_brute_force, select_none,
                               select_topology_aware, select_user_centric)
from lawnsim.topology import build_graph, calibrate_threshold

COLUMNS: dict[Case, tuple[str, ...]] = {
    Case.SELECTION: ("seed", "method", "n_active_users", "sum_se", "sensing_sinr_db",
                     "wpt_energy_j", "scalar_objective"),
    Case.DELIVERY: ("seed", "threshold_db", "method", "n_trials", "success_rate",
                    "mean_delay_ms", "median_delay_ms", "mean_hops"),
    Case.EXTTARGET: ("seed", "n_points", "n_skipped", "center_err_m", "mean_radial_err_m",
                     "max_radial_err_m", "rel_mean_err"),
}
TEXT_COLUMNS = {"method"}
META_KEYS = ("case", "spec_hash", "version", "timestamp")

# Fraction of the mean true radius below which an ExtTarget seed counts as accurate.
CONTOUR_REL_BOUND = 0.10


@dataclass
class ResultTable:
    case: Case
    rows: list[dict[str, Any]]
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS[self.case]

    def column(self, name: str, method: str | None = None) -> list:
        return [r[name] for r in self.rows if method is None or r.get("method") == method]

    def methods(self) -> list[str]:
        out = []
        for r in self.rows:
            if "method" in r and r["method"] not in out:
                out.append(r["method"])
        return out

    def to_csv(self, include_timestamp: bool = True) -> str:
        """CSV text with ``# key=value`` metadata lines ahead of the header.

        Floats are written with repr() so a table reads back bit-exactly.
        """
        buf = io.StringIO()
        for key in META_KEYS:
            if key in self.metadata and (include_timestamp or key != "timestamp"):
                buf.write(f"# {key}={self.metadata[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def from_csv(cls, text: str) -> ResultTable:
        meta = {}
        lines = text.splitlines()
        while lines and lines[0].startswith("#"):
            key, _, value = lines.pop(0)[1:].strip().partition("=")
            meta[key] = value
        reader = csv.DictReader(lines)
        header = tuple(reader.fieldnames or ())
        case = next((c for c, cols in COLUMNS.items() if cols == header), None)
        if case is None:
            raise ConfigError(f"unrecognised table columns {list(header)}")
        if "case" in meta and meta["case"] != case.value:
            raise ConfigError(f"table metadata says {meta['case']} but columns are {case.value}")
        rows = [{k: (v if k in TEXT_COLUMNS else _parse(v)) for k, v in r.items()}
                for r in reader]
        return cls(case, rows, meta)

    @classmethod
    def read(cls, path: str | Path) -> ResultTable:
        try:
            return cls.from_csv(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass
class SeedResult:
    """Everything one seed produced: table rows plus optional detail records."""
    seed: int
    rows: list[dict[str, Any]]
    delays: list[tuple[int, str, float]] = field(default_factory=list)
    trials_jsonl: str = ""
    overlay: dict | None = None


def _threshold(spec: ExperimentSpec, scenario) -> float:
    if spec.threshold_db == "auto":
        return calibrate_threshold(scenario, spec.channel, spec.target_mean_degree)
    return float(spec.threshold_db)


def _selection_rows(spec: ExperimentSpec, seed: int) -> SeedResult:
    blk = spec.block
    scen = generate_scenario(dataclasses.replace(spec.scenario, seed=seed))
    graph = build_graph(scen, spec.channel, _threshold(spec, scen))
    results = [select_none(graph, blk.weights, spec.channel),
               select_user_centric(graph, spec.channel, blk.qos_floor_db, blk.weights),
               select_topology_aware(graph, blk.weights, spec.channel)]
    if blk.brute_force:
        results.append(select_brute_force(graph, blk.weights, spec.channel, blk.max_users))
    rows = [{"seed": seed, "method": r.method.value, "n_active_users": r.n_active_users,
             "sum_se": r.sum_se, "sensing_sinr_db": r.sensing_sinr_db,
             "wpt_energy_j": r.wpt_energy_j, "scalar_objective": r.scalar_objective}
            for r in results]
    return SeedResult(seed, rows)


def _delivery_rows(spec: ExperimentSpec, seed: int) -> SeedResult:
    blk = spec.block
    scen = generate_scenario(dataclasses.replace(spec.scenario, seed=seed))
    threshold = _threshold(spec, scen)
    report = run_delivery_experiment(scen, spec.channel, threshold, blk.n_trials, seed,
                                     DelayParams(blk.t_proc_s))
    rows = [{"seed": seed, "threshold_db": threshold, **row} for row in report.rows()]
    delays = [(i, m.value, o.delay_s * 1e3)
              for i, outs in enumerate(report.trials) for m, o in outs.items() if o.success]
    return SeedResult(seed, rows, delays, report.trial_jsonl() if blk.write_trials else "")


def _exttarget_rows(spec: ExperimentSpec, seed: int) -> SeedResult:
    out = run_exttarget_trial(spec.block, seed)
    return SeedResult(seed, [out.as_row()], overlay=overlay_record(out))


def overlay_record(outcome) -> dict:
    """JSON-ready geometry for the contour overlay plot and contour CSV."""
    t = outcome.target
    theta = outcome.contour.theta_grid
    truth = [t.radius_along((outcome.center_hat.x, outcome.center_hat.y), float(a))
             for a in theta]
    return {
        "seed": outcome.seed,
        "target": {"center": [t.center.x, t.center.y], "semi_major_m": t.semi_major_m,
                   "semi_minor_m": t.semi_minor_m, "orientation_rad": t.orientation_rad},
        "center_hat": [outcome.center_hat.x, outcome.center_hat.y],
        "reflection_points": [[p.x, p.y] for p in outcome.reflection_points],
        "theta_rad": [float(a) for a in theta],
        "radius_hat_m": [float(r) for r in outcome.contour.radius_hat_m],
        "radius_true_m": [None if r is None else float(r) for r in truth],
    }


_ENGINES = {Case.SELECTION: _selection_rows, Case.DELIVERY: _delivery_rows,
            Case.EXTTARGET: _exttarget_rows}


def run_seed(spec: ExperimentSpec, seed: int) -> SeedResult:
    """Run one seed; engine contract or domain failures name the seed."""
    try:
        return _ENGINES[spec.case](spec, seed)
    except (ContractError, DomainError) as exc:
        raise ContractError(f"seed {seed}: {exc}") from exc


@dataclass
class RunOutput:
    table: ResultTable
    seeds: list[SeedResult]


def run_seeds(spec: ExperimentSpec, jobs: int = 1) -> RunOutput:
    """Run every seed, serially or on ``jobs`` worker processes; results stay in seed order."""
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    work = partial(run_seed, spec)
    if jobs == 1 or spec.n_seeds == 1:
        seeds = [work(s) for s in spec.seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            seeds = list(pool.map(work, spec.seeds,
                                  chunksize=max(1, spec.n_seeds // (4 * jobs))))
    meta = {"case": spec.case.value, "spec_hash": spec.spec_hash(),
            "version": lawnsim.__version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(
                timespec="seconds")}
    rows = [r for s in seeds for r in s.rows]
    return RunOutput(ResultTable(spec.case, rows, meta), seeds)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    return run_seeds(spec, jobs).table


def _stats(values: Iterable[float]) -> dict[str, Any]:
    vals = sorted(float(v) for v in values)
    finite = [v for v in vals if math.isfinite(v)]
    out: dict[str, Any] = {"n": len(vals), "n_nonfinite": len(vals) - len(finite)}
    if finite:
        out.update(mean=statistics.fmean(finite), median=statistics.median(finite),
                   std=statistics.pstdev(finite), min=finite[0], max=finite[-1])
    else:
        out.update(mean=None, median=None, std=None, min=None, max=None)
    return out


def _numeric_columns(table: ResultTable) -> list[str]:
    return [c for c in table.columns if c not in TEXT_COLUMNS and c != "seed"]


def _paired(table: ResultTable, a: str, b: str, col: str) -> list[tuple[float, float]]:
    by_seed: dict[int, dict[str, float]] = {}
    for r in table.rows:
        by_seed.setdefault(r["seed"], {})[r["method"]] = r[col]
    return [(v[a], v[b]) for _, v in sorted(by_seed.items()) if a in v and b in v]


def summarize(table: ResultTable) -> dict[str, Any]:
    """Order-invariant summary: per-column statistics plus case-specific comparisons."""
    if not table.rows:
        raise ContractError("cannot summarise an empty table")
    rows = sorted(table.rows, key=lambda r: (r["seed"], r.get("method", "")))
    table = ResultTable(table.case, rows, table.metadata)
    cols = _numeric_columns(table)
    doc: dict[str, Any] = {
        "case": table.case.value,
        "spec_hash": table.metadata.get("spec_hash"),
        "n_rows": len(rows),
        "n_seeds": len({r["seed"] for r in rows}),
        "columns": {c: _stats(table.column(c)) for c in cols},
    }
    methods = sorted(table.methods())
    if methods:
        doc["by_method"] = {m: {c: _stats(table.column(c, m)) for c in cols} for m in methods}
    if table.case is Case.DELIVERY:
        doc["success_rate"] = {m: statistics.fmean(sorted(table.column("success_rate", m)))
                               for m in methods}
    elif table.case is Case.SELECTION:
        doc["comparisons"] = _selection_comparisons(table)
    else:
        rel = table.column("rel_mean_err")
        doc["contour"] = {"rel_bound": CONTOUR_REL_BOUND,
                          "n_within_bound": sum(v <= CONTOUR_REL_BOUND for v in rel)}
    return doc


def _selection_comparisons(table: ResultTable) -> dict[str, Any]:
    ta = SelectionMethod.TOPOLOGY_AWARE.value
    out: dict[str, Any] = {}
    for other in (SelectionMethod.NO_SELECTION.value, SelectionMethod.USER_CENTRIC.value):
        pairs = _paired(table, ta, other, "scalar_objective")
        if pairs:
            out[f"frac_ta_ge_{other}"] = sum(x >= y for x, y in pairs) / len(pairs)
    bf = SelectionMethod.BRUTE_FORCE.value
    pairs = _paired(table, bf, ta, "scalar_objective")
    if pairs:
        gaps = sorted((b - t) / abs(b) if b != 0 else 0.0 for b, t in pairs)
        out["frac_bf_ge_ta"] = sum(b >= t for b, t in pairs) / len(pairs)
        out["bf_ta_relative_gap"] = _stats(gaps)
    return out


def write_details(out: RunOutput, directory: Path) -> list[Path]:
    """Side files next to table.csv: per-trial delays, optional JSONL, contour CSV."""
    written = []
    case = out.table.case
    if case is Case.DELIVERY:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "trial", "method", "delay_ms"])
        for s in out.seeds:
            for trial, method, d in s.delays:
                w.writerow([s.seed, trial, method, repr(d)])
        written.append(_write(directory / "delays.csv", buf.getvalue()))
        jsonl = "".join(_tag_seed(s.seed, s.trials_jsonl) for s in out.seeds if s.trials_jsonl)
        if jsonl:
            written.append(_write(directory / "trials.jsonl", jsonl))
    elif case is Case.EXTTARGET:
        first = out.seeds[0].overlay
        written.append(_write(directory / "overlay.json", json.dumps(first, indent=1)))
        written.append(_write(directory / "contour.csv", contour_csv(first)))
    return written


def _tag_seed(seed: int, jsonl: str) -> str:
    lines = []
    for line in jsonl.splitlines():
        rec = json.loads(line)
        rec["seed"] = seed
        lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def contour_csv(overlay: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_rad", "radius_hat_m", "radius_true_m"])
    for t, r, rt in zip(overlay["theta_rad"], overlay["radius_hat_m"], overlay["radius_true_m"]):
        w.writerow([repr(t), repr(r), "nan" if rt is None else repr(rt)])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path

