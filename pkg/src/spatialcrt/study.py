"""Operating-characteristic study engine.

Runs (scenario x theta x replicate) cells, fits the requested models to each
simulated trial, applies the decision rule, and persists per-replicate rows
(CSV) plus cell summaries (JSON). Replicate seeds derive from
(study seed, scenario label, theta index, replicate index) through a
SeedSequence, so output is bit-identical for a fixed config regardless of
worker count or scheduling; completed chunks are cached on disk and reused
when a study is re-run into the same directory.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .datagen import GenerationError, generate_trial
from .design import ScenarioConfig, scenario_by_label
from .gaussian import NotPositiveDefiniteError
from .inference import InferenceError, ModelKind, credible_interval, fit, prob_exceeds
from .opchar import DecisionRule, OpCharSummary, ReplicateResult, decide, summarize
from .priors import PriorSpec

SCHEMA_VERSION = 1
CHUNK_SIZE = 25

REPLICATE_COLUMNS = [
    "scenario", "theta_true", "model", "replicate", "seed", "post_mean",
    "post_sd", "prob_exceeds", "ci_lo", "ci_hi", "rejected", "covered", "error",
]
TIMING_COLUMNS = ["scenario", "theta_true", "model", "replicate", "fit_wall_time"]

_BLAS_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass(frozen=True)
class StudyConfig:
    """Full description of one operating-characteristic study.

    ``priors`` optionally overrides the stock prior settings: a mapping from
    model name (or "default") to a serialized PriorSpec; models without an
    entry keep their built-in priors.
    """

    scenarios: list = field(default_factory=lambda: ["A"])  # labels or config dicts
    theta_grid: list = field(default_factory=lambda: [0.0, 0.6])
    models: list = field(default_factory=lambda: [m.value for m in ModelKind])
    reps: int = 100
    seed: int = 0
    threshold: float = 0.95
    delta: float = 0.0
    modse_aggregator: str = "mean"
    priors: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be positive, got {self.reps}")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        for m in self.models:
            ModelKind(m)
        if self.priors is not None:
            for key, spec in self.priors.items():
                if key != "default":
                    ModelKind(key)
                PriorSpec.from_dict(spec)

    def resolved_scenarios(self) -> list[ScenarioConfig]:
        out = []
        for s in self.scenarios:
            if isinstance(s, str):
                out.append(scenario_by_label(s))
            elif isinstance(s, ScenarioConfig):
                out.append(s)
            else:
                out.append(ScenarioConfig.from_dict(s))
        return out

    def rule(self) -> DecisionRule:
        return DecisionRule(delta=self.delta, threshold=self.threshold)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "scenarios": [s if isinstance(s, str) else
                          (s.to_dict() if isinstance(s, ScenarioConfig) else dict(s))
                          for s in self.scenarios],
            "theta_grid": [float(t) for t in self.theta_grid],
            "models": list(self.models),
            "reps": self.reps,
            "seed": self.seed,
            "threshold": self.threshold,
            "delta": self.delta,
            "modse_aggregator": self.modse_aggregator,
        }
        if self.priors is not None:
            out["priors"] = self.priors
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        return cls(
            scenarios=d.get("scenarios", ["A"]),
            theta_grid=d.get("theta_grid", [0.0, 0.6]),
            models=d.get("models", [m.value for m in ModelKind]),
            reps=int(d.get("reps", 100)),
            seed=int(d.get("seed", 0)),
            threshold=float(d.get("threshold", 0.95)),
            delta=float(d.get("delta", 0.0)),
            modse_aggregator=d.get("modse_aggregator", "mean"),
            priors=d.get("priors"),
            schema_version=int(d.get("schema_version", SCHEMA_VERSION)),
        )

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def replicate_seed(study_seed: int, scenario_label: str, theta_index: int,
                   replicate: int) -> int:
    """Stable per-replicate seed; rng = default_rng(seed) reproduces the trial."""
    label_hash = int.from_bytes(
        hashlib.sha256(scenario_label.encode()).digest()[:8], "big")
    ss = np.random.SeedSequence([study_seed, label_hash, theta_index, replicate])
    return int(ss.generate_state(1, np.uint64)[0])


def _fit_one(model: ModelKind, trial, rule: DecisionRule, theta: float,
             priors: PriorSpec | None = None):
    """Fit a model and score it under the rule; returns result fields + time."""
    t0 = time.perf_counter()
    result = fit(model, trial, priors)
    wall = time.perf_counter() - t0
    prob = prob_exceeds(result.effect, rule.delta)
    lo, hi = credible_interval(result.effect, 0.95)
    return {
        "post_mean": result.post_mean, "post_sd": result.post_sd,
        "prob_exceeds": prob, "ci_lo": lo, "ci_hi": hi,
        "rejected": decide(prob, rule), "covered": lo <= theta <= hi,
        "fit_wall_time": wall,
    }


def _run_chunk(scenario_dict: dict, theta: float, theta_index: int,
               rep_start: int, rep_end: int, models: list[str],
               threshold: float, delta: float, study_seed: int,
               priors: dict | None = None) -> list[dict]:
    """Worker body: one block of replicates of one (scenario, theta) cell."""
    cfg = ScenarioConfig.from_dict(scenario_dict).with_theta(theta)
    rule = DecisionRule(delta=delta, threshold=threshold)
    prior_map = {m: None for m in models}
    if priors is not None:
        for m in models:
            spec = priors.get(m, priors.get("default"))
            prior_map[m] = PriorSpec.from_dict(spec) if spec is not None else None
    rows = []
    for rep in range(rep_start, rep_end):
        seed = replicate_seed(study_seed, cfg.label, theta_index, rep)
        trial = None
        gen_error = None
        try:
            trial = generate_trial(cfg, seed)
        except (GenerationError, NotPositiveDefiniteError) as exc:
            gen_error = type(exc).__name__
        for model_name in models:
            base = {"scenario": cfg.label, "theta_true": theta,
                    "model": model_name, "replicate": rep, "seed": seed}
            if gen_error is not None:
                rows.append({**base, "error": gen_error, "fit_wall_time": 0.0})
                continue
            try:
                rows.append({**base, "error": None,
                             **_fit_one(ModelKind(model_name), trial, rule, theta,
                                        prior_map[model_name])})
            except (InferenceError, NotPositiveDefiniteError, ValueError) as exc:
                rows.append({**base, "error": type(exc).__name__,
                             "fit_wall_time": 0.0})
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _parse_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        row: dict = {}
        for key, val in rec.items():
            if key in ("scenario", "model"):
                row[key] = val
            elif key == "error":
                row[key] = val or None
            elif key in ("replicate", "seed"):
                row[key] = int(val)
            elif key in ("rejected", "covered"):
                row[key] = None if val == "" else val == "1"
            else:
                row[key] = math.nan if val == "" else float(val)
        out.append(row)
    return out


@dataclass(frozen=True)
class StudyResult:
    out_dir: Path
    replicates_path: Path
    timings_path: Path
    summaries_path: Path
    summaries: list[OpCharSummary]
    n_rows: int


def run_study(config: StudyConfig, out_dir, threads: int | None = None,
              progress=None, resume: bool = True) -> StudyResult:
    """Run a study and persist results under out_dir.

    ``threads`` > 1 distributes replicate chunks over a process pool; output
    bytes are identical for any worker count. With ``resume`` (default) any
    chunk files already present from an earlier run of the *same* config are
    reused instead of recomputed.
    """
    out_dir = Path(out_dir)
    chunks_dir = out_dir / "chunks"
    chunks_dir.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    digest_path = out_dir / "config_digest.txt"
    if digest_path.exists() and digest_path.read_text().strip() != digest:
        if resume:
            raise ValueError(
                f"{out_dir} holds results for a different study config; "
                "pass resume=False or use a fresh directory")
        for old in chunks_dir.glob("chunk_*.csv"):
            old.unlink()
    digest_path.write_text(digest + "\n")
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")

    scenarios = config.resolved_scenarios()
    tasks = []  # (sort_key, chunk_path, args)
    for s_idx, scen in enumerate(scenarios):
        for t_idx, theta in enumerate(config.theta_grid):
            for start in range(0, config.reps, CHUNK_SIZE):
                end = min(start + CHUNK_SIZE, config.reps)
                name = f"chunk_{scen.label}_{t_idx:03d}_{start:06d}.csv"
                args = (scen.to_dict(), float(theta), t_idx, start, end,
                        list(config.models), config.threshold, config.delta,
                        config.seed, config.priors)
                tasks.append(((s_idx, t_idx, start), chunks_dir / name, args))

    total_reps = len(scenarios) * len(config.theta_grid) * config.reps
    done_reps = 0
    pending = []
    for key, path, args in tasks:
        if resume and path.exists():
            done_reps += args[4] - args[3]
        else:
            pending.append((key, path, args))
    if progress:
        progress(done_reps, total_reps)

    if threads is None:
        threads = int(os.environ.get("SPATIALCRT_THREADS", "0")) or (os.cpu_count() or 1)
    if threads <= 1 or not pending:
        for _, path, args in pending:
            rows = _run_chunk(*args)
            _write_atomic(path, _rows_to_csv(rows, REPLICATE_COLUMNS + ["fit_wall_time"]))
            done_reps += args[4] - args[3]
            if progress:
                progress(done_reps, total_reps)
    else:
        # Children inherit the environment at spawn: cap BLAS threads so the
        # pool scales by replicates instead of oversubscribing cores.
        previous = {v: os.environ.get(v) for v in _BLAS_ENV_VARS}
        for v in _BLAS_ENV_VARS:
            os.environ.setdefault(v, "1")
        try:
            ctx = get_context("spawn")
            with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
                futures = {pool.submit(_run_chunk, *args): (path, args)
                           for _, path, args in pending}
                for fut in as_completed(futures):
                    path, args = futures[fut]
                    rows = fut.result()
                    _write_atomic(path, _rows_to_csv(rows, REPLICATE_COLUMNS
                                                     + ["fit_wall_time"]))
                    done_reps += args[4] - args[3]
                    if progress:
                        progress(done_reps, total_reps)
        finally:
            for v, old in previous.items():
                if old is None:
                    os.environ.pop(v, None)
                else:
                    os.environ[v] = old

    # Deterministic merge: chunk order by (scenario, theta, replicate), row
    # order inside a chunk by (replicate, model position).
    model_order = {m: i for i, m in enumerate(config.models)}
    all_rows: list[dict] = []
    for key, path, _ in tasks:
        rows = _parse_csv(path.read_text())
        rows.sort(key=lambda r: (r["replicate"], model_order[r["model"]]))
        all_rows.extend(rows)

    replicates_path = out_dir / "replicates.csv"
    _write_atomic(replicates_path, _rows_to_csv(all_rows, REPLICATE_COLUMNS))
    timings_path = out_dir / "timings.csv"
    _write_atomic(timings_path, _rows_to_csv(all_rows, TIMING_COLUMNS))

    summaries = summarize_rows(all_rows, modse_aggregator=config.modse_aggregator)
    summaries_path = out_dir / "summaries.json"
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "summaries": [s.to_dict() for s in summaries],
    }
    _write_atomic(summaries_path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return StudyResult(out_dir=out_dir, replicates_path=replicates_path,
                       timings_path=timings_path, summaries_path=summaries_path,
                       summaries=summaries, n_rows=len(all_rows))


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def summarize_rows(rows: list[dict], modse_aggregator: str = "mean") -> list[OpCharSummary]:
    """Group per-replicate rows into per-cell summaries, preserving row order."""
    cells: dict[tuple, list[ReplicateResult]] = {}
    order: list[tuple] = []
    for r in rows:
        key = (r["scenario"], r["theta_true"], r["model"])
        if key not in cells:
            cells[key] = []
            order.append(key)
        cells[key].append(ReplicateResult(
            scenario=r["scenario"], theta_true=r["theta_true"],
            model=ModelKind(r["model"]), replicate=r["replicate"], seed=r["seed"],
            post_mean=r.get("post_mean", math.nan),
            post_sd=r.get("post_sd", math.nan),
            prob_exceeds=r.get("prob_exceeds", math.nan),
            ci_lo=r.get("ci_lo", math.nan), ci_hi=r.get("ci_hi", math.nan),
            rejected=bool(r.get("rejected")) if r.get("rejected") is not None else False,
            covered=bool(r.get("covered")) if r.get("covered") is not None else False,
            fit_wall_time=r.get("fit_wall_time", 0.0) or 0.0,
            error=r.get("error"),
        ))
    return [summarize(cells[key], key[1], modse_aggregator) for key in order]


def read_replicates(path) -> list[dict]:
    """Load a replicates.csv written by run_study."""
    return _parse_csv(Path(path).read_text())


def read_summaries(path) -> list[OpCharSummary]:
    payload = json.loads(Path(path).read_text())
    return [OpCharSummary.from_dict(d) for d in payload["summaries"]]


PLOT_KINDS = ("power", "fpr", "pct_re", "bias", "mse", "coverage")


def export_plotdata(summaries: list[OpCharSummary], kind: str) -> list[dict]:
    """Long-format rows (scenario, model, theta, value, mc_se) for one metric.

    ``power`` exports the rejection rate at every theta (at theta = 0 that is
    the false positive rate); ``fpr`` keeps only the theta = 0 rows. The
    mc_se column is exact binomial for rate metrics and a large-sample
    approximation for the others.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}, expected one of {PLOT_KINDS}")
    rows = []
    for s in summaries:
        if kind == "fpr" and s.theta_true != 0.0:
            continue
        if kind in ("power", "fpr"):
            value, mc_se = s.rejection_rate, s.mc_se_rejection
        elif kind == "pct_re":
            value = s.pct_re
            mc_se = abs(s.mod_se / s.emp_se) * 100.0 / math.sqrt(2.0 * (s.n_reps - 1))
        elif kind == "bias":
            value, mc_se = s.bias, s.emp_se / math.sqrt(s.n_reps)
        elif kind == "mse":
            value, mc_se = s.mse, s.mse * math.sqrt(2.0 / s.n_reps)
        else:
            value = s.coverage
            mc_se = math.sqrt(s.coverage * (1.0 - s.coverage) / s.n_reps)
        rows.append({"scenario": s.scenario, "model": s.model.value,
                     "theta": s.theta_true, "value": value, "mc_se": mc_se})
    return rows


def write_plotdata(rows: list[dict], path):
    cols = ["scenario", "model", "theta", "value", "mc_se"]
    Path(path).write_text(_rows_to_csv(rows, cols))


def read_plotdata(path) -> list[dict]:
    out = []
    for rec in csv.DictReader(io.StringIO(Path(path).read_text())):
        out.append({"scenario": rec["scenario"], "model": rec["model"],
                    "theta": float(rec["theta"]), "value": float(rec["value"]),
                    "mc_se": float(rec["mc_se"])})
    return out
