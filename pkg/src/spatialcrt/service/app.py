"""HTTP service exposing design calculators, trial simulation, model fits,
and operating-characteristic studies (blocking or as background jobs)."""

from __future__ import annotations

import io

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..datagen import generate_trial
from ..design import (
    DesignTarget,
    ScenarioConfig,
    design_effect,
    icc_from_components,
    required_clusters,
    scenario_by_label,
    scenario_table,
    variance_partition,
)
from ..inference import ModelKind, credible_interval, fit, prob_exceeds
from ..opchar import DecisionRule, OpCharSummary, decide
from ..study import (
    StudyConfig,
    export_plotdata,
    run_study,
    summarize_rows,
    _parse_csv,
    _rows_to_csv,
)
from . import schemas
from .jobs import JobStore


def _resolve_scenario(spec, theta, seed) -> ScenarioConfig:
    cfg = scenario_by_label(spec) if isinstance(spec, str) else ScenarioConfig.from_dict(spec)
    if theta is not None:
        cfg = cfg.with_theta(theta)
    if seed:
        cfg = ScenarioConfig.from_dict({**cfg.to_dict(), "seed": seed})
    return cfg


def create_app() -> FastAPI:
    app = FastAPI(title="spatialcrt", version=__version__)
    jobs = JobStore()

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/design/required-clusters",
              response_model=schemas.RequiredClustersResponse)
    def design_required_clusters(req: schemas.RequiredClustersRequest):
        try:
            target = DesignTarget(theta=req.theta, power=req.power, alpha=req.alpha,
                                  m=req.m, icc=req.icc)
            res = required_clusters(target, req.sigma_w2)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"n_per_arm": res.n_per_arm, "total_raw": res.total_raw,
                "total_even": res.total_even}

    @app.post("/design/variance-partition",
              response_model=schemas.VariancePartitionResponse)
    def design_variance_partition(req: schemas.VariancePartitionRequest):
        try:
            vc = variance_partition(req.icc, req.f, req.sigma_w2)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"sigma_w2": vc.sigma_w2, "sigma_b2": vc.sigma_b2, "tau2": vc.tau2,
                "icc": icc_from_components(vc)}

    @app.post("/design/design-effect", response_model=schemas.DesignEffectResponse)
    def design_design_effect(req: schemas.DesignEffectRequest):
        try:
            return {"deff": design_effect(req.m, req.icc)}
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/design/scenarios", response_model=list[schemas.ScenarioModel])
    def design_scenarios():
        return [cfg.to_dict() for cfg in scenario_table()]

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        try:
            cfg = _resolve_scenario(req.scenario, req.theta, req.seed)
            trial = generate_trial(cfg, cfg.seed, include_latent=req.include_latent)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"scenario": cfg.label, "theta": cfg.theta, "seed": cfg.seed,
                "n": trial.n, "n_clusters": trial.n_clusters,
                "csv": trial.to_csv(include_latent=req.include_latent)}

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit_models(req: schemas.FitRequest):
        try:
            cfg = _resolve_scenario(req.scenario, req.theta, req.seed)
            trial = generate_trial(cfg, cfg.seed)
            rule = DecisionRule(delta=req.delta, threshold=req.threshold)
            fits = []
            for name in req.models:
                result = fit(ModelKind(name), trial)
                prob = prob_exceeds(result.effect, rule.delta)
                lo, hi = credible_interval(result.effect, 0.95)
                diag = result.diagnostics()
                fits.append({
                    "model": name, "post_mean": result.post_mean,
                    "post_sd": result.post_sd, "prob_exceeds": prob,
                    "ci_lo": lo, "ci_hi": hi, "rejected": decide(prob, rule),
                    "hyper_mode": diag["hyper_mode"],
                    "n_grid_points": diag["n_grid_points"],
                    "mode_loglik": diag["mode_loglik"],
                    "components": diag["components"],
                })
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"scenario": cfg.label, "theta": cfg.theta, "seed": cfg.seed,
                "fits": fits}

    @app.post("/studies/run", response_model=schemas.StudyRunResponse)
    def studies_run(req: schemas.StudyRunRequest):
        config = StudyConfig.from_dict(req.config.model_dump())
        try:
            result = run_study(config, req.out_dir, threads=req.threads,
                               resume=req.resume)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"out_dir": str(result.out_dir), "n_rows": result.n_rows,
                "summaries": [s.to_dict() for s in result.summaries]}

    @app.post("/studies", response_model=schemas.JobSubmitResponse, status_code=202)
    def studies_submit(req: schemas.StudyRunRequest):
        config = StudyConfig.from_dict(req.config.model_dump())
        job_id = jobs.submit(config, req.out_dir, threads=req.threads)
        return {"job_id": job_id}

    def _job_or_404(job_id: str):
        try:
            return jobs.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")

    @app.get("/studies/{job_id}", response_model=schemas.JobStatusResponse)
    def studies_status(job_id: str):
        job = _job_or_404(job_id)
        return {"job_id": job.job_id, "status": job.status,
                "done_replicates": job.done_replicates,
                "total_replicates": job.total_replicates,
                "error": job.error, "out_dir": job.out_dir}

    @app.get("/studies/{job_id}/summaries",
             response_model=schemas.SummarizeResponse)
    def studies_summaries(job_id: str):
        job = _job_or_404(job_id)
        if job.status != "done":
            raise HTTPException(status_code=409, detail=f"job is {job.status}")
        return {"summaries": [s.to_dict() for s in job.result.summaries]}

    @app.get("/studies/{job_id}/replicates", response_class=PlainTextResponse)
    def studies_replicates(job_id: str):
        job = _job_or_404(job_id)
        if job.status != "done":
            raise HTTPException(status_code=409, detail=f"job is {job.status}")
        return job.result.replicates_path.read_text()

    @app.post("/summarize", response_model=schemas.SummarizeResponse)
    def summarize_csv(req: schemas.SummarizeRequest):
        try:
            rows = _parse_csv(req.replicates_csv)
            summaries = summarize_rows(rows, modse_aggregator=req.modse_aggregator)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"summaries": [s.to_dict() for s in summaries]}

    @app.post("/plotdata", response_model=schemas.PlotDataResponse)
    def plotdata(req: schemas.PlotDataRequest):
        summaries = [OpCharSummary.from_dict(s.model_dump()) for s in req.summaries]
        rows = export_plotdata(summaries, req.kind)
        cols = ["scenario", "model", "theta", "value", "mc_se"]
        return {"csv": _rows_to_csv(rows, cols)}

    return app


app = create_app()
