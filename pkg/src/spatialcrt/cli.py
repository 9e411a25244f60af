"""Command-line client for the spatialcrt service.

Each subcommand talks HTTP to a service instance: a remote one when --server
is given, otherwise an in-process ASGI instance of the same app, so the CLI
works standalone while exercising exactly the service surface.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

import httpx


def _client(server: str | None) -> httpx.AsyncClient:
    if server:
        return httpx.AsyncClient(base_url=server, timeout=None)
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    return httpx.AsyncClient(transport=transport, base_url="http://spatialcrt.local",
                             timeout=None)


async def _request(server: str | None, method: str, url: str, **kwargs) -> dict | list:
    async with _client(server) as client:
        resp = await client.request(method, url, **kwargs)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise SystemExit(f"error {resp.status_code}: {detail}")
        return resp.json()


def _call(args, method: str, url: str, **kwargs):
    return asyncio.run(_request(args.server, method, url, **kwargs))


def _emit(payload, out: str | None):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _split_list(values: list[str] | None) -> list[str] | None:
    if not values:
        return None
    out = []
    for v in values:
        out.extend(p for p in v.split(",") if p)
    return out


def cmd_design(args) -> int:
    if args.table:
        _emit(_call(args, "GET", "/design/scenarios"), args.out)
        return 0
    if args.icc is None:
        raise SystemExit("design needs --icc (or --table)")
    partition = _call(args, "POST", "/design/variance-partition",
                      json={"icc": args.icc, "f": args.f, "sigma_w2": args.sigma_w2})
    deff = _call(args, "POST", "/design/design-effect",
                 json={"m": args.m, "icc": args.icc})
    clusters = _call(args, "POST", "/design/required-clusters",
                     json={"theta": args.theta, "power": args.power,
                           "alpha": args.alpha, "m": args.m, "icc": args.icc,
                           "sigma_w2": args.sigma_w2})
    _emit({"variance_partition": partition, "design_effect": deff,
           "required_clusters": clusters}, args.out)
    return 0


def cmd_simulate(args) -> int:
    payload = _call(args, "POST", "/simulate",
                    json={"scenario": args.scenario, "theta": args.theta,
                          "seed": args.seed, "include_latent": args.include_latent})
    if args.out and args.out != "-":
        Path(args.out).write_text(payload["csv"])
        print(f"wrote {payload['n']} rows ({payload['n_clusters']} clusters) "
              f"to {args.out}")
    else:
        sys.stdout.write(payload["csv"])
    return 0


def _study_config(args) -> dict:
    config: dict = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    scenarios = _split_list(args.scenario)
    if scenarios:
        config["scenarios"] = scenarios
    if args.theta_grid:
        config["theta_grid"] = [float(t) for t in _split_list([args.theta_grid])]
    models = _split_list(args.models)
    if models:
        config["models"] = models
    if args.reps is not None:
        config["reps"] = args.reps
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threshold is not None:
        config["threshold"] = args.threshold
    if args.delta is not None:
        config["delta"] = args.delta
    return config


def cmd_study(args) -> int:
    config = _study_config(args)
    threads = args.threads
    if threads is None:
        env = os.environ.get("SPATIALCRT_THREADS")
        threads = int(env) if env else None
    payload = _call(args, "POST", "/studies/run",
                    json={"config": config, "out_dir": args.out,
                          "threads": threads, "resume": not args.fresh})
    print(f"study complete: {payload['n_rows']} replicate rows in {payload['out_dir']}")
    for s in payload["summaries"]:
        print(f"  {s['scenario']} theta={s['theta_true']:g} {s['model']}: "
              f"reject={s['rejection_rate']:.3f} mod_se={s['mod_se']:.3f} "
              f"emp_se={s['emp_se']:.3f} coverage={s['coverage']:.3f}"
              + (" [FLAGGED]" if s["flagged"] else ""))
    return 0


def cmd_summarize(args) -> int:
    csv_text = Path(args.replicates).read_text()
    payload = _call(args, "POST", "/summarize",
                    json={"replicates_csv": csv_text,
                          "modse_aggregator": args.modse})
    _emit(payload, args.out)
    return 0


def cmd_export_plotdata(args) -> int:
    summaries = json.loads(Path(args.summaries).read_text())
    if isinstance(summaries, dict):
        summaries = summaries["summaries"]
    payload = _call(args, "POST", "/plotdata",
                    json={"summaries": summaries, "kind": args.kind})
    if args.out and args.out != "-":
        Path(args.out).write_text(payload["csv"])
        print(f"wrote plot data to {args.out}")
    else:
        sys.stdout.write(payload["csv"])
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatialcrt",
        description="Spatially structured CRT simulation and inference")
    parser.add_argument("--server", default=os.environ.get("SPATIALCRT_SERVER"),
                        help="base URL of a running service; default is in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="sample-size and variance calculators")
    p.add_argument("--icc", type=float)
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--power", type=float, default=0.85)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--m", type=int, default=40)
    p.add_argument("--sigma-w2", type=float, default=2.25)
    p.add_argument("--f", type=float, default=0.5)
    p.add_argument("--table", action="store_true", help="print the stock scenarios")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="generate a single trial as CSV")
    p.add_argument("--scenario", default="A")
    p.add_argument("--theta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-latent", action="store_true")
    p.add_argument("--out", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="run an operating-characteristic study")
    p.add_argument("--config", help="study config JSON path")
    p.add_argument("--scenario", action="append",
                   help="scenario label(s), repeatable or comma separated")
    p.add_argument("--theta-grid", help="comma separated true effects")
    p.add_argument("--models", action="append",
                   help="model name(s): smm, fm_naive, fm, mm, cluster")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   help="worker processes (default $SPATIALCRT_THREADS or all cores)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--fresh", action="store_true", help="ignore cached chunks")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("summarize", help="recompute summaries from replicates.csv")
    p.add_argument("--replicates", required=True)
    p.add_argument("--modse", choices=["mean", "median"], default="mean")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("export-plotdata", help="flatten summaries to plot-ready CSV")
    p.add_argument("--summaries", required=True, help="summaries JSON path")
    p.add_argument("--kind", required=True,
                   choices=["power", "fpr", "pct_re", "bias", "mse", "coverage"])
    p.add_argument("--out", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_export_plotdata)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
