"""Command-line benchmark harness.

    teacache-bench [--config PATH] [--seed-override N] [--output DIR] [--quiet] VERB

Verbs: ``calibrate`` fits the rescaler, ``run`` writes one report row per
(seed, method), ``sweep`` repeats ``run`` over a delta grid and aggregates,
``trace-dump`` writes per-step trajectories of the configured policy.
On failure a single JSON line ``{"error": ..., "message": ...}`` goes to
stderr and the exit code is 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, calibration, metrics, svg
from . import model as dit
from .config import ExperimentConfig, check_delta_grid, load_config, parse_float_list
from .errors import TeaCacheError
from .policy import AlwaysComputePolicy, IndicatorMode, PolicyConfig, TeaCachePolicy
from .rescaler import PolyRescaler, load_rescaler, save_rescaler
from .sampler import SampleResult, SamplerConfig, default_condition, initial_latent, run_sampler, write_trajectory_csv

REPORT_HEADER = [
    "seed",
    "method",
    "delta",
    "mode",
    "order",
    "computed_steps",
    "speedup",
    "psnr_db",
    "ssim",
    "rel_l1",
    "jaccard_oracle",
]
SWEEP_METRICS = ["computed_steps", "speedup", "psnr_db", "ssim", "rel_l1", "jaccard_oracle"]


def fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row.get(k)) for k in header])


@dataclass
class Experiment:
    """Shared state for one invocation: weights, schedule and cached baselines."""

    cfg: ExperimentConfig
    log: callable = print
    weights: dit.ModelWeights = field(init=False)
    baselines: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.weights = dit.init_weights(self.cfg.model)
        self.schedule = self.cfg.schedule.build()
        self.cond = default_condition(self.cfg.model, self.cfg.cond_seed)

    def sampler_config(self, seed: int, record: bool = False) -> SamplerConfig:
        return SamplerConfig(self.schedule, int(seed), record)

    def baseline(self, seed: int) -> SampleResult:
        if seed not in self.baselines:
            self.baselines[seed] = run_sampler(self.weights, self.sampler_config(seed, True), None, self.cond)
        return self.baselines[seed]

    def load_rescaler(self) -> PolyRescaler | None:
        path = self.cfg.rescaler_path()
        return None if path is None else load_rescaler(path)


def _quality_row(result: SampleResult, base: SampleResult, cfg: ExperimentConfig) -> dict:
    q = metrics.quality_report(result.latent, base.latent, cfg.grid)
    return {"psnr_db": q.psnr, "ssim": q.ssim, "rel_l1": q.rel_l1}


def _rows_for_seed(exp: Experiment, seed: int, delta: float, rescaler: PolyRescaler | None) -> list[dict]:
    cfg = exp.cfg
    T = exp.schedule.T
    base = exp.baseline(seed)
    true_diffs = [r.true_output_diff for r in base.trajectory[1:]]
    oracle = baselines.oracle_schedule(true_diffs, delta)
    order = "none" if rescaler is None else rescaler.order
    rows = []
    for method in cfg.methods:
        row = {"seed": seed, "method": method, "delta": delta}
        jaccard = None
        if method == "baseline":
            res = base
            jaccard = metrics.schedule_jaccard(res.stats.computed_set, oracle)
        elif method == "teacache":
            policy = TeaCachePolicy(PolicyConfig(delta, cfg.mode, rescaler))
            res = run_sampler(exp.weights, exp.sampler_config(seed, cfg.trajectory), policy, exp.cond)
            jaccard = metrics.schedule_jaccard(res.stats.computed_set, oracle)
            row.update(mode=cfg.mode.value, order=order)
        elif method == "uniform":
            res = baselines.run_uniform(exp.weights, exp.sampler_config(seed, cfg.trajectory), cfg.uniform_interval, exp.cond)
            jaccard = metrics.schedule_jaccard(res.stats.computed_set, oracle)
        else:  # reduced
            x_T = initial_latent(cfg.model, seed)
            res = baselines.run_reduced_timesteps(exp.weights, x_T, cfg.reduced, exp.cond, cfg.schedule, cfg.trajectory)
        row.update(
            computed_steps=res.stats.computed_steps,
            speedup=T / res.stats.computed_steps,
            jaccard_oracle=jaccard,
        )
        row.update(_quality_row(res, base, cfg))
        if cfg.trajectory and res.trajectory is not None:
            traj_dir = cfg.output_dir / "trajectories"
            traj_dir.mkdir(parents=True, exist_ok=True)
            write_trajectory_csv(res.trajectory, traj_dir / f"{method}_seed{seed}_delta{fmt(delta)}.csv")
        rows.append(row)
    return rows


def _sort_rows(rows: list[dict]) -> list[dict]:
    order = {m: i for i, m in enumerate(("baseline", "teacache", "uniform", "reduced"))}
    return sorted(rows, key=lambda r: (float(r["delta"]), int(r["seed"]), order[r["method"]]))


def cmd_calibrate(cfg: ExperimentConfig, order: int | None = None, log=print) -> tuple[PolyRescaler, Path]:
    exp = Experiment(cfg, log)
    order = cfg.order if order is None else order
    traces = calibration.record_trace(exp.weights, exp.sampler_config(0), cfg.mode, cfg.seeds, exp.cond)
    rescaler = calibration.fit_polynomial(traces, order)
    trace_dir = cfg.output_dir / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    for tr in traces:
        calibration.write_trace_csv(tr, trace_dir / f"trace_{cfg.mode.value}_seed{tr.provenance['noise_seed']}.csv")
    path = cfg.output_dir / f"rescaler_{cfg.mode.value}.json"
    save_rescaler(rescaler, path)
    fit_rmse = calibration.fit_residual(rescaler, traces)
    id_rmse = calibration.fit_residual(None, traces)
    log(f"calibrate: mode={cfg.mode.value} order={order} points={sum(map(len, traces))}")
    log(f"calibrate: fit RMSE {fit_rmse:.6g} vs identity RMSE {id_rmse:.6g}")
    log(f"calibrate: wrote {path}")
    return rescaler, path


def cmd_run(cfg: ExperimentConfig, log=print, exp: Experiment | None = None, report_name: str = "report.csv") -> list[dict]:
    exp = exp or Experiment(cfg, log)
    rescaler = exp.load_rescaler() if "teacache" in cfg.methods else None
    rows = []
    for seed in cfg.seeds:
        rows += _rows_for_seed(exp, seed, cfg.delta, rescaler)
    rows = _sort_rows(rows)
    if report_name:
        write_csv(cfg.output_dir / report_name, REPORT_HEADER, rows)
        log(f"run: {len(rows)} rows -> {cfg.output_dir / report_name}")
    return rows


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.array(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    if not np.all(np.isfinite(arr)):
        return float(np.mean(arr)), math.nan
    return float(np.mean(arr)), float(np.std(arr))


def aggregate(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["method"] == "baseline":
            continue
        groups.setdefault((float(r["delta"]), r["method"]), []).append(r)
    out = []
    for (delta, method), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        agg = {"delta": delta, "method": method, "mode": grp[0].get("mode", ""), "order": grp[0].get("order", ""), "n_seeds": len(grp)}
        for key in SWEEP_METRICS:
            vals = [r[key] for r in grp if r.get(key) is not None]
            if vals:
                agg[f"{key}_mean"], agg[f"{key}_std"] = _mean_std(vals)
        out.append(agg)
    return out


SWEEP_HEADER = ["delta", "method", "mode", "order", "n_seeds"] + [f"{k}_{s}" for k in SWEEP_METRICS for s in ("mean", "std")]


def _difference_curves(exp: Experiment, seed: int) -> list[tuple[str, list, list]]:
    series = []
    for mode in IndicatorMode:
        res = run_sampler(exp.weights, exp.sampler_config(seed, True), AlwaysComputePolicy(mode), exp.cond)
        steps = [r.t for r in res.trajectory[1:]]
        series.append((mode.value, steps, [r.indicator_diff for r in res.trajectory[1:]]))
    base = exp.baseline(seed)
    series.append(("model output", [r.t for r in base.trajectory[1:]], [r.true_output_diff for r in base.trajectory[1:]]))
    return series


def cmd_sweep(cfg: ExperimentConfig, deltas=None, log=print) -> list[dict]:
    deltas = tuple(cfg.deltas if deltas is None else deltas)
    check_delta_grid(deltas)
    exp = Experiment(cfg, log)
    all_rows = []
    for d in deltas:
        all_rows += cmd_run(cfg.with_overrides(delta=float(d)), log, exp, report_name="")
    all_rows = _sort_rows(all_rows)
    agg = aggregate(all_rows)
    out = cfg.output_dir
    write_csv(out / "sweep_report.csv", REPORT_HEADER, all_rows)
    write_csv(out / "sweep.csv", SWEEP_HEADER, agg)

    series = []
    for method in dict.fromkeys(r["method"] for r in agg):
        pts = [r for r in agg if r["method"] == method]
        series.append((method, [r["speedup_mean"] for r in pts], [r["psnr_db_mean"] for r in pts]))
    (out / "quality_vs_speedup.svg").write_text(
        svg.line_chart(series, "Quality vs. speedup", "speedup (T / computed steps)", "PSNR vs. baseline (dB)")
    )
    curves = _difference_curves(exp, cfg.seeds[0])
    (out / "step_differences.svg").write_text(
        svg.line_chart(curves, f"Per-step relative L1 differences (seed {cfg.seeds[0]})", "step", "relative L1 change", markers=False)
    )
    log(f"sweep: {len(deltas)} deltas x {len(cfg.seeds)} seeds -> {out / 'sweep.csv'}")
    return agg


def cmd_trace_dump(cfg: ExperimentConfig, log=print) -> list[Path]:
    exp = Experiment(cfg, log)
    rescaler = exp.load_rescaler()
    paths = []
    out = cfg.output_dir / "trajectories"
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        policy = TeaCachePolicy(PolicyConfig(cfg.delta, cfg.mode, rescaler))
        res = run_sampler(exp.weights, exp.sampler_config(seed, True), policy, exp.cond)
        path = out / f"teacache_seed{seed}_delta{fmt(cfg.delta)}.csv"
        write_trajectory_csv(res.trajectory, path)
        paths.append(path)
    log(f"trace-dump: wrote {len(paths)} trajectories to {out}")
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teacache-bench", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", type=Path, help="INI-style experiment config")
    p.add_argument("--seed-override", type=int, metavar="N", help="run a single seed N instead of the configured list")
    p.add_argument("--output", type=Path, metavar="DIR", help="override the output directory")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    sub = p.add_subparsers(dest="verb", required=True)
    c = sub.add_parser("calibrate", help="record uncached traces and fit the rescaler")
    c.add_argument("--order", type=int, help="polynomial order (default from config, 4)")
    sub.add_parser("run", help="baseline and configured methods per seed")
    s = sub.add_parser("sweep", help="run over a delta grid and aggregate")
    s.add_argument("--deltas", type=parse_float_list, help="comma-separated, strictly increasing")
    sub.add_parser("trace-dump", help="per-step trajectory CSVs of the configured policy")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = (lambda *a, **k: None) if args.quiet else print
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            cfg = cfg.with_overrides(seeds=(args.seed_override,))
        if args.output is not None:
            cfg = cfg.with_overrides(output_dir=args.output)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.verb == "calibrate":
            cmd_calibrate(cfg, args.order, log)
        elif args.verb == "run":
            cmd_run(cfg, log)
        elif args.verb == "sweep":
            cmd_sweep(cfg, args.deltas, log)
        else:
            cmd_trace_dump(cfg, log)
    except (TeaCacheError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
