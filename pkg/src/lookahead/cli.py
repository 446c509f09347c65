"""Command-line entry point binding data, training, and evaluation into runs.

Every command writes a manifest.json that reproduces the run exactly, the
delimited/JSON results, and rendered figures next to them.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .data import (
    Dataset,
    FeatureMask,
    SplitSpec,
    TrainConfig,
    generate_synthetic,
    load_csv,
    split,
    standardize,
)
from .evaluation import (
    EvalReport,
    FrontierError,
    FrontierPoint,
    Oracle,
    evaluate,
    fit_oracle,
    frontier_sweep,
    frontier_to_csv,
    frontier_to_json,
    synthetic_oracle,
)
from .models import TrainingDivergedError, fit_predictive
from .training import TrainedBundle, train_lookahead

SYNTH_M = 25
UNCERTAINTY_FLAG = {"vanilla": "vanilla_bootstrap", "residual": "residual_bootstrap",
                    "quantile": "quantile"}
_FLAG_BY_KIND = {v: k for k, v in UNCERTAINTY_FLAG.items()}


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--lambda", dest="lam", type=float, default=4.0,
                    help="lookahead regularization weight (default 4)")
    sp.add_argument("--eta", type=float, default=1.25, help="decision step size (default 1.25)")
    sp.add_argument("--tau", type=float, default=0.95, help="confidence level (default 0.95)")
    sp.add_argument("--rounds", type=int, default=5, help="alternation rounds (default 5)")
    sp.add_argument("--bootstrap", type=int, default=10, help="bootstrap submodels (default 10)")
    sp.add_argument("--uncertainty", choices=sorted(UNCERTAINTY_FLAG), default="vanilla",
                    help="interval model family (default vanilla)")
    sp.add_argument("--lr", type=float, default=0.1, help="learning rate (default 0.1)")
    sp.add_argument("--epochs-init", type=int, default=1000,
                    help="epochs for initial/auxiliary fits (default 1000)")
    sp.add_argument("--epochs-round", type=int, default=100,
                    help="predictive epochs per round (default 100)")
    sp.add_argument("--seed", type=int, default=7, help="root seed (default 7)")
    sp.add_argument("--split", type=float, default=0.75, help="train fraction (default 0.75)")
    sp.add_argument("--out", type=str, default=None, help="output directory")
    sp.add_argument("--manifest", type=str, default=None,
                    help="rerun from a saved manifest.json (overrides other flags)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lookahead",
        description="Train predictive models whose induced user decisions improve outcomes.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="synthetic benchmark: baseline vs lookahead at one eta")
    _add_run_flags(sp)

    sp = sub.add_parser("train", help="train one lookahead bundle on CSV or synthetic data")
    _add_run_flags(sp)
    sp.add_argument("--data", type=str, default=None, help="CSV file (default: synthetic data)")
    sp.add_argument("--target", type=str, default=None, help="outcome column name")
    sp.add_argument("--mutable", type=str, default=None,
                    help="comma-separated mutable columns (default: all)")

    sp = sub.add_parser("sweep", help="accuracy-vs-improvement frontier over a lambda grid")
    _add_run_flags(sp)
    sp.add_argument("--data", type=str, default=None, help="CSV file (default: synthetic data)")
    sp.add_argument("--target", type=str, default=None, help="outcome column name")
    sp.add_argument("--mutable", type=str, default=None,
                    help="comma-separated mutable columns (default: all)")
    sp.add_argument("--grid", type=str, default="0,1,2,4,8",
                    help="comma-separated lambda grid (default 0,1,2,4,8)")
    return p


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.eta < 0:
        parser.error(f"--eta must be >= 0, got {args.eta}")
    if args.lam < 0:
        parser.error(f"--lambda must be >= 0, got {args.lam}")
    if not 0.0 < args.tau < 1.0:
        parser.error(f"--tau must be in (0,1), got {args.tau}")
    if not 0.0 < args.split < 1.0:
        parser.error(f"--split must be in (0,1), got {args.split}")
    if args.rounds < 1 or args.bootstrap < 1 or args.epochs_init < 1 or args.epochs_round < 1:
        parser.error("--rounds, --bootstrap and epoch counts must be positive")
    if args.lr <= 0:
        parser.error(f"--lr must be positive, got {args.lr}")
    grid = getattr(args, "grid", None)
    if grid is not None:
        try:
            if not _parse_grid(grid):
                raise ValueError("empty grid")
        except ValueError:
            parser.error(f"--grid must be a nonempty comma-separated list of numbers, got {grid!r}")


def _parse_grid(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _manifest_dict(command: str, config: TrainConfig, data_source: dict,
                   train_fraction: float, out_dir: str,
                   mutable_columns: list[str] | None = None,
                   lambda_grid: list[float] | None = None) -> dict:
    doc = {
        "command": command,
        "config": config.to_json_dict(mutable_columns),
        "data_source": data_source,
        "train_fraction": train_fraction,
        "output_dir": out_dir,
    }
    if lambda_grid is not None:
        doc["lambda_grid"] = lambda_grid
    return doc


def _apply_manifest(args: argparse.Namespace) -> None:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    cfg = doc["config"]
    args.lam = cfg["lambda"]
    args.eta = cfg["eta"]
    args.tau = cfg["tau"]
    args.rounds = cfg["rounds"]
    args.bootstrap = cfg["n_bootstrap"]
    args.uncertainty = _FLAG_BY_KIND[cfg["uncertainty_kind"]]
    args.lr = cfg["learning_rate"]
    args.epochs_init = cfg["epochs_init"]
    args.epochs_round = cfg["epochs_per_round"]
    args.seed = cfg["seed"]
    args.model_kind = cfg.get("model_kind")
    args.split = doc["train_fraction"]
    if args.out is None:
        args.out = doc["output_dir"]
    src = doc["data_source"]
    if src["kind"] == "csv":
        args.data = src["path"]
        args.target = src["target"]
        args.mutable = ",".join(src["mutable_columns"]) if src["mutable_columns"] else None
    if "lambda_grid" in doc and hasattr(args, "grid"):
        args.grid = ",".join(repr(v) for v in doc["lambda_grid"])


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _report_row(label: str, r: EvalReport) -> str:
    return f"{label},{r.rmse!r},{r.improvement_rate!r},{r.improvement_magnitude!r},{r.n_test}"


REPORT_HEADER = "model,rmse,improvement_rate,improvement_magnitude,n_test"


def _trace_csv(bundle: TrainedBundle) -> str:
    lines = ["round,train_mse,penalty,active_count"]
    for t in bundle.trace:
        lines.append(f"{t.round},{t.train_mse!r},{t.penalty!r},{t.active_count}")
    return "\n".join(lines) + "\n"


def _config_from_args(args: argparse.Namespace, mask: FeatureMask, model_kind: str) -> TrainConfig:
    return TrainConfig(
        lam=args.lam, eta=args.eta, tau=args.tau, rounds=args.rounds,
        n_bootstrap=args.bootstrap, learning_rate=args.lr, epochs_init=args.epochs_init,
        epochs_per_round=args.epochs_round, seed=args.seed, mask=mask,
        uncertainty_kind=UNCERTAINTY_FLAG[args.uncertainty],
        model_kind=model_kind)


def _load_run_data(args: argparse.Namespace) -> tuple[Dataset, FeatureMask, dict, Oracle, str]:
    """(full dataset, mask, data_source manifest entry, oracle, model kind)."""
    if getattr(args, "data", None):
        mutable = [c.strip() for c in args.mutable.split(",")] if args.mutable else None
        if args.target is None:
            raise ValueError("--target is required with --data")
        data, mask = load_csv(args.data, args.target, mutable if mutable is not None else [])
        if mutable is None:
            mask = FeatureMask.all_mutable(data.d)
        source = {"kind": "csv", "path": args.data, "target": args.target,
                  "mutable_columns": mutable or []}
        model_kind = getattr(args, "model_kind", None) or "linear"
        return data, mask, source, None, model_kind
    data = generate_synthetic(SYNTH_M, args.seed)
    source = {"kind": "synthetic", "m": SYNTH_M, "seed": args.seed}
    model_kind = getattr(args, "model_kind", None) or "quadratic"
    return data, FeatureMask.all_mutable(1), source, synthetic_oracle(), model_kind


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out or "runs/synth")
    out.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(SYNTH_M, args.seed)
    mask = FeatureMask.all_mutable(1)
    config = _config_from_args(args, mask, "quadratic")
    manifest = _manifest_dict("synth", config, {"kind": "synthetic", "m": SYNTH_M, "seed": args.seed},
                              args.split, str(out))
    _write(out / "manifest.json", _json_text(manifest))

    train, test = split(data, SplitSpec(args.split, args.seed))
    oracle = synthetic_oracle()
    total_epochs = config.epochs_init + config.rounds * config.epochs_per_round
    baseline = fit_predictive(train, config.learning_rate, total_epochs, kind="quadratic")
    base_report = evaluate(baseline, oracle, test, config.eta, mask)
    bundle = train_lookahead(train, config)
    look_report = evaluate(bundle.predictive, oracle, test, config.eta, mask)

    _write(out / "results.csv", "\n".join([
        REPORT_HEADER,
        _report_row("baseline", base_report),
        _report_row("lookahead", look_report),
    ]) + "\n")
    _write(out / "trace.csv", _trace_csv(bundle))
    _write(out / "bundle.json", bundle.to_json() + "\n")
    plots.plot_fit(train, oracle, {"baseline": baseline, "lookahead": bundle.predictive},
                   config.eta, mask, out / "fit.png")
    plots.plot_trace(bundle.trace, out / "trace.png")
    print(f"synth eta={config.eta:g}: baseline rmse={base_report.rmse:.3f} "
          f"rate={base_report.improvement_rate:.3f}; lookahead rmse={look_report.rmse:.3f} "
          f"rate={look_report.improvement_rate:.3f}  -> {out}")
    return 0


def _prepare_supervised(args: argparse.Namespace):
    data, mask, source, oracle, model_kind = _load_run_data(args)
    train, test = split(data, SplitSpec(args.split, args.seed))
    if source["kind"] == "csv":
        train, test, scaler = standardize(train, test)
        full = scaler.transform(data)
        oracle = fit_oracle(full)
    config = _config_from_args(args, mask, model_kind)
    return train, test, mask, source, oracle, config


def cmd_train(args: argparse.Namespace) -> int:
    out = Path(args.out or "runs/train")
    out.mkdir(parents=True, exist_ok=True)
    train, test, mask, source, oracle, config = _prepare_supervised(args)
    manifest = _manifest_dict("train", config, source, args.split, str(out),
                              mutable_columns=source.get("mutable_columns"))
    _write(out / "manifest.json", _json_text(manifest))

    bundle = train_lookahead(train, config)
    report = evaluate(bundle.predictive, oracle, test, config.eta, mask)
    _write(out / "bundle.json", bundle.to_json() + "\n")
    _write(out / "trace.csv", _trace_csv(bundle))
    _write(out / "report.json", _json_text(report.to_json_dict()))
    plots.plot_trace(bundle.trace, out / "trace.png")
    if train.d == 1:
        plots.plot_fit(train, oracle, {"lookahead": bundle.predictive}, config.eta, mask,
                       out / "fit.png")
    print(f"train: rmse={report.rmse:.3f} rate={report.improvement_rate:.3f} "
          f"mag={report.improvement_magnitude:.3f}  -> {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    out = Path(args.out or "runs/sweep")
    out.mkdir(parents=True, exist_ok=True)
    grid = sorted(_parse_grid(args.grid))
    data, mask, source, oracle, model_kind = _load_run_data(args)
    config = _config_from_args(args, mask, model_kind)
    manifest = _manifest_dict("sweep", config, source, args.split, str(out),
                              mutable_columns=source.get("mutable_columns"),
                              lambda_grid=grid)
    _write(out / "manifest.json", _json_text(manifest))

    if source["kind"] == "csv":
        # scale by train statistics; frontier_sweep re-derives the same split
        tr, te = split(data, SplitSpec(args.split, config.seed))
        _, _, scaler = standardize(tr, te)
        data = scaler.transform(data)
        oracle = fit_oracle(data)

    points: list[FrontierPoint] = []
    failures: list[dict] = []
    for lam in grid:
        try:
            points.extend(frontier_sweep(data, config, [lam], oracle, args.split))
        except FrontierError as exc:
            failures.append({"lambda": lam, "error": str(exc)})
    _write(out / "frontier.csv", frontier_to_csv(points))
    _write(out / "frontier.json", frontier_to_json(points, failures) + "\n")
    if points:
        plots.plot_frontier(points, out / "frontier.png")
    for f in failures:
        print(f"sweep: lambda={f['lambda']:g} failed: {f['error']}", file=sys.stderr)
    print(f"sweep: {len(points)} points, {len(failures)} failures  -> {out}")
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        _apply_manifest(args)
    _validate(parser, args)
    handler = {"synth": cmd_synth, "train": cmd_train, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (TrainingDivergedError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
