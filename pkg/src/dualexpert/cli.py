"""Command-line entry point.

Subcommands: gen-synthetic, train, eval, ablate, sweep, verify-geometry,
export-report. Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .config import TrainConfig
from .errors import NumericalError, ValidationError
from .experts import init_params, load_params, save_params
from .store import load_task_data, sample_k_shot
from .trainer import evaluate, history_to_jsonl, train


def _load_cfg(path) -> TrainConfig:
    if path is None:
        return TrainConfig()
    return TrainConfig.from_json_file(path)


def _parse_seeds(text) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as e:
        raise ValidationError(f"bad seed list {text!r}") from e


def cmd_gen_synthetic(args):
    with open(args.spec) as f:
        spec = bench.SyntheticSpec(**json.load(f))
    path = bench.make_synthetic_task(spec, args.out)
    print(path)


def cmd_train(args):
    data = load_task_data(args.manifest)
    cfg = _load_cfg(args.config)
    task = sample_k_shot(data.manifest, args.k, args.seed)
    params, history = train(task, data, cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(out / "params.cmf1", params)
    (out / "history.jsonl").write_text(history_to_jsonl(history))
    result = {"k": args.k, "seed": args.seed,
              "final_accuracy": history.final_accuracy}
    (out / "result.json").write_text(json.dumps(result, sort_keys=True) + "\n")
    print(json.dumps(result, sort_keys=True))


def cmd_eval(args):
    data = load_task_data(args.manifest)
    cfg = _load_cfg(args.config)
    if args.params:
        params = load_params(args.params)
    else:
        params = init_params(data.images.cols, cfg.hidden_dim, 0)
    test_rows = [
        (int(data.manifest.indices[i]), int(data.manifest.labels[i]))
        for i in data.manifest.test_rows()
    ]
    acc = evaluate(params, data, test_rows, cfg)
    print(json.dumps({"accuracy": acc}, sort_keys=True))


def cmd_ablate(args):
    data = load_task_data(args.manifest)
    cfg = _load_cfg(args.config)
    reports = bench.run_ablation(data, args.k, _parse_seeds(args.seeds), cfg)
    text = bench.reports_to_json(reports)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


def cmd_sweep(args):
    data = load_task_data(args.manifest)
    cfg = _load_cfg(args.config)
    k_list = tuple(int(k) for k in args.k_list.split(",")) \
        if args.k_list else bench.DEFAULT_K_LIST
    reports = bench.run_shots_sweep(data, _parse_seeds(args.seeds), cfg, k_list)
    text = bench.reports_to_json(reports)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


def cmd_verify_geometry(args):
    report = bench.verify_theorems(trials=args.trials, seed=args.seed)
    print(json.dumps(report, indent=1, sort_keys=True))
    if not report["pass"]:
        sys.exit(2)


def cmd_export_report(args):
    reports = bench.reports_from_json(Path(args.report).read_text())
    if args.format == "json":
        text = bench.reports_to_json(reports)
    elif args.format == "csv":
        text = bench.reports_to_csv(reports)
    else:
        text = bench.reports_to_markdown(reports)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualexpert")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic task")
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_synthetic)

    p = sub.add_parser("train", help="train on one K-shot episode")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", default=None, help="TrainConfig JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved (or zero-init) params")
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", default=None, help="CMF1 params container")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="run the 9-row component grid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seeds", required=True, help="comma-separated")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("sweep", help="K-shot sweep with the full model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--k-list", default=None, help="comma-separated, default 1,2,4,8,16")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify-geometry", help="check both numerical identities")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify_geometry)

    p = sub.add_parser("export-report", help="convert a report JSON")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["json", "csv", "md"], required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_export_report)
    return ap


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    except (NumericalError,) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        sys.exit(2)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
