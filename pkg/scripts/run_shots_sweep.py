#!/usr/bin/env python3
"""K-shot sweep of the full model on a synthetic task (default K in
{1, 2, 4, 8, 16}, three seeds)."""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dualexpert.bench import (  # noqa: E402
    SyntheticSpec,
    make_synthetic_task,
    reports_to_markdown,
    run_shots_sweep,
)
from dualexpert.config import TrainConfig  # noqa: E402
from dualexpert.store import load_task_data  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alignment", type=float, default=0.8)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--k-list", default="1,2,4,8,16")
    ap.add_argument("--gen-seed", type=int, default=0)
    args = ap.parse_args()

    seeds = tuple(int(s) for s in args.seeds.split(","))
    k_list = tuple(int(k) for k in args.k_list.split(","))
    with tempfile.TemporaryDirectory() as td:
        spec = SyntheticSpec(alignment=args.alignment, seed=args.gen_seed)
        data = load_task_data(make_synthetic_task(spec, td))
        reports = run_shots_sweep(data, seeds, TrainConfig(), k_list)
    print(reports_to_markdown(reports), end="")


if __name__ == "__main__":
    main()
