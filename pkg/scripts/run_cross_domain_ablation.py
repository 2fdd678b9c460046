#!/usr/bin/env python3
"""Generate a misaligned synthetic task and run the full 9-row component
ablation on it, printing a markdown table.

This reproduces the headline comparison: zero-shot collapses when the text
embeddings are misaligned with the image clusters, and the full model
(both adapters + consistency priors + consensus) recovers most of the gap.
"""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dualexpert.bench import (  # noqa: E402
    SyntheticSpec,
    make_synthetic_task,
    reports_to_json,
    reports_to_markdown,
    run_ablation,
)
from dualexpert.config import TrainConfig  # noqa: E402
from dualexpert.store import load_task_data  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alignment", type=float, default=0.2,
                    help="text/image alignment in [0,1]; < 0.5 tags the "
                         "task cross-domain (300-epoch protocol)")
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--gen-seed", type=int, default=0)
    ap.add_argument("--out", default=None,
                    help="optional path for the JSON report")
    args = ap.parse_args()

    seeds = tuple(int(s) for s in args.seeds.split(","))
    with tempfile.TemporaryDirectory() as td:
        spec = SyntheticSpec(alignment=args.alignment, seed=args.gen_seed)
        data = load_task_data(make_synthetic_task(spec, td))
        reports = run_ablation(data, args.k, seeds, TrainConfig())

    print(reports_to_markdown(reports), end="")
    full = reports[-1].mean_accuracy
    zs = reports[0].mean_accuracy
    print(f"\nzero-shot {zs:.4f} -> full {full:.4f} (gain {full - zs:+.4f})")
    if args.out:
        Path(args.out).write_text(reports_to_json(reports))


if __name__ == "__main__":
    main()
