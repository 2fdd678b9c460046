#!/usr/bin/env python3
"""Standalone numerical health check: finite-difference gradient audit over
random small instances, plus the divergence-geometry and prior-equivalence
verifications. Exits nonzero if anything is off."""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dualexpert.bench import verify_theorems  # noqa: E402
from dualexpert.config import TrainConfig  # noqa: E402
from dualexpert.objectives import finite_diff_check  # noqa: E402
from dualexpert.store import EmbeddingMatrix, l2_normalize  # noqa: E402
from dualexpert.experts import ExpertParams  # noqa: E402


def random_instance(seed, tau=1.0):
    rng = np.random.Generator(np.random.PCG64(seed))
    C = int(rng.integers(2, 6))
    d = int(rng.integers(2, 9))
    N = int(rng.integers(1, 5))
    h = 4 * d
    T = l2_normalize(EmbeddingMatrix(rng.standard_normal((C, d))))
    Z = rng.standard_normal((N, d))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    y = rng.integers(0, C, size=N)
    params = ExpertParams(
        fi_weight=0.3 * rng.standard_normal((d, d)),
        fr_w1=rng.standard_normal((h, d)) / np.sqrt(d),
        fr_b1=0.1 * rng.standard_normal(h),
        fr_w2=0.3 * rng.standard_normal((d, h)),
        fr_b2=0.1 * rng.standard_normal(d),
    )
    return Z, y, params, T, TrainConfig(tau=tau)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.time()
    worst = 0.0
    for k in range(args.instances):
        Z, y, params, T, cfg = random_instance(args.seed + k)
        worst = max(worst, finite_diff_check(params, Z, y, T, cfg, 1e-5))
    print(f"gradient check: {args.instances} instances, "
          f"max rel err {worst:.3e} ({time.time() - t0:.1f}s)")

    report = verify_theorems(trials=args.trials, seed=args.seed)
    co = report["consensus_order"]
    lp = report["laplace_prior"]
    print(f"consensus order: slopes [{co['min_slope']:.3f}, "
          f"{co['max_slope']:.3f}], ratio dev {co['max_ratio_deviation']:.2e}")
    print(f"laplace prior: identity err {lp['max_identity_error']:.2e}, "
          f"map argmin ok {lp['map_argmin_ok']}")

    ok = worst < 1e-5 and report["pass"]
    print("OK" if ok else "FAILED")
    sys.exit(0 if ok else 2)


if __name__ == "__main__":
    main()
