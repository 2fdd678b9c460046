"""Acceptance gate: one test per release criterion, each printing a single
PASS/FAIL line (visible under pytest -s or on failure). Tolerances and time
budgets are pinned; do not loosen them."""

import time

import numpy as np
import pytest

from dualexpert.bench import (
    ABLATION_GRID,
    SyntheticSpec,
    make_synthetic_task,
    run_ablation,
    verify_theorems,
)
from dualexpert.cli import main as cli_main
from dualexpert.config import TrainConfig
from dualexpert.experts import forward, init_params
from dualexpert.objectives import (
    ce_loss,
    finite_diff_check,
    total_loss_and_grad,
)
from dualexpert.geometry import jeffreys
from dualexpert.store import load_task_data, sample_k_shot
from dualexpert.trainer import evaluate

from test_objectives import small_instance


def _report(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_gradient_correctness():
    t0 = time.monotonic()
    worst = 0.0
    for seed in range(100):
        Z, y, params, T, cfg = small_instance(seed, tau=1.0)
        worst = max(worst, finite_diff_check(params, Z, y, T, cfg, 1e-5))
    elapsed = time.monotonic() - t0
    _report("gradient check, 100 instances, max rel err < 1e-5",
            worst < 1e-5 and elapsed < 60.0,
            f"worst={worst:.3g}, {elapsed:.1f}s")


def test_consensus_fourth_order():
    t0 = time.monotonic()
    r = verify_theorems(trials=20, seed=0)["consensus_order"]
    elapsed = time.monotonic() - t0
    ok = (r["order_in_range"] and r["ratio_within_tolerance"]
          and elapsed < 10.0)
    _report("consensus residual order in [3.7, 4.3], ratio dev < 5e-3",
            ok, f"slopes [{r['min_slope']:.3f}, {r['max_slope']:.3f}], "
                f"ratio dev {r['max_ratio_deviation']:.2e}, {elapsed:.1f}s")


def test_laplace_prior_equivalence():
    t0 = time.monotonic()
    r = verify_theorems(trials=1, seed=0)["laplace_prior"]
    elapsed = time.monotonic() - t0
    ok = (r["max_identity_error"] < 1e-12 and r["map_argmin_ok"]
          and elapsed < 10.0)
    _report("closed-form prior identity < 1e-12 and MAP/L1 argmin agreement",
            ok, f"identity err {r['max_identity_error']:.2e}, {elapsed:.1f}s")


def test_zero_shot_identity(tmp_path):
    spec = SyntheticSpec(C=6, d=16, n_train=4, n_test=6, alignment=0.7,
                         seed=9)
    data = load_task_data(make_synthetic_task(spec, tmp_path))
    cfg = TrainConfig()
    params = init_params(data.images.cols, cfg.hidden_dim, 0)
    out = forward(data.images.data, params, data.text, cfg)
    bitwise = np.array_equal(out.s_fused, out.s_zs)
    task = sample_k_shot(data.manifest, 2, seed=0)
    acc = evaluate(params, data, task.test_rows, cfg)
    idx = np.array([r for r, _ in task.test_rows])
    y = np.array([l for _, l in task.test_rows])
    zs_acc = float(np.mean(
        np.argmax(data.images.data[idx] @ data.text.data.T, axis=1) == y))
    _report("zero-init fused logits bitwise equal to zero-shot",
            bitwise and acc == zs_acc,
            f"bitwise={bitwise}, eval {acc} vs zero-shot {zs_acc}")


def test_loss_breakdown_linearity():
    ok = True
    detail = ""
    for seed in range(20):
        Z, y, params, T, cfg = small_instance(seed)
        lb, _ = total_loss_and_grad(Z, y, params, T, cfg)
        recon = (lb.ce + cfg.lambda1 * lb.l_r + cfg.lambda2 * lb.l_i
                 + cfg.lambda3 * lb.l_d)
        if abs(lb.total - recon) >= 1e-10:
            ok, detail = False, f"reconstruction error {abs(lb.total-recon):.2e}"
            break
        for lam, term in (("lambda1", "l_r"), ("lambda2", "l_i"),
                          ("lambda3", "l_d")):
            cfg2 = cfg.with_overrides(**{lam: 2 * getattr(cfg, lam)})
            lb2, _ = total_loss_and_grad(Z, y, params, T, cfg2)
            delta = lb2.total - lb.total
            expect = getattr(cfg, lam) * getattr(lb, term)
            if abs(delta - expect) >= 1e-10:
                ok, detail = False, f"doubling {lam}: {abs(delta-expect):.2e}"
                break
        if not ok:
            break
    _report("total reconstructs from weighted terms; doubling a weight "
            "doubles its contribution", ok, detail)


def test_directional_synthetic_cross_domain(tmp_path):
    t0 = time.monotonic()
    spec = SyntheticSpec(C=10, d=32, n_train=50, n_test=50, alignment=0.2,
                         noise_sigma=0.3)
    data = load_task_data(make_synthetic_task(spec, tmp_path))
    reports = run_ablation(data, 16, (0, 1, 2), TrainConfig())
    elapsed = time.monotonic() - t0
    by_id = {r.config_id: r.mean_accuracy for r in reports}
    zs, full = by_id["zero-shot"], by_id["full"]
    gain_ok = full >= zs + 0.20
    order_ok = all(full >= by_id[cid] for cid, _ in ABLATION_GRID)
    _report("full model gains >= 0.20 over zero-shot and tops the ablation "
            "grid", gain_ok and order_ok and elapsed < 120.0,
            f"zero-shot {zs:.4f}, full {full:.4f}, "
            f"best other {max(v for k, v in by_id.items() if k != 'full'):.4f}, "
            f"{elapsed:.1f}s")


def test_ablate_determinism(tmp_path, capsys):
    spec_dir = tmp_path / "task"
    spec = SyntheticSpec(C=3, d=8, n_train=4, n_test=4, alignment=0.8, seed=1)
    manifest = make_synthetic_task(spec, spec_dir)
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(TrainConfig(epochs=2, batch_size=8).to_json())
    blobs = []
    for name in ("r1.json", "r2.json"):
        cli_main(["ablate", "--manifest", str(manifest), "--k", "2",
                  "--seeds", "0,1", "--config", str(cfg_file),
                  "--out", str(tmp_path / name)])
        capsys.readouterr()
        blobs.append((tmp_path / name).read_bytes())
    with capsys.disabled():
        _report("two ablate runs write byte-identical reports",
                blobs[0] == blobs[1])


def test_ce_and_jeffreys_sanity():
    ce = ce_loss(np.zeros((1, 10)), np.array([0]), 1.0)
    ce_ok = abs(ce - np.log(10)) < 1e-9
    dj = jeffreys(np.array([0.7, 0.3]), np.array([0.6, 0.4]))
    dj_ok = abs(dj - 0.044187) < 1e-5
    _report("uniform-logit CE = ln 10 and pinned Jeffreys value",
            ce_ok and dj_ok, f"ce err {abs(ce-np.log(10)):.2e}, "
                             f"jeffreys {dj:.6f}")
