"""Deterministic mini-batch SGD: one linear-warmup epoch, then cosine decay
to zero. Plain SGD by default; momentum and weight decay exist as opt-in
config fields but default off.

Everything is a pure function of (task, frozen data, config, seed): batch
order comes from a PCG64 stream keyed on (seed, epoch), updates run single
threaded, and two identical runs produce bitwise-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import NumericalError, ParameterError
from .experts import (ExpertParams, FIELD_ORDER, fi_forward, fr_forward,
                      fuse_logits, init_params)
from .objectives import LossBreakdown, total_loss_and_grad
from .store import ShotTask, TaskData


@dataclass(frozen=True)
class LrSchedule:
    warmup_start: float
    peak: float
    steps_per_epoch: int
    total_epochs: int

    def __post_init__(self):
        if self.warmup_start <= 0 or self.peak <= 0:
            raise ParameterError("learning rates must be > 0")
        if self.warmup_start > self.peak:
            raise ParameterError("warmup_start must not exceed peak")
        if self.steps_per_epoch < 1 or self.total_epochs < 1:
            raise ParameterError("schedule counts must be >= 1")

    @property
    def total_steps(self) -> int:
        return self.steps_per_epoch * self.total_epochs


def lr_at(step: int, sched: LrSchedule) -> float:
    """Learning rate for a global step index.

    Epoch 0 interpolates linearly from warmup_start toward peak (reaching
    peak exactly at the first post-warmup step). After warmup:
    peak * (1 + cos(pi*u)) / 2 with u running from 0 at the first
    post-warmup step to 1 at the last step, so the rate decays to 0.
    """
    if step < 0 or step >= sched.total_steps:
        raise ParameterError(
            f"step {step} outside [0, {sched.total_steps})"
        )
    spe = sched.steps_per_epoch
    if step < spe and sched.total_epochs > 1:
        return sched.warmup_start + (sched.peak - sched.warmup_start) * step / spe
    if sched.total_epochs == 1:
        # degenerate single-epoch run: warmup only
        return sched.warmup_start + (sched.peak - sched.warmup_start) * step / spe
    last = sched.total_steps - 1
    if last == spe:
        return sched.peak
    u = (step - spe) / (last - spe)
    return sched.peak * 0.5 * (1.0 + np.cos(np.pi * u))


@dataclass(frozen=True)
class TrainHistory:
    losses: tuple[LossBreakdown, ...]  # per-epoch means over batches
    lrs: tuple[float, ...]  # lr at the first step of each epoch
    final_accuracy: float


def history_to_jsonl(history: TrainHistory) -> str:
    lines = []
    for e, (lb, lr) in enumerate(zip(history.losses, history.lrs)):
        lines.append(json.dumps(
            {"epoch": e, "lr": lr, "ce": lb.ce, "l_r": lb.l_r,
             "l_i": lb.l_i, "l_d": lb.l_d, "total": lb.total},
            sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def evaluate(params: ExpertParams, data: TaskData,
             test_rows, cfg: TrainConfig) -> float:
    """Fraction of test rows whose fused-logit argmax matches the label."""
    rows = list(test_rows)
    if not rows:
        raise ParameterError("empty test set")
    idx = np.array([r for r, _ in rows], dtype=np.int64)
    y = np.array([l for _, l in rows], dtype=np.int64)
    Z = data.images.data[idx]
    T = data.text.data
    z_fi = fi_forward(Z, params)
    z_fr = fr_forward(Z, params)
    s = fuse_logits(z_fr @ T.T, z_fi @ T.T, Z @ T.T, cfg.alpha, cfg.beta)
    pred = np.argmax(s, axis=1)  # ties resolve to the lowest index
    return float(np.mean(pred == y))


def train(task: ShotTask, data: TaskData, cfg: TrainConfig,
          seed: int) -> tuple[ExpertParams, TrainHistory]:
    """Run the full training protocol on one K-shot episode."""
    d = data.images.cols
    params = init_params(d, cfg.hidden_dim, seed)
    idx = np.array([r for r, _ in task.train_rows], dtype=np.int64)
    y_all = np.array([l for _, l in task.train_rows], dtype=np.int64)
    Z_all = data.images.data[idx]
    n = len(idx)

    if cfg.epochs == 0:
        acc = evaluate(params, data, task.test_rows, cfg)
        return params, TrainHistory(losses=(), lrs=(), final_accuracy=acc)

    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    sched = LrSchedule(warmup_start=cfg.warmup_lr, peak=cfg.peak_lr,
                       steps_per_epoch=steps_per_epoch, total_epochs=cfg.epochs)

    arrays = {name: np.array(getattr(params, name)) for name in FIELD_ORDER}
    velocity = {name: np.zeros_like(a) for name, a in arrays.items()} \
        if cfg.momentum else None

    losses, lrs = [], []
    step = 0
    for epoch in range(cfg.epochs):
        rng = np.random.Generator(np.random.PCG64([seed, epoch]))
        perm = rng.permutation(n)
        lrs.append(lr_at(step, sched))
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            lr = lr_at(step, sched)
            p = ExpertParams(**arrays)
            try:
                lb, grads = total_loss_and_grad(
                    Z_all[batch], y_all[batch], p, data.text, cfg)
            except NumericalError as e:
                raise NumericalError(
                    f"training aborted at epoch {epoch}, step {step}: {e}",
                    term=e.term) from e
            for name in FIELD_ORDER:
                g = getattr(grads, name)
                if cfg.weight_decay:
                    g = g + cfg.weight_decay * arrays[name]
                if velocity is not None:
                    velocity[name] = cfg.momentum * velocity[name] + g
                    g = velocity[name]
                arrays[name] = arrays[name] - lr * g
            epoch_losses.append(lb)
            step += 1
        losses.append(LossBreakdown(
            ce=float(np.mean([l.ce for l in epoch_losses])),
            l_r=float(np.mean([l.l_r for l in epoch_losses])),
            l_i=float(np.mean([l.l_i for l in epoch_losses])),
            l_d=float(np.mean([l.l_d for l in epoch_losses])),
            total=float(np.mean([l.total for l in epoch_losses])),
        ))

    final = ExpertParams(**arrays)
    acc = evaluate(final, data, task.test_rows, cfg)
    return final, TrainHistory(losses=tuple(losses), lrs=tuple(lrs),
                               final_accuracy=acc)
