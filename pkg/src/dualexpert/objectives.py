"""The four loss terms, their exact analytic gradients with respect to the
adapter parameters, and an independent central-finite-difference oracle.

Losses on a batch of N features z_i with labels y_i:

  CE   = -(1/N) sum_i ln softmax(s_fused_i / tau)[y_i]
  L_R  = || (1/N) sum_i (s_FR_i - s_ZS_i) ||_1
  L_I  = || (1/N) sum_i (s_FI_i - s_ZS_i) ||_1
  L_D  = (1/N) sum_i (1/2) D_J(softmax(s_FR_i/tau), softmax(s_FI_i/tau))

  total = CE + lambda1*L_R + lambda2*L_I + lambda3*L_D

The consistency prior constrains the drift of the *expected* logits: the
deviation is averaged over the batch first and the L1 norm (summed over
classes) is taken of that mean, so systematic drift away from the
zero-shot head is penalized while per-sample corrections that cancel on
average are free. (The per-vector utility l1_consistency keeps the plain
per-sample semantics.) The subgradient of |x| at 0 is taken as 0. Probabilities are clamped to >= 1e-12 before logarithms inside L_D only
(training robustness; the analytic gradient assumes the clamp is inactive,
which holds whenever logits/tau stay within ~27 of each other).

Gradients are derived by hand for the fixed two-head architecture; there is
no autodiff here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import NumericalError, ParameterError, ShapeError
from .experts import ExpertParams
from .store import EmbeddingMatrix

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossBreakdown:
    ce: float
    l_r: float
    l_i: float
    l_d: float
    total: float


@dataclass(frozen=True)
class Grads:
    """Same shapes as ExpertParams."""

    fi_weight: np.ndarray
    fr_w1: np.ndarray
    fr_b1: np.ndarray
    fr_w2: np.ndarray
    fr_b2: np.ndarray


def cosine_logits(z: np.ndarray, text: EmbeddingMatrix) -> np.ndarray:
    """Dot products of a unit feature (or batch) against unit text rows."""
    T = text.data
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != T.shape[1]:
        raise ShapeError(f"feature dim {z.shape[-1]} vs text dim {T.shape[1]}")
    return z @ T.T


def ce_loss(fused_logits: np.ndarray, labels: np.ndarray, tau: float) -> float:
    """Mean cross-entropy of temperature-softmaxed logits, log-sum-exp
    stabilized."""
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    s = np.atleast_2d(np.asarray(fused_logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if s.shape[0] == 0:
        raise ParameterError("empty batch")
    if y.shape[0] != s.shape[0]:
        raise ShapeError("labels length does not match batch")
    if y.min() < 0 or y.max() >= s.shape[1]:
        raise ParameterError("label out of range")
    a = s / tau
    m = a.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(a - m).sum(axis=1))
    return float(np.mean(lse - a[np.arange(len(y)), y]))


def l1_consistency(s: np.ndarray, s_zs: np.ndarray) -> float:
    """Classwise-summed L1 deviation; batch inputs are averaged over rows."""
    s = np.asarray(s, dtype=np.float64)
    s_zs = np.asarray(s_zs, dtype=np.float64)
    if s.shape != s_zs.shape:
        raise ShapeError(f"shape mismatch {s.shape} vs {s_zs.shape}")
    d = np.abs(s - s_zs).sum(axis=-1)
    return float(np.mean(d))


def expected_l1_deviation(s: np.ndarray, s_zs: np.ndarray) -> float:
    """L1 norm (class sum) of the batch-mean logit deviation.

    This is the consistency prior used in the training objective: it binds
    the expected drift from the zero-shot logits, not each sample's."""
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    s_zs = np.atleast_2d(np.asarray(s_zs, dtype=np.float64))
    if s.shape != s_zs.shape:
        raise ShapeError(f"shape mismatch {s.shape} vs {s_zs.shape}")
    return float(np.abs((s - s_zs).mean(axis=0)).sum())


def _clamped_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, PROB_FLOOR))


def _softmax(a: np.ndarray) -> np.ndarray:
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def consensus_loss(s_fr: np.ndarray, s_fi: np.ndarray, tau: float) -> float:
    """Half the Jeffreys divergence between the two experts' temperature
    softmaxes; batch inputs are averaged over rows."""
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    s_fr = np.atleast_2d(np.asarray(s_fr, dtype=np.float64))
    s_fi = np.atleast_2d(np.asarray(s_fi, dtype=np.float64))
    if s_fr.shape != s_fi.shape:
        raise ShapeError(f"shape mismatch {s_fr.shape} vs {s_fi.shape}")
    p = _softmax(s_fr / tau)
    q = _softmax(s_fi / tau)
    dj = ((p - q) * (_clamped_log(p) - _clamped_log(q))).sum(axis=1)
    return float(np.mean(0.5 * dj))


@dataclass(frozen=True)
class _Forward:
    z: np.ndarray
    pre: np.ndarray  # refiner pre-activation
    h: np.ndarray  # relu(pre)
    u: np.ndarray  # integrator residual sum, pre-normalization
    v: np.ndarray  # refiner residual sum, pre-normalization
    nu: np.ndarray
    nv: np.ndarray
    z_fi: np.ndarray
    z_fr: np.ndarray
    s_zs: np.ndarray
    s_fi: np.ndarray
    s_fr: np.ndarray
    s_fused: np.ndarray


def _forward(Z: np.ndarray, params: ExpertParams, T: np.ndarray,
             cfg: TrainConfig) -> _Forward:
    u = Z + Z @ params.fi_weight.T
    nu = np.linalg.norm(u, axis=1, keepdims=True)
    pre = Z @ params.fr_w1.T + params.fr_b1
    h = np.maximum(pre, 0.0)
    v = Z + h @ params.fr_w2.T + params.fr_b2
    nv = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(nu < 1e-30) or np.any(nv < 1e-30):
        raise NumericalError("adapter output has zero norm", term="normalize")
    z_fi = u / nu
    z_fr = v / nv
    s_zs = Z @ T.T
    s_fi = z_fi @ T.T
    s_fr = z_fr @ T.T
    s_fused = cfg.alpha * s_fr + cfg.beta * s_fi + cfg.gamma * s_zs
    return _Forward(Z, pre, h, u, v, nu, nv, z_fi, z_fr, s_zs, s_fi, s_fr, s_fused)


def _losses(fwd: _Forward, labels: np.ndarray, cfg: TrainConfig) -> LossBreakdown:
    ce = ce_loss(fwd.s_fused, labels, cfg.tau)
    l_r = expected_l1_deviation(fwd.s_fr, fwd.s_zs)
    l_i = expected_l1_deviation(fwd.s_fi, fwd.s_zs)
    l_d = consensus_loss(fwd.s_fr, fwd.s_fi, cfg.tau)
    total = ce + cfg.lambda1 * l_r + cfg.lambda2 * l_i + cfg.lambda3 * l_d
    return LossBreakdown(ce=ce, l_r=l_r, l_i=l_i, l_d=l_d, total=total)


def batch_losses(Z: np.ndarray, labels: np.ndarray, params: ExpertParams,
                 text: EmbeddingMatrix, cfg: TrainConfig) -> LossBreakdown:
    """Loss values only (used by the finite-difference oracle and trainer
    bookkeeping)."""
    return _losses(_forward(Z, params, text.data, cfg), labels, cfg)


def total_loss_and_grad(Z: np.ndarray, labels: np.ndarray, params: ExpertParams,
                        text: EmbeddingMatrix, cfg: TrainConfig,
                        ) -> tuple[LossBreakdown, Grads]:
    """Evaluate the full objective and its exact analytic gradient.

    Z: (N, d) unit-row batch of frozen image features; text rows are frozen
    unit class embeddings. The zero-shot logits receive no gradient.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if Z.shape[0] != labels.shape[0]:
        raise ShapeError("labels length does not match batch")
    T = text.data
    N = Z.shape[0]
    fwd = _forward(Z, params, T, cfg)
    losses = _losses(fwd, labels, cfg)
    if not np.isfinite(losses.total):
        bad = [k for k in ("ce", "l_r", "l_i", "l_d")
               if not np.isfinite(getattr(losses, k))]
        raise NumericalError(f"non-finite loss term(s): {bad}", term=bad[0])

    tau = cfg.tau
    # CE: d/ds_fused = (softmax - onehot) / (N * tau), split by fusion weights.
    p_fused = _softmax(fwd.s_fused / tau)
    g_fused = p_fused.copy()
    g_fused[np.arange(N), labels] -= 1.0
    g_fused /= N * tau

    # consistency prior: sign of the batch-mean deviation, broadcast over
    # the batch; subgradient 0 at the kink
    sgn_r = np.sign((fwd.s_fr - fwd.s_zs).mean(axis=0))
    sgn_i = np.sign((fwd.s_fi - fwd.s_zs).mean(axis=0))
    g_sfr = cfg.alpha * g_fused + cfg.lambda1 * sgn_r[None, :] / N
    g_sfi = cfg.beta * g_fused + cfg.lambda2 * sgn_i[None, :] / N

    # Consensus: 1/2 D_J between the two temperature softmaxes.
    if cfg.lambda3 != 0.0:
        p = _softmax(fwd.s_fr / tau)
        q = _softmax(fwd.s_fi / tau)
        logp = _clamped_log(p)
        logq = _clamped_log(q)
        gp = 0.5 * (logp - logq + 1.0 - q / p)
        gq = 0.5 * (logq - logp + 1.0 - p / q)
        # pull back through softmax: grad_a = p * (g - <p, g>)
        ga_fr = p * (gp - (p * gp).sum(axis=1, keepdims=True))
        ga_fi = q * (gq - (q * gq).sum(axis=1, keepdims=True))
        g_sfr = g_sfr + cfg.lambda3 * ga_fr / (N * tau)
        g_sfi = g_sfi + cfg.lambda3 * ga_fi / (N * tau)

    # logits -> adapter outputs -> pre-normalization residual sums
    g_zfi = g_sfi @ T
    g_u = (g_zfi - (g_zfi * fwd.z_fi).sum(axis=1, keepdims=True) * fwd.z_fi) / fwd.nu
    g_zfr = g_sfr @ T
    g_v = (g_zfr - (g_zfr * fwd.z_fr).sum(axis=1, keepdims=True) * fwd.z_fr) / fwd.nv

    g_fi_weight = g_u.T @ Z
    g_w2 = g_v.T @ fwd.h
    g_b2 = g_v.sum(axis=0)
    g_h = g_v @ params.fr_w2
    g_pre = g_h * (fwd.pre > 0.0)
    g_w1 = g_pre.T @ Z
    g_b1 = g_pre.sum(axis=0)

    grads = Grads(fi_weight=g_fi_weight, fr_w1=g_w1, fr_b1=g_b1,
                  fr_w2=g_w2, fr_b2=g_b2)
    for name in ("fi_weight", "fr_w1", "fr_b1", "fr_w2", "fr_b2"):
        if not np.all(np.isfinite(getattr(grads, name))):
            raise NumericalError(f"non-finite gradient in {name}", term=name)
    return losses, grads


def finite_diff_check(params: ExpertParams, Z: np.ndarray, labels: np.ndarray,
                      text: EmbeddingMatrix, cfg: TrainConfig,
                      step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per coordinate: |a - n| / max(|a|, |n|, 1e-8).

    Coordinates feeding an L1 term whose deviation vector has a component
    within 10*step of zero are skipped: the loss is non-differentiable at
    the kink and the subgradient convention cannot match a secant there.
    """
    if not (1e-7 <= step <= 1e-3):
        raise ParameterError(f"step must lie in [1e-7, 1e-3], got {step}")
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    fwd = _forward(Z, params, text.data, cfg)
    _, grads = total_loss_and_grad(Z, labels, params, text, cfg)

    # Kink proximity per expert: perturbing a refiner parameter moves only
    # the FR deviation, an integrator parameter only the FI deviation.
    fr_near_kink = (cfg.lambda1 > 0
                    and np.abs((fwd.s_fr - fwd.s_zs).mean(axis=0)).min()
                    < 10.0 * step)
    fi_near_kink = (cfg.lambda2 > 0
                    and np.abs((fwd.s_fi - fwd.s_zs).mean(axis=0)).min()
                    < 10.0 * step)
    skip = {"fi_weight": fi_near_kink,
            "fr_w1": fr_near_kink, "fr_b1": fr_near_kink,
            "fr_w2": fr_near_kink, "fr_b2": fr_near_kink}

    # Same principle for the ReLU: a pre-activation within 10*step of zero
    # makes the rows of fr_w1 (and fr_b1 entries) feeding it non-smooth.
    relu_kink = np.any(np.abs(fwd.pre) < 10.0 * step, axis=0)  # per hidden unit

    # The secant is evaluated in extended precision: double-precision loss
    # evaluations leave ~1e-11 of rounding noise in (L+ - L-)/(2*step),
    # which swamps coordinates whose true gradient is below ~1e-6.
    ld = np.longdouble
    Zl = Z.astype(ld)
    Tl = text.data.astype(ld)
    arrays = {name: np.array(getattr(params, name)) for name in
              ("fi_weight", "fr_w1", "fr_b1", "fr_w2", "fr_b2")}
    arrays_l = {name: a.astype(ld) for name, a in arrays.items()}

    def oracle_total(ps):
        u = Zl + Zl @ ps["fi_weight"].T
        z_fi = u / np.sqrt((u * u).sum(axis=1, keepdims=True))
        pre = Zl @ ps["fr_w1"].T + ps["fr_b1"]
        h = np.maximum(pre, ld(0.0))
        v = Zl + h @ ps["fr_w2"].T + ps["fr_b2"]
        z_fr = v / np.sqrt((v * v).sum(axis=1, keepdims=True))
        s_zs = Zl @ Tl.T
        s_fi = z_fi @ Tl.T
        s_fr = z_fr @ Tl.T
        s = cfg.alpha * s_fr + cfg.beta * s_fi + cfg.gamma * s_zs
        a = s / ld(cfg.tau)
        m = a.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(a - m).sum(axis=1))
        ce = np.mean(lse - a[np.arange(len(labels)), labels])
        l_r = np.abs((s_fr - s_zs).mean(axis=0)).sum()
        l_i = np.abs((s_fi - s_zs).mean(axis=0)).sum()
        p = np.exp(s_fr / ld(cfg.tau) - (s_fr / ld(cfg.tau)).max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        q = np.exp(s_fi / ld(cfg.tau) - (s_fi / ld(cfg.tau)).max(axis=1, keepdims=True))
        q /= q.sum(axis=1, keepdims=True)
        floor = ld(PROB_FLOOR)
        dj = ((p - q) * (np.log(np.maximum(p, floor))
                         - np.log(np.maximum(q, floor)))).sum(axis=1)
        l_d = np.mean(0.5 * dj)
        return ce + cfg.lambda1 * l_r + cfg.lambda2 * l_i + cfg.lambda3 * l_d

    def loss_with(name, flat_idx, value):
        mod = dict(arrays_l)
        a = mod[name].copy()
        a.flat[flat_idx] = value
        mod[name] = a
        return oracle_total(mod)

    max_err = 0.0
    for name, arr in arrays.items():
        if skip[name]:
            continue
        g = getattr(grads, name)
        for k in range(arr.size):
            if name in ("fr_w1", "fr_b1"):
                unit = k // arr.shape[1] if name == "fr_w1" else k
                if relu_kink[unit]:
                    continue
            base = arrays_l[name].flat[k]
            lp = loss_with(name, k, base + ld(step))
            lm = loss_with(name, k, base - ld(step))
            n = float((lp - lm) / (ld(2.0) * ld(step)))
            a = g.flat[k]
            err = abs(a - n) / max(abs(a), abs(n), 1e-8)
            max_err = max(max_err, err)
    return max_err
