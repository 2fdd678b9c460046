"""Divergences and geodesic distance on the probability simplex, plus the
numerical checks behind the two consistency arguments: the Laplace-prior /
L1 identity and the fourth-order agreement between Jeffreys divergence and
squared geodesic distance.

These are verification tools: boundary inputs are rejected outright, and
nothing here clamps or regularizes. Training-time clamping lives in
objectives.py.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ParameterError, ShapeError

# Scales below this make the Jeffreys-minus-squared-distance residual
# (O(eps^4)) indistinguishable from double-precision cancellation noise.
MIN_RESIDUAL_SCALE = 1e-4


def _as_prob(p, name="p", interior=True) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ShapeError(f"{name} must be a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"{name} has non-finite components")
    if interior:
        if np.any(p <= 0.0):
            raise DomainError(f"{name} has a boundary/negative component")
    elif np.any(p < 0.0):
        raise DomainError(f"{name} has a negative component")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"{name} sums to {p.sum():.12g}, not 1")
    return p


def softmax_temp(s, tau: float) -> np.ndarray:
    """Temperature softmax p_i = exp(s_i/tau) / sum_j exp(s_j/tau).

    Stabilized by max subtraction; works on the last axis of a batch too.
    """
    if tau <= 0:
        raise ParameterError(f"temperature must be > 0, got {tau}")
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise DomainError("logits have non-finite components")
    a = s / tau
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def kl_divergence(p, q) -> float:
    """KL(p || q) = sum_i p_i ln(p_i / q_i) for strictly interior p, q."""
    p = _as_prob(p, "p")
    q = _as_prob(q, "q")
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(np.sum(p * (np.log(p) - np.log(q))))


def jeffreys(p, q) -> float:
    """Symmetrized KL: KL(p||q) + KL(q||p)."""
    return kl_divergence(p, q) + kl_divergence(q, p)


def fisher_rao_distance(p, q) -> float:
    """Geodesic distance on the simplex under the Fisher information metric.

    Closed form via the sphere embedding: 2*arccos(sum_i sqrt(p_i q_i)),
    valid on the boundary too. Range [0, pi].
    """
    p = _as_prob(p, "p", interior=False)
    q = _as_prob(q, "q", interior=False)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    c = np.clip(np.sum(np.sqrt(p * q)), -1.0, 1.0)
    return float(2.0 * np.arccos(c))


def geodesic_residual_order(p, direction, scales) -> float:
    """Fit the order of |D_J - d^2| in the perturbation size.

    For q = p + eps*direction, returns the least-squares slope of
    ln|D_J(p,q) - d(p,q)^2| against ln eps. Fourth-order agreement shows up
    as a slope near 4.
    """
    p = _as_prob(p, "p")
    v = np.asarray(direction, dtype=np.float64)
    if v.shape != p.shape:
        raise ShapeError(f"direction shape {v.shape} does not match p {p.shape}")
    if abs(v.sum()) > 1e-9:
        raise DomainError(f"direction components must sum to 0, got {v.sum():.3g}")
    eps = np.asarray(scales, dtype=np.float64)
    if eps.ndim != 1 or len(eps) < 4:
        raise ParameterError("need at least 4 scales")
    if np.any(eps <= 0):
        raise ParameterError("scales must be positive")
    if np.any(eps < MIN_RESIDUAL_SCALE):
        raise ParameterError(
            f"scales below {MIN_RESIDUAL_SCALE:g} are rejected (cancellation)"
        )
    if eps.max() / eps.min() < 10.0:
        raise ParameterError("scales must span at least one decade")

    residuals = []
    for e in eps:
        q = p + e * v
        if np.any(q <= 0.0):
            raise DomainError(f"perturbed point leaves the interior at scale {e:g}")
        r = abs(jeffreys(p, q) - fisher_rao_distance(p, q) ** 2)
        residuals.append(r)
    slope = np.polyfit(np.log(eps), np.log(residuals), 1)[0]
    return float(slope)


def laplace_neg_log_prior(delta, b: float) -> float:
    """Negative log density of an i.i.d. zero-mean Laplace vector.

    Equals C*ln(2b) + ||delta||_1 / b, the identity behind reading the L1
    consistency penalty as a Laplace prior on the logit deviation.
    """
    if b <= 0:
        raise ParameterError(f"scale b must be > 0, got {b}")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.ndim != 1:
        raise ShapeError(f"delta must be a vector, got shape {delta.shape}")
    return float(len(delta) * np.log(2.0 * b) + np.abs(delta).sum() / b)
