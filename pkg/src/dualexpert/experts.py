"""The two adapter heads over precomputed unit features, the frozen
zero-shot head, and logit fusion.

Both heads are residual corrections initialized to the exact identity:

  integrator (FI):  z -> normalize(z + W z)            with W = 0 at init
  refiner   (FR):   z -> normalize(z + W2 relu(W1 z + b1) + b2)
                                                       with W2 = b2 = 0

so a freshly initialized model reproduces zero-shot predictions bitwise.
The integrator is the low-capacity conservative expert, the refiner the
higher-capacity adaptive one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    FormatError,
    NumericalError,
    ParameterError,
    ShapeError,
    TruncatedFileError,
)
from .store import EmbeddingMatrix
from .config import TrainConfig


@dataclass(frozen=True)
class ExpertParams:
    fi_weight: np.ndarray  # (d, d), zero at init
    fr_w1: np.ndarray  # (h, d)
    fr_b1: np.ndarray  # (h,)
    fr_w2: np.ndarray  # (d, h), zero at init
    fr_b2: np.ndarray  # (d,), zero at init

    def __post_init__(self):
        d = self.fi_weight.shape[0]
        h = self.fr_w1.shape[0]
        if self.fi_weight.shape != (d, d):
            raise ShapeError("fi_weight must be square")
        if self.fr_w1.shape != (h, d) or self.fr_b1.shape != (h,):
            raise ShapeError("fr_w1/fr_b1 shapes inconsistent")
        if self.fr_w2.shape != (d, h) or self.fr_b2.shape != (d,):
            raise ShapeError("fr_w2/fr_b2 shapes inconsistent")
        for name in ("fi_weight", "fr_w1", "fr_b1", "fr_w2", "fr_b2"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"non-finite values in {name}", term=name)

    @property
    def dim(self) -> int:
        return self.fi_weight.shape[0]

    @property
    def hidden(self) -> int:
        return self.fr_w1.shape[0]


FIELD_ORDER = ("fi_weight", "fr_w1", "fr_b1", "fr_w2", "fr_b2")


def init_params(d: int, hidden_dim: int = 0, seed: int = 0) -> ExpertParams:
    """Identity-initialized parameters. hidden_dim 0 means 4*d.

    fr_w1 gets fan-in uniform init (the refiner's hidden features exist from
    step one); everything that feeds the residual starts at zero.
    """
    if d < 1:
        raise ParameterError("feature dimension must be >= 1")
    h = hidden_dim if hidden_dim else 4 * d
    rng = np.random.Generator(np.random.PCG64(seed))
    bound = 1.0 / np.sqrt(d)
    return ExpertParams(
        fi_weight=np.zeros((d, d)),
        fr_w1=rng.uniform(-bound, bound, size=(h, d)),
        fr_b1=np.zeros(h),
        fr_w2=np.zeros((d, h)),
        fr_b2=np.zeros(d),
    )


def _renormalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-30):
        raise NumericalError("adapter output has zero norm", term="normalize")
    return v / n


def fi_forward(z: np.ndarray, p: ExpertParams) -> np.ndarray:
    """Integrator head; rows of z must be unit-norm."""
    r = z @ p.fi_weight.T
    if not r.any():
        # exact identity at zero init: renormalizing would perturb the last
        # bits of inputs whose norm is only 1.0 up to rounding
        return np.array(z, dtype=np.float64)
    return _renormalize(z + r)


def fr_forward(z: np.ndarray, p: ExpertParams) -> np.ndarray:
    """Refiner head; rows of z must be unit-norm."""
    h = np.maximum(z @ p.fr_w1.T + p.fr_b1, 0.0)
    r = h @ p.fr_w2.T + p.fr_b2
    if not r.any():
        return np.array(z, dtype=np.float64)
    return _renormalize(z + r)


def fuse_logits(s_fr, s_fi, s_zs, alpha: float, beta: float) -> np.ndarray:
    """alpha*s_FR + beta*s_FI + (1-alpha-beta)*s_ZS."""
    if alpha < 0 or beta < 0:
        raise ParameterError("fusion weights must be >= 0")
    if alpha + beta > 1.0 + 1e-12:
        raise ParameterError(f"alpha + beta = {alpha + beta:g} exceeds 1")
    s_fr, s_fi, s_zs = (np.asarray(a, dtype=np.float64) for a in (s_fr, s_fi, s_zs))
    if not (s_fr.shape == s_fi.shape == s_zs.shape):
        raise ShapeError("logit vectors have mismatched shapes")
    if np.array_equal(s_fr, s_zs) and np.array_equal(s_fi, s_zs):
        # the weights sum to 1, so three identical inputs must come back
        # unchanged -- bitwise, not just up to rounding
        return np.array(s_zs)
    return alpha * s_fr + beta * s_fi + (1.0 - alpha - beta) * s_zs


@dataclass(frozen=True)
class ExpertOutputs:
    z_fi: np.ndarray
    z_fr: np.ndarray
    z_zs: np.ndarray
    s_fi: np.ndarray
    s_fr: np.ndarray
    s_zs: np.ndarray
    s_fused: np.ndarray


def forward(z: np.ndarray, p: ExpertParams, text: EmbeddingMatrix,
            cfg: TrainConfig) -> ExpertOutputs:
    """All three expert views plus fused logits. Works on a single unit
    feature (d,) or a batch (n, d)."""
    T = text.data
    if z.shape[-1] != T.shape[1]:
        raise ShapeError(f"feature dim {z.shape[-1]} vs text dim {T.shape[1]}")
    z_fi = fi_forward(z, p)
    z_fr = fr_forward(z, p)
    s_zs = z @ T.T
    s_fi = z_fi @ T.T
    s_fr = z_fr @ T.T
    s_fused = fuse_logits(s_fr, s_fi, s_zs, cfg.alpha, cfg.beta)
    return ExpertOutputs(z_fi=z_fi, z_fr=z_fr, z_zs=z, s_fi=s_fi, s_fr=s_fr,
                         s_zs=s_zs, s_fused=s_fused)


def predict(z: np.ndarray, p: ExpertParams, text: EmbeddingMatrix,
            cfg: TrainConfig) -> tuple[int, ExpertOutputs]:
    """Fused-logit argmax for one feature vector; ties go to the lowest
    class index."""
    out = forward(z, p, text, cfg)
    return int(np.argmax(out.s_fused)), out


_BLOCK_HEADER = struct.Struct("<4sII")


def save_params(path, p: ExpertParams) -> None:
    """Serialize as five consecutive CMF1 blocks in FIELD_ORDER; vectors are
    written as 1-row matrices."""
    with open(path, "wb") as f:
        for name in FIELD_ORDER:
            arr = np.atleast_2d(getattr(p, name))
            f.write(_BLOCK_HEADER.pack(b"CMF1", arr.shape[0], arr.shape[1]))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_params(path) -> ExpertParams:
    """Read the five-block CMF1 container written by save_params."""
    blocks = []
    with open(path, "rb") as f:
        raw = f.read()
    off = 0
    for name in FIELD_ORDER:
        if off + _BLOCK_HEADER.size > len(raw):
            raise TruncatedFileError(f"{path}: missing block {name}")
        magic, rows, cols = _BLOCK_HEADER.unpack_from(raw, off)
        if magic != b"CMF1":
            raise BadMagicError(f"{path}: bad magic in block {name}")
        off += _BLOCK_HEADER.size
        nbytes = 4 * rows * cols
        if off + nbytes > len(raw):
            raise TruncatedFileError(f"{path}: truncated block {name}")
        arr = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=off)
        blocks.append(arr.astype(np.float64).reshape(rows, cols))
        off += nbytes
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    fi_weight, fr_w1, fr_b1, fr_w2, fr_b2 = blocks
    return ExpertParams(
        fi_weight=fi_weight,
        fr_w1=fr_w1,
        fr_b1=fr_b1.ravel(),
        fr_w2=fr_w2,
        fr_b2=fr_b2.ravel(),
    )
