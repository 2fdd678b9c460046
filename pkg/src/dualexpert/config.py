"""Training configuration: fusion weights, loss weights, temperature, and
the optimizer schedule. Defaults follow the standard recipe this method is
trained with (alpha = beta = 0.2, lambda1 = lambda2 = lambda3 = 0.1, SGD
with one warmup epoch then cosine decay).

The temperature default 0.01 is the usual CLIP-style logit scale of 100,
applied as logits/tau inside every softmax. The Laplace scale b never
enters the loss (1/b is absorbed into lambda1/lambda2); it is kept here
only for the prior-equivalence verification path.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

from .errors import ParameterError


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.2  # weight of the refiner (FR) logits
    beta: float = 0.2  # weight of the integrator (FI) logits
    lambda1: float = 0.1  # FR logit-consistency weight
    lambda2: float = 0.1  # FI logit-consistency weight
    lambda3: float = 0.1  # consensus (Jeffreys) weight
    tau: float = 0.01
    b: float = 1.0
    epochs: int = 50
    warmup_lr: float = 1e-5
    peak_lr: float = 2e-3
    batch_size: int = 32
    hidden_dim: int = 0  # 0 means "4 * feature dim", resolved at init
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be >= 0")
        if self.alpha + self.beta > 1.0 + 1e-12:
            raise ParameterError(
                f"alpha + beta = {self.alpha + self.beta:g} exceeds 1"
            )
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ParameterError("loss weights must be >= 0")
        if self.tau <= 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        if self.b <= 0:
            raise ParameterError(f"b must be > 0, got {self.b}")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if self.warmup_lr <= 0 or self.peak_lr <= 0:
            raise ParameterError("learning rates must be > 0")
        if self.warmup_lr > self.peak_lr:
            raise ParameterError("warmup_lr must not exceed peak_lr")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.hidden_dim < 0:
            raise ParameterError("hidden_dim must be >= 0")

    @property
    def gamma(self) -> float:
        return 1.0 - self.alpha - self.beta

    def with_overrides(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "TrainConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))
