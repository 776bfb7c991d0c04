"""Decision-level fusion of per-method distance vectors.

Weighted-sum fusion combines L2-normalized distance vectors linearly with
weights summing to 1; product fusion multiplies them componentwise. Either
way the output is re-normalized to unit L2 (argmin is unaffected).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, ConfigError, DimensionError
from .recognition import BASE_METHODS, DistanceVector

MODE_WEIGHTED_SUM = "weighted_sum"
MODE_PRODUCT = "product"


@dataclass(frozen=True)
class FusionSpec:
    mode: str
    inputs: tuple  # ordered subset of {"ICP", "BoW", "iCLAP"}, >= 2 entries
    weights: tuple = None  # weighted_sum only; non-negative, sums to 1

    def __post_init__(self):
        if self.mode not in (MODE_WEIGHTED_SUM, MODE_PRODUCT):
            raise ConfigError(f"unknown fusion mode {self.mode!r}")
        inputs = tuple(self.inputs)
        if len(inputs) < 2:
            raise ConfigError("fusion requires at least two inputs")
        if len(set(inputs)) != len(inputs):
            raise ConfigError("fusion inputs must be distinct")
        for m in inputs:
            if m not in BASE_METHODS:
                raise ConfigError(f"unknown method {m!r}; valid: {list(BASE_METHODS)}")
        if self.mode == MODE_WEIGHTED_SUM:
            if self.weights is None or len(self.weights) != len(inputs):
                raise ConfigError("weighted_sum needs one weight per input")
            weights = tuple(float(w) for w in self.weights)
            if any(w < 0 for w in weights):
                raise ConfigError("weights must be non-negative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ConfigError(f"weights must sum to 1, got {sum(weights)}")
            object.__setattr__(self, "weights", weights)
        elif self.weights is not None:
            raise ConfigError("product fusion takes no weights")
        object.__setattr__(self, "inputs", inputs)

    @property
    def name(self) -> str:
        if self.mode == MODE_WEIGHTED_SUM:
            parts = [f"{m}={w:g}" for m, w in zip(self.inputs, self.weights)]
            return f"weighted_sum({','.join(parts)})"
        return f"product({','.join(self.inputs)})"


def fuse(spec: FusionSpec, vectors: dict) -> DistanceVector:
    """Combine per-method DistanceVectors according to spec.

    ``vectors`` maps method name to its DistanceVector; every spec input must
    be present, and all inputs must share model count and ordering.
    """
    missing = [m for m in spec.inputs if m not in vectors]
    if missing:
        raise ConfigError(f"missing input vectors for {missing}")
    selected = [vectors[m] for m in spec.inputs]
    model_ids = selected[0].model_ids
    for v in selected[1:]:
        if len(v.distances) != len(model_ids):
            raise DimensionError("fusion inputs must have equal model counts")
        if v.model_ids != model_ids:
            raise DimensionError("fusion inputs must share model ordering")

    if spec.mode == MODE_WEIGHTED_SUM:
        combined = np.zeros(len(model_ids))
        for w, v in zip(spec.weights, selected):
            combined += w * v.distances
    else:
        combined = np.ones(len(model_ids))
        for v in selected:
            combined = combined * v.distances
        if not combined.any():
            raise ClassificationError("product fusion produced an all-zero vector")
    return DistanceVector(spec.name, model_ids, combined)
