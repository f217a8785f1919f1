"""Forward pass of conv/dense policy networks."""

from __future__ import annotations

import numpy as np

from ..layers import Phenotype
from ..tensor import DTYPE, conv2d_forward, matmul, relu


def policy_forward(phenotype: Phenotype, obs: np.ndarray) -> np.ndarray:
    """Output logits of a convnet phenotype for one observation ``(C, H, W)``."""
    arch = phenotype.arch
    x = np.asarray(obs, dtype=DTYPE)
    if tuple(x.shape) != tuple(arch.input_shape):
        raise ValueError(f"observation shape {x.shape} does not match network input {arch.input_shape}")
    for layer, params in zip(arch.layers, phenotype.layers):
        (w, b), = params
        if layer.kind == "conv":
            x = conv2d_forward(x, w, b, layer.stride)
        else:
            x = matmul(x.reshape(1, -1), w)[0] + b
        if layer.activation == "relu":
            x = relu(x)
    return x


def act(phenotype: Phenotype, obs: np.ndarray) -> int:
    """Greedy action: index of the largest logit (first one on ties)."""
    return int(np.argmax(policy_forward(phenotype, obs)))
