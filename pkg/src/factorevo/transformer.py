"""Forward-only decoder transformer and the language-modeling fitness.

Block layout (pre-norm): ``x + attn(LN(x))`` then ``x + FF(LN(x))`` with a
ReLU feed-forward, followed by a final LayerNorm and the output head. All
LayerNorms are parameter-free (scale 1, shift 0). Positions are encoded with
fixed sinusoids unless ``positional="learned"``. By default the output head
reuses the embedding matrix (transposed) and adds an evolvable bias vector.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .layers import ArchitectureSpec, LayerSpec, Phenotype, TensorSpec
from .tensor import DTYPE, layer_norm, log_softmax_rows, softmax_rows


@dataclass(frozen=True)
class TransformerConfig:
    n_blocks: int = 3
    n_heads: int = 4
    head_dim: int = 4
    hidden_dim: int = 32
    ff_dim: int = 128
    vocab_size: int = 2048
    max_seq_len: int = 256
    tie_output: bool = True
    output_bias: bool = True
    positional: str = "sinusoidal"  # or "learned"

    def __post_init__(self):
        for name in ("n_blocks", "n_heads", "head_dim", "hidden_dim", "ff_dim", "vocab_size", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.positional not in ("sinusoidal", "learned"):
            raise ValueError(f"unknown positional encoding {self.positional!r}")

    def describe(self) -> str:
        head = "tied to embedding" if self.tie_output else "separate matrix"
        return (f"positional={self.positional}; output head {head}"
                f"{' + bias' if self.output_bias else ''}; LayerNorm frozen (not counted)")


def transformer_arch(cfg: TransformerConfig, representation: str = "nonfactorized",
                     embedding_rank: int | None = None, rank: int | None = None,
                     name: str = "transformer") -> ArchitectureSpec:
    """Expand a config into the ordered layer list used by :func:`forward`."""
    if representation != "factorized":
        embedding_rank = rank = None
    d = cfg.hidden_dim
    layers = [LayerSpec.embedding(cfg.vocab_size, d, embedding_rank)]
    if cfg.positional == "learned":
        layers.append(LayerSpec("positional", (TensorSpec("pos", cfg.max_seq_len, d, None, bias=False),), dim=d))
    for _ in range(cfg.n_blocks):
        layers += [
            LayerSpec.layernorm(d),
            LayerSpec.attention(d, cfg.n_heads, cfg.head_dim, rank),
            LayerSpec.layernorm(d),
            LayerSpec.dense(d, cfg.ff_dim, rank, "relu", name="ff1"),
            LayerSpec.dense(cfg.ff_dim, d, rank, None, name="ff2"),
        ]
    layers += [LayerSpec.layernorm(d), LayerSpec.head(d, cfg.vocab_size, cfg.tie_output, cfg.output_bias, rank)]
    ranks = {}
    if representation == "factorized":
        ranks = {"embedding_rank": embedding_rank, "rank": rank}
    return ArchitectureSpec(name, "transformer", representation, tuple(layers),
                            transformer=asdict(cfg), ranks=ranks)


def config_of(arch: ArchitectureSpec) -> TransformerConfig:
    if arch.family != "transformer":
        raise ValueError("not a transformer architecture")
    return TransformerConfig(**arch.transformer)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(0, dim, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((length, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe


def _attention(h: np.ndarray, params: list, n_heads: int, head_dim: int) -> np.ndarray:
    (wq, bq), (wk, bk), (wv, bv), (wo, bo) = params
    L = h.shape[0]

    def split(x):
        return x.reshape(L, n_heads, head_dim).transpose(1, 0, 2)

    q = split(h @ wq + bq)
    k = split(h @ wk + bk)
    v = split(h @ wv + bv)
    scores = q @ k.transpose(0, 2, 1) / math.sqrt(head_dim)
    mask = np.triu(np.ones((L, L), dtype=bool), k=1)
    scores = np.where(mask, -np.inf, scores)
    attn = softmax_rows(scores) @ v  # (heads, L, head_dim)
    return attn.transpose(1, 0, 2).reshape(L, n_heads * head_dim) @ wo + bo


def forward(phenotype: Phenotype, tokens: Sequence[int]) -> np.ndarray:
    """Logits ``(len, vocab)`` for one sequence; position ``i`` sees tokens ``<= i``."""
    arch = phenotype.arch
    cfg = config_of(arch)
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValueError("tokens must be a non-empty 1-D sequence")
    if tokens.min() < 0 or tokens.max() >= cfg.vocab_size:
        raise ValueError(f"token id out of range [0, {cfg.vocab_size})")
    if tokens.size > cfg.max_seq_len:
        tokens = tokens[: cfg.max_seq_len]
    L = tokens.size
    params = phenotype.float64()
    embed = params[0][0][0]
    x = embed[tokens]
    li = 1
    if cfg.positional == "learned":
        x = x + params[1][0][0][:L]
        li = 2
    else:
        x = x + sinusoidal_positions(L, cfg.hidden_dim)
    for _ in range(cfg.n_blocks):
        attn_layer = arch.layers[li + 1]
        x = x + _attention(layer_norm(x), params[li + 1], attn_layer.n_heads, attn_layer.head_dim)
        (w1, b1), = params[li + 3]
        (w2, b2), = params[li + 4]
        f = np.maximum(layer_norm(x) @ w1 + b1, 0.0)
        x = x + (f @ w2 + b2)
        li += 5
    h = layer_norm(x)
    head = params[li + 1]
    if cfg.tie_output:
        logits = h @ embed.T
        if head:
            logits = logits + head[0][1]
    else:
        w, b = head[0]
        logits = h @ w + (b if b is not None else 0.0)
    return logits.astype(DTYPE)


def sequence_nll(logits: np.ndarray, targets: np.ndarray) -> tuple[float, int]:
    """Summed next-token negative log-likelihood and the number of positions."""
    logp = log_softmax_rows(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(len(targets)), targets].sum()), len(targets)


def lm_fitness(phenotype: Phenotype, batch: Sequence[Sequence[int]]) -> float:
    """Negative mean cross-entropy over every next-token position in ``batch``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    max_len = config_of(phenotype.arch).max_seq_len
    total, count = 0.0, 0
    for seq in batch:
        seq = np.asarray(seq, dtype=np.int64)[:max_len]
        if seq.size < 2:
            raise ValueError("every sequence needs at least two tokens")
        nll, n = sequence_nll(forward(phenotype, seq[:-1]), seq[1:])
        total += nll
        count += n
    return -total / count
