"""Layer genotypes, their initialization and development, and parameter counting.

A weight matrix ``(m, n)`` is stored either directly or as a pair of factors
``(m, k)`` and ``(k, n)`` whose product is the developed weight. Biases are
always direct vectors of length ``n``. Kaiming-style standard deviations use
``c`` = the column count of each matrix as stored:

* direct weight: ``sqrt(2 / c)``
* each factor:   ``sqrt(sqrt(2) / c)``
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import rng
from .tensor import DTYPE, matmul, reshape_to_conv, conv_output_size

DIRECT = "direct"
FACTORIZED = "factorized"

REPRESENTATIONS = ("factorized", "nonfactorized", "small")
LAYER_KINDS = ("dense", "conv", "embedding", "attention", "layernorm", "head")


class ArchitectureError(ValueError):
    pass


@dataclass(frozen=True)
class TensorSpec:
    """Template for one weight matrix (optionally factorized) plus its bias."""

    name: str
    rows: int
    cols: int
    rank: int | None = None
    bias: bool = True
    weight: bool = True  # False: bias-only vector (tied output head)

    @property
    def mode(self) -> str:
        return FACTORIZED if self.rank else DIRECT

    @property
    def genotype_size(self) -> int:
        n = self.cols if self.bias else 0
        if not self.weight:
            return n
        if self.rank:
            return self.rank * (self.rows + self.cols) + n
        return self.rows * self.cols + n

    @property
    def phenotype_size(self) -> int:
        n = self.cols if self.bias else 0
        return (self.rows * self.cols if self.weight else 0) + n

    def weight_std(self) -> float:
        return math.sqrt(2.0 / self.cols)

    def factor_stds(self) -> tuple[float, float]:
        assert self.rank
        return math.sqrt(math.sqrt(2.0) / self.rank), math.sqrt(math.sqrt(2.0) / self.cols)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    tensors: tuple[TensorSpec, ...] = ()
    activation: str | None = None
    # conv metadata
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple[int, int] = (0, 0)
    stride: int = 1
    # attention metadata
    n_heads: int = 0
    head_dim: int = 0
    dim: int = 0

    @classmethod
    def dense(cls, n_in: int, n_out: int, rank: int | None = None, activation: str | None = "relu",
              name: str = "w") -> "LayerSpec":
        return cls("dense", (TensorSpec(name, n_in, n_out, rank),), activation=activation, dim=n_in)

    @classmethod
    def conv(cls, cin: int, cout: int, kernel, stride: int, rank: int | None = None) -> "LayerSpec":
        kh, kw = (kernel, kernel) if isinstance(kernel, int) else tuple(kernel)
        t = TensorSpec("w", cin * kh * kw, cout, rank)
        return cls("conv", (t,), activation="relu", in_channels=cin, out_channels=cout,
                   kernel=(kh, kw), stride=stride)

    @classmethod
    def embedding(cls, vocab: int, dim: int, rank: int | None = None) -> "LayerSpec":
        return cls("embedding", (TensorSpec("embed", vocab, dim, rank, bias=False),), dim=dim)

    @classmethod
    def attention(cls, dim: int, n_heads: int, head_dim: int, rank: int | None = None) -> "LayerSpec":
        inner = n_heads * head_dim
        ts = tuple(TensorSpec(n, dim, inner, rank) for n in ("q", "k", "v")) + (TensorSpec("o", inner, dim, rank),)
        return cls("attention", ts, n_heads=n_heads, head_dim=head_dim, dim=dim)

    @classmethod
    def layernorm(cls, dim: int) -> "LayerSpec":
        return cls("layernorm", (), dim=dim)

    @classmethod
    def head(cls, dim: int, vocab: int, tied: bool, bias: bool = True, rank: int | None = None) -> "LayerSpec":
        if tied:
            ts = (TensorSpec("out_bias", 0, vocab, None, bias=True, weight=False),) if bias else ()
        else:
            ts = (TensorSpec("out", dim, vocab, rank, bias=bias),)
        return cls("head", ts, dim=dim)

    def to_dict(self) -> dict[str, Any]:
        t = self.tensors[0] if self.tensors else None
        if self.kind == "conv":
            return {"kind": "conv", "in": self.in_channels, "out": self.out_channels,
                    "kernel": list(self.kernel), "stride": self.stride, "rank": t.rank}
        if self.kind == "dense":
            return {"kind": "dense", "in": t.rows, "out": t.cols, "rank": t.rank, "activation": self.activation}
        raise ArchitectureError(f"layer kind {self.kind!r} is not serialized individually")


@dataclass(frozen=True)
class ArchitectureSpec:
    """Network description shared by every individual in a run."""

    name: str
    family: str  # "convnet" | "transformer"
    representation: str
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...] = ()
    transformer: dict[str, Any] | None = None
    ranks: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    # -- checks ---------------------------------------------------------------
    def validate(self) -> None:
        if self.representation not in REPRESENTATIONS:
            raise ArchitectureError(f"unknown representation {self.representation!r}")
        ranked = [t for _, _, t in self.iter_tensors() if t.rank]
        if self.representation != "factorized" and ranked:
            raise ArchitectureError("ranks are only allowed in the factorized representation")
        for _, _, t in self.iter_tensors():
            if t.rank is not None and t.rank < 1:
                raise ArchitectureError(f"tensor {t.name}: rank must be >= 1")
        if self.family == "convnet":
            if self.layers and self.layers[-1].tensors[0].rank:
                raise ArchitectureError("the output layer must be non-factorized")
            self.feature_shapes()

    def feature_shapes(self) -> list[tuple[int, ...]]:
        """Output shape after each layer of a convnet; raises on inconsistent dims."""
        shape = tuple(self.input_shape)
        shapes = []
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    raise ArchitectureError(f"layer {i}: conv expects {layer.in_channels} channels, got {shape}")
                kh, kw = layer.kernel
                try:
                    shape = (layer.out_channels, conv_output_size(shape[1], kh, layer.stride),
                             conv_output_size(shape[2], kw, layer.stride))
                except ValueError as exc:
                    raise ArchitectureError(f"layer {i}: {exc}") from None
            elif layer.kind == "dense":
                flat = int(np.prod(shape))
                if flat != layer.tensors[0].rows:
                    raise ArchitectureError(
                        f"layer {i}: dense expects {layer.tensors[0].rows} inputs, previous layer yields {flat}")
                shape = (layer.tensors[0].cols,)
            else:
                raise ArchitectureError(f"layer {i}: kind {layer.kind!r} not valid in a convnet")
            shapes.append(shape)
        return shapes

    def iter_tensors(self):
        for li, layer in enumerate(self.layers):
            for ti, t in enumerate(layer.tensors):
                yield li, ti, t

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].tensors[0].cols

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        if self.family == "transformer":
            d = {"name": self.name, "family": "transformer", "representation": self.representation,
                 "transformer": dict(self.transformer)}
            d.update(self.ranks)
            return d
        return {"name": self.name, "family": "convnet", "representation": self.representation,
                "input_shape": list(self.input_shape), "layers": [l.to_dict() for l in self.layers]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ArchitectureSpec":
        family = d.get("family", "convnet")
        if family == "transformer":
            from .transformer import TransformerConfig, transformer_arch

            cfg = TransformerConfig(**d["transformer"])
            return transformer_arch(cfg, d.get("representation", "nonfactorized"),
                                    embedding_rank=d.get("embedding_rank"), rank=d.get("rank"),
                                    name=d.get("name", "transformer"))
        if family != "convnet":
            raise ArchitectureError(f"unknown family {family!r}")
        layers = []
        for i, ld in enumerate(d["layers"]):
            kind = ld.get("kind")
            if kind == "conv":
                layers.append(LayerSpec.conv(ld["in"], ld["out"], ld["kernel"], ld.get("stride", 1), ld.get("rank")))
            elif kind == "dense":
                last = i == len(d["layers"]) - 1
                act = ld.get("activation", None if last else "relu")
                layers.append(LayerSpec.dense(ld["in"], ld["out"], ld.get("rank"), act))
            else:
                raise ArchitectureError(f"layer {i}: unknown kind {kind!r}")
        return cls(d.get("name", "convnet"), "convnet", d.get("representation", "nonfactorized"),
                   tuple(layers), tuple(d.get("input_shape", ())))

    @classmethod
    def load(cls, path) -> "ArchitectureSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- genotypes ----------------------------------------------------------------

@dataclass
class TensorGenotype:
    spec: TensorSpec
    weight: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    bias: np.ndarray | None = None

    @property
    def mode(self) -> str:
        return self.spec.mode

    def arrays(self) -> list[np.ndarray]:
        return [a for a in (self.weight, self.u, self.v, self.bias) if a is not None]

    def copy(self) -> "TensorGenotype":
        return TensorGenotype(self.spec, *(None if a is None else a.copy()
                                           for a in (self.weight, self.u, self.v, self.bias)))


def init_tensor(spec: TensorSpec, seed: int, layer_index: int, tensor_index: int) -> TensorGenotype:
    """Fresh genotype for ``spec`` drawn from the substreams of ``seed``."""
    bias = np.zeros(spec.cols, dtype=DTYPE) if spec.bias else None
    if not spec.weight:
        return TensorGenotype(spec, bias=bias)
    lab = (layer_index, tensor_index)
    if spec.rank:
        su, sv = spec.factor_stds()
        u = rng.gaussian(seed, lab + (rng.PURPOSE_FACTOR_U,), (spec.rows, spec.rank), su)
        v = rng.gaussian(seed, lab + (rng.PURPOSE_FACTOR_V,), (spec.rank, spec.cols), sv)
        return TensorGenotype(spec, u=u, v=v, bias=bias)
    w = rng.gaussian(seed, lab + (rng.PURPOSE_FACTOR_U,), (spec.rows, spec.cols), spec.weight_std())
    return TensorGenotype(spec, weight=w, bias=bias)


def develop_tensor(g: TensorGenotype) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Developed ``(weight, bias)``; factorized weights become ``u @ v``."""
    if not g.spec.weight:
        return None, g.bias
    if g.spec.rank:
        return matmul(g.u, g.v), g.bias
    return g.weight, g.bias


def develop_layer(layer: LayerSpec, tensors: list[TensorGenotype]) -> list[tuple]:
    out = []
    for g in tensors:
        w, b = develop_tensor(g)
        if layer.kind == "conv":
            w = reshape_to_conv(w, (layer.in_channels, layer.out_channels, *layer.kernel))
        out.append((w, b))
    return out


# -- counting -----------------------------------------------------------------

def param_table(arch: ArchitectureSpec) -> list[dict[str, Any]]:
    """Per-layer genotype and phenotype parameter counts."""
    rows = []
    for i, layer in enumerate(arch.layers):
        if not layer.tensors:
            continue
        rows.append({
            "layer": i,
            "kind": layer.kind,
            "shape": ";".join(f"{t.name}:{t.rows}x{t.cols}" + (f"@r{t.rank}" if t.rank else "")
                              for t in layer.tensors),
            "genotype": sum(t.genotype_size for t in layer.tensors),
            "phenotype": sum(t.phenotype_size for t in layer.tensors),
        })
    return rows


def count_params(arch: ArchitectureSpec, which: str = "genotype") -> int:
    if which not in ("genotype", "phenotype"):
        raise ValueError(f"which must be 'genotype' or 'phenotype', not {which!r}")
    return sum(getattr(t, f"{which}_size") for _, _, t in arch.iter_tensors())


def with_representation(arch: ArchitectureSpec, representation: str, rank: int | None) -> ArchitectureSpec:
    """Same convnet dims with every non-output layer set to ``rank`` (or direct)."""
    if arch.family != "convnet":
        raise ArchitectureError("with_representation applies to convnets")
    layers = []
    for i, layer in enumerate(arch.layers):
        r = rank if i < len(arch.layers) - 1 else None
        layers.append(replace(layer, tensors=tuple(replace(t, rank=r) for t in layer.tensors)))
    return replace(arch, representation=representation, layers=tuple(layers))


# -- whole networks -----------------------------------------------------------

Genotype = list  # list (per layer) of lists of TensorGenotype


def init_genotype(arch: ArchitectureSpec, seed: int) -> Genotype:
    return [[init_tensor(t, seed, li, ti) for ti, t in enumerate(layer.tensors)]
            for li, layer in enumerate(arch.layers)]


def genotype_vector(genotype: Genotype) -> np.ndarray:
    """Every evolvable value, flattened in layer/tensor order."""
    parts = [a.ravel() for layer in genotype for g in layer for a in g.arrays()]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=DTYPE)


@dataclass
class Phenotype:
    """Developed parameters: per layer, a list of ``(weight, bias)`` pairs.

    Conv weights are 4-D ``(out, in, kh, kw)``; all other weights are matrices.
    """

    arch: ArchitectureSpec
    layers: list[list[tuple]]
    _f64: list | None = field(default=None, repr=False, compare=False)

    def vector(self) -> np.ndarray:
        parts = [a.ravel() for layer in self.layers for pair in layer for a in pair if a is not None]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=DTYPE)

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.vector().tobytes()).hexdigest()

    def float64(self) -> list[list[tuple]]:
        """Cached float64 copies of every array (forward passes accumulate in 64-bit)."""
        if self._f64 is None:
            self._f64 = [[tuple(None if a is None else a.astype(np.float64) for a in pair) for pair in layer]
                         for layer in self.layers]
        return self._f64


def develop_network(arch: ArchitectureSpec, genotype: Genotype) -> Phenotype:
    return Phenotype(arch, [develop_layer(layer, tensors) for layer, tensors in zip(arch.layers, genotype)])
