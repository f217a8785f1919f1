"""Seed-chain genomes.

A genome is an initialization seed plus an ordered list of mutation records
``(seed, sigma)``. Its parameters are rebuilt by initializing from the init
seed and then applying ``theta <- theta + sigma * noise(seed)`` for every
record in order. Factorized tensors are perturbed on their factors with rate
``sqrt(sigma)``; their developed product is never perturbed directly.
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rng
from .layers import ArchitectureSpec, Genotype, Phenotype, TensorGenotype, develop_network, init_genotype

DELTA_FORMAT = "<QQfI"
DELTA_SIZE = struct.calcsize(DELTA_FORMAT)  # 24
FLAG_ROOT = 1

_ROOT_TAG = 0x524F4F54  # "ROOT"

FACTOR_NOISE_MODES = ("factor", "direct")


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class MutationRecord:
    seed: int
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        # sigma travels as float32 on the wire; keep the local value identical
        object.__setattr__(self, "sigma", _f32(self.sigma))
        object.__setattr__(self, "seed", self.seed & rng.MASK64)


@dataclass(frozen=True)
class Genome:
    genome_id: int
    init_seed: int
    lineage: tuple[MutationRecord, ...] = ()
    parent_id: int = 0
    arch_ref: str = ""

    @classmethod
    def root(cls, init_seed: int, genome_id: int | None = None, arch_ref: str = "") -> "Genome":
        if genome_id is None:
            genome_id = rng.derive_key(init_seed, [_ROOT_TAG]) or 1
        return cls(genome_id, init_seed & rng.MASK64, (), 0, arch_ref)

    @property
    def depth(self) -> int:
        return len(self.lineage)

    def to_dict(self) -> dict:
        return {"genome_id": self.genome_id, "parent_id": self.parent_id, "init_seed": self.init_seed,
                "arch_ref": self.arch_ref, "lineage": [[r.seed, r.sigma] for r in self.lineage]}

    @classmethod
    def from_dict(cls, d: dict) -> "Genome":
        return cls(int(d["genome_id"]), int(d["init_seed"]),
                   tuple(MutationRecord(int(s), float(sg)) for s, sg in d["lineage"]),
                   int(d.get("parent_id", 0)), d.get("arch_ref", ""))


def mutate(parent: Genome, seed: int, sigma: float, genome_id: int | None = None) -> Genome:
    """Child genome: the parent's lineage plus one record."""
    seed &= rng.MASK64
    if genome_id is None:
        genome_id = rng.derive_key(parent.genome_id, [seed]) or 1
    return Genome(genome_id, parent.init_seed, parent.lineage + (MutationRecord(seed, sigma),),
                  parent.genome_id, parent.arch_ref)


# -- development ----------------------------------------------------------------

def _perturb(a: np.ndarray, seed: int, labels: tuple, std: float, rate: float) -> np.ndarray:
    noise = rng.gaussian(seed, labels, a.shape, std * rate)
    return a + noise


def apply_mutation(arch: ArchitectureSpec, genotype: Genotype, record: MutationRecord,
                   factor_noise: str = "factor") -> Genotype:
    """New genotype with one mutation applied (the input is not modified)."""
    if record.sigma == 0.0:
        return [[g.copy() for g in layer] for layer in genotype]
    sigma = record.sigma
    out = []
    for li, layer in enumerate(genotype):
        new_layer = []
        for ti, g in enumerate(layer):
            spec = g.spec
            lab = (li, ti)
            child = TensorGenotype(spec)
            if spec.weight and spec.rank:
                if factor_noise == "factor":
                    su, sv = spec.factor_stds()
                else:
                    su, sv = math.sqrt(2.0 / spec.rank), math.sqrt(2.0 / spec.cols)
                rate = math.sqrt(sigma)
                child.u = _perturb(g.u, record.seed, lab + (rng.PURPOSE_FACTOR_U,), su, rate)
                child.v = _perturb(g.v, record.seed, lab + (rng.PURPOSE_FACTOR_V,), sv, rate)
            elif spec.weight:
                child.weight = _perturb(g.weight, record.seed, lab + (rng.PURPOSE_FACTOR_U,),
                                        spec.weight_std(), sigma)
            if g.bias is not None:
                child.bias = _perturb(g.bias, record.seed, lab + (rng.PURPOSE_BIAS,),
                                      math.sqrt(2.0 / spec.cols), sigma)
            new_layer.append(child)
        out.append(new_layer)
    return out


def develop_genotype(genome: Genome, arch: ArchitectureSpec, factor_noise: str = "factor") -> Genotype:
    """Evolvable parameters of ``genome`` rebuilt from scratch."""
    genotype = init_genotype(arch, genome.init_seed)
    for record in genome.lineage:
        genotype = apply_mutation(arch, genotype, record, factor_noise)
    return genotype


def develop(genome: Genome, arch: ArchitectureSpec, factor_noise: str = "factor") -> Phenotype:
    if not isinstance(arch, ArchitectureSpec):
        raise TypeError(f"unknown architecture {arch!r}")
    return develop_network(arch, develop_genotype(genome, arch, factor_noise))


class CacheMiss(LookupError):
    """The parent of a genome is not in the cache."""


class ParentCache:
    """Materialized genotypes keyed by genome id.

    Reads may happen from any thread; writes take a lock.
    """

    def __init__(self):
        self._entries: dict[int, tuple[Genome, Genotype]] = {}
        self._lock = threading.Lock()

    def __contains__(self, genome_id: int) -> bool:
        return genome_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> set[int]:
        return set(self._entries)

    def get(self, genome_id: int) -> tuple[Genome, Genotype] | None:
        return self._entries.get(genome_id)

    def put(self, genome: Genome, genotype: Genotype) -> None:
        with self._lock:
            self._entries[genome.genome_id] = (genome, genotype)

    def retain(self, keep: set[int]) -> None:
        with self._lock:
            for gid in list(self._entries):
                if gid not in keep:
                    del self._entries[gid]

    def replace(self, entries: dict[int, tuple[Genome, Genotype]]) -> None:
        with self._lock:
            self._entries = dict(entries)


def develop_incremental(child: Genome, cache: ParentCache, arch: ArchitectureSpec,
                        factor_noise: str = "factor") -> tuple[Genotype, Phenotype]:
    """Develop ``child`` from its cached parent with a single mutation.

    Raises :class:`CacheMiss` when the parent is absent.
    """
    if not child.lineage:
        raise CacheMiss(child.genome_id)
    hit = cache.get(child.parent_id)
    if hit is None:
        raise CacheMiss(child.parent_id)
    genotype = apply_mutation(arch, hit[1], child.lineage[-1], factor_noise)
    return genotype, develop_network(arch, genotype)


def materialize(genome: Genome, cache: ParentCache, arch: ArchitectureSpec,
                factor_noise: str = "factor") -> tuple[Genotype, Phenotype]:
    """Cached entry, else one mutation from the cached parent, else a full rebuild."""
    hit = cache.get(genome.genome_id)
    if hit is not None:
        return hit[1], develop_network(arch, hit[1])
    try:
        return develop_incremental(genome, cache, arch, factor_noise)
    except CacheMiss:
        genotype = develop_genotype(genome, arch, factor_noise)
        return genotype, develop_network(arch, genotype)


# -- wire delta -------------------------------------------------------------------

class Delta(NamedTuple):
    parent_id: int
    seed: int
    sigma: float
    flags: int = 0

    @property
    def is_root(self) -> bool:
        return bool(self.flags & FLAG_ROOT)


def delta_of(genome: Genome) -> Delta:
    """``(parent_id, seed, sigma)`` of the last record; roots use ``(0, init_seed, 0)``."""
    if not genome.lineage:
        return Delta(0, genome.init_seed, 0.0, FLAG_ROOT)
    r = genome.lineage[-1]
    return Delta(genome.parent_id, r.seed, r.sigma, 0)


def serialize_delta(genome: Genome) -> bytes:
    d = delta_of(genome)
    return struct.pack(DELTA_FORMAT, d.parent_id, d.seed, d.sigma, d.flags)


def parse_delta(buf: bytes) -> Delta:
    if len(buf) != DELTA_SIZE:
        raise ValueError(f"delta must be {DELTA_SIZE} bytes, got {len(buf)}")
    parent_id, seed, sigma, flags = struct.unpack(DELTA_FORMAT, buf)
    return Delta(parent_id, seed, sigma, flags)


def child_from_delta(genome_id: int, delta: Delta, parent: Genome | None) -> Genome:
    """Rebuild a genome from its delta; non-root deltas need the parent genome."""
    if delta.is_root:
        return Genome.root(delta.seed, genome_id)
    if parent is None:
        raise CacheMiss(delta.parent_id)
    return mutate(parent, delta.seed, delta.sigma, genome_id)
