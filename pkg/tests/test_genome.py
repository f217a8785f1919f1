import math
import struct
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorevo.genome import (DELTA_SIZE, CacheMiss, Delta, Genome, MutationRecord, ParentCache, apply_mutation,
                              child_from_delta, delta_of, develop, develop_genotype, develop_incremental,
                              materialize, mutate, parse_delta, serialize_delta)
from factorevo.layers import (ArchitectureSpec, LayerSpec, TensorSpec, develop_network, genotype_vector,
                              init_genotype)

from conftest import bundled_arch, tiny_convnet, tiny_transformer


def chain(depth, seed=1, sigma=0.01):
    g = Genome.root(seed)
    for i in range(depth):
        g = mutate(g, seed * 1000 + i, sigma)
    return g


def test_empty_lineage_is_initialization():
    arch = tiny_convnet(2)
    g = Genome.root(42)
    assert develop(g, arch).digest() == develop_network(arch, init_genotype(arch, 42)).digest()


def test_zero_sigma_is_identity():
    arch = tiny_transformer("factorized")
    parent = chain(3)
    child = mutate(parent, 77, 0.0)
    assert develop(child, arch).digest() == develop(parent, arch).digest()


def test_children_with_different_seeds_differ():
    arch = tiny_convnet()
    p = chain(1)
    assert develop(mutate(p, 1, 0.01), arch).digest() != develop(mutate(p, 2, 0.01), arch).digest()


def test_mutate_appends_one_record():
    p = chain(2)
    c = mutate(p, 5, 0.02)
    assert c.lineage[:-1] == p.lineage and c.lineage[-1] == MutationRecord(5, 0.02)
    assert c.parent_id == p.genome_id and c.genome_id != p.genome_id and c.depth == 3


def test_sigma_rounded_to_float32():
    r = MutationRecord(1, 0.1)
    assert r.sigma == float(np.float32(0.1))


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        MutationRecord(1, -0.5)


def test_direct_mutation_std():
    arch = ArchitectureSpec("d", "convnet", "nonfactorized", (LayerSpec.dense(1000, 1000, None, None),), (1000,))
    parent = init_genotype(arch, 3)
    child = apply_mutation(arch, parent, MutationRecord(9, 0.01))
    delta = (child[0][0].weight.astype(np.float64) - parent[0][0].weight)
    assert delta.std() == pytest.approx(0.01 * math.sqrt(2 / 1000), rel=0.05)


def test_factor_mutation_uses_sqrt_sigma():
    arch = ArchitectureSpec("f", "convnet", "factorized",
                            (LayerSpec.dense(200_000, 250, 5), LayerSpec.dense(250, 2, None, None)), (200_000,))
    parent = init_genotype(arch, 3)
    child = apply_mutation(arch, parent, MutationRecord(9, 0.01))
    du = child[0][0].u.astype(np.float64) - parent[0][0].u
    dv = child[0][0].v.astype(np.float64) - parent[0][0].v
    su, sv = arch.layers[0].tensors[0].factor_stds()
    assert (du.std() / su) == pytest.approx(0.1, rel=0.05)
    assert (dv.std() / sv) == pytest.approx(0.1, rel=0.2)  # only 1250 entries


def test_direct_factor_noise_switch():
    arch = tiny_convnet(2)
    g = chain(2)
    assert develop(g, arch, "factor").digest() != develop(g, arch, "direct").digest()


def test_bias_mutates_directly():
    arch = tiny_convnet(2)
    parent = init_genotype(arch, 1)
    child = apply_mutation(arch, parent, MutationRecord(4, 0.5))
    assert np.any(child[0][0].bias != 0)


def test_incremental_equals_scratch():
    arch = tiny_transformer("factorized")
    cache = ParentCache()
    g = Genome.root(3)
    cache.put(g, develop_genotype(g, arch))
    for i in range(3):
        child = mutate(g, 100 + i, 0.05)
        genotype, pheno = develop_incremental(child, cache, arch)
        assert pheno.digest() == develop(child, arch).digest()
        cache.put(child, genotype)
        g = child


def test_cache_miss_signal():
    arch = tiny_convnet()
    with pytest.raises(CacheMiss):
        develop_incremental(chain(2), ParentCache(), arch)


def test_materialize_paths_agree():
    arch = tiny_convnet(1)
    g = chain(4)
    cache = ParentCache()
    full = materialize(g, cache, arch)[1].digest()
    parent = Genome(g.parent_id, g.init_seed, g.lineage[:-1])
    cache.put(parent, develop_genotype(parent, arch))
    assert materialize(g, cache, arch)[1].digest() == full
    cache.put(g, develop_genotype(g, arch))
    assert materialize(g, cache, arch)[1].digest() == full


def test_cache_retain_and_replace():
    cache = ParentCache()
    arch = tiny_convnet()
    gs = [Genome.root(i) for i in range(4)]
    for g in gs:
        cache.put(g, init_genotype(arch, g.init_seed))
    cache.retain({gs[0].genome_id, gs[2].genome_id})
    assert cache.ids() == {gs[0].genome_id, gs[2].genome_id}
    cache.replace({})
    assert len(cache) == 0


def test_delta_layout_and_round_trip():
    c = mutate(chain(3), 0xDEADBEEF, 0.01)
    buf = serialize_delta(c)
    assert len(buf) == DELTA_SIZE == 24
    pid, seed, sigma, flags = struct.unpack("<QQfI", buf)
    assert (pid, seed, flags) == (c.parent_id, 0xDEADBEEF, 0) and sigma == c.lineage[-1].sigma
    d = parse_delta(buf)
    assert child_from_delta(c.genome_id, d, chain(3)) == c


def test_root_delta_sentinel():
    g = Genome.root(77)
    d = delta_of(g)
    assert (d.parent_id, d.seed, d.sigma) == (0, 77, 0.0) and d.is_root
    assert child_from_delta(g.genome_id, parse_delta(serialize_delta(g)), None) == g


def test_delta_size_independent_of_depth_and_model():
    assert len(serialize_delta(chain(1))) == len(serialize_delta(chain(300)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2**64 - 1), st.sampled_from([0.0, 0.001, 0.01, 0.1])), max_size=6),
       st.integers(0, 2**64 - 1))
def test_incremental_chain_matches_scratch_property(records, init):
    arch = tiny_convnet(2)
    cache = ParentCache()
    g = Genome.root(init)
    cache.put(g, develop_genotype(g, arch))
    for seed, sigma in records:
        child = mutate(g, seed, sigma)
        genotype, _ = develop_incremental(child, cache, arch)
        cache.put(child, genotype)
        g = child
    assert genotype_vector(cache.get(g.genome_id)[1]).tobytes() == genotype_vector(develop_genotype(g, arch)).tobytes()


def test_genome_dict_round_trip():
    g = chain(5)
    assert Genome.from_dict(g.to_dict()) == g


SCRIPT = """
import sys
from factorevo.genome import Genome, mutate, develop
from factorevo.layers import ArchitectureSpec
arch = ArchitectureSpec.from_dict({arch!r})
g = Genome.root(11)
for i in range(5):
    g = mutate(g, i, 0.01)
print(develop(g, arch).digest())
"""


def test_develop_in_separate_process():
    arch = tiny_convnet(2)
    out = subprocess.run([sys.executable, "-c", SCRIPT.format(arch=arch.to_dict())], capture_output=True,
                         text=True, check=True).stdout.strip()
    g = Genome.root(11)
    for i in range(5):
        g = mutate(g, i, 0.01)
    assert out == develop(g, arch).digest()
