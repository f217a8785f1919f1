"""Seed chains: a genome is an init seed plus (seed, sigma) records.

Shows that a deep lineage rebuilds bit-identically from scratch and from a
cached parent, and that what goes over the wire is one fixed-size frame no
matter how large the network is.
"""

import argparse
import time

from factorevo.dist import EVAL_REQUEST_FRAME_SIZE, account_bandwidth
from factorevo.dist import protocol as P
from factorevo.envs import EvalJobSpec
from factorevo.envs.lm import data_path
from factorevo.genome import Genome, ParentCache, develop, develop_genotype, develop_incremental, mutate
from factorevo.layers import ArchitectureSpec, count_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", default="atari_factorized")
    ap.add_argument("--depth", type=int, default=30)
    ap.add_argument("--sigma", type=float, default=0.01)
    args = ap.parse_args()

    arch = ArchitectureSpec.load(data_path(f"archs/{args.arch}.json"))
    g = Genome.root(7)
    for i in range(args.depth):
        g = mutate(g, 1000 + i, args.sigma)
    print(f"genome {g.genome_id} has {g.depth} mutation records")

    t = time.perf_counter()
    scratch = develop(g, arch)
    t_scratch = time.perf_counter() - t

    parent = Genome(g.parent_id, g.init_seed, g.lineage[:-1])
    cache = ParentCache()
    cache.put(parent, develop_genotype(parent, arch))
    t = time.perf_counter()
    _, incremental = develop_incremental(g, cache, arch)
    t_inc = time.perf_counter() - t
    print(f"scratch rebuild {t_scratch * 1e3:.1f} ms, one step from cached parent {t_inc * 1e3:.1f} ms")
    print(f"digests equal: {scratch.digest() == incremental.digest()}")

    params = count_params(arch, "phenotype")
    frame = P.frame(P.EVAL_REQUEST, P.eval_request(g, EvalJobSpec("tiletrack", 1)))
    acc = account_bandwidth([{"candidate_count": 512, "bytes_transmitted": 512 * len(frame)}], params)
    print(f"EVAL_REQUEST frame: {len(frame)} bytes (constant {EVAL_REQUEST_FRAME_SIZE})")
    print(f"512 children: {acc['total_bytes']:,} bytes sent vs {acc['full_vector_bytes']:,} "
          f"for raw float32 vectors of {params:,} parameters")


if __name__ == "__main__":
    main()
