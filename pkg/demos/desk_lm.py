"""Evolving a tiny language model without gradients.

Fitness is the negative per-token cross-entropy on a fixed batch of
stories. Runs the factorized and non-factorized conditions side by side.
"""

import argparse
import math

from factorevo.envs import LanguageTask
from factorevo.envs.lm import data_path
from factorevo.evolve import GaConfig, run_experiment
from factorevo.layers import ArchitectureSpec, count_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--generations", type=int, default=10)
    ap.add_argument("--population", type=int, default=64)
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--sequences", type=int, default=32)
    args = ap.parse_args()

    task = LanguageTask(vocab_size=256, n_sequences=args.sequences, max_seq_len=64)
    print(f"uniform guessing scores {-math.log(256):.4f}")
    cfg = GaConfig(population_size=args.population, truncation=[args.population // 4],
                   generations=args.generations, sigma=args.sigma)
    for rep in ("factorized", "nonfactorized"):
        arch = ArchitectureSpec.load(data_path(f"archs/desk_lm_{rep}.json"))
        print(f"\n{rep}: {count_params(arch, 'genotype'):,} evolved parameters")
        res = run_experiment(cfg, arch, task, seed=0,
                             on_report=lambda r, _: print(f"  gen {r.generation:3d} best {r.best_fitness:.4f}"))
        first, last = res.reports[0].best_fitness, res.reports[-1].best_fitness
        print(f"  improvement {(last - first) / abs(first):+.1%}")


if __name__ == "__main__":
    main()
