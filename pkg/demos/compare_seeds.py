"""Repeat a short experiment over several seeds and test the difference.

Uses the rank-sum test (exact for small samples) and Glass's delta, the
same report the ``factorevo stats`` command prints.
"""

import argparse

from factorevo.envs import TileTrackTask
from factorevo.envs.lm import data_path
from factorevo.evolve import GaConfig, run_experiment
from factorevo.layers import ArchitectureSpec
from factorevo.stats import SampleGroup, compare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--generations", type=int, default=4)
    args = ap.parse_args()

    cfg = GaConfig(population_size=16, truncation=[4], evaluations=[2], generations=args.generations,
                   episode_cap=200)
    env = TileTrackTask(cfg.episode_cap)
    groups = []
    for rep in ("factorized", "small"):
        arch = ArchitectureSpec.load(data_path(f"archs/tiletrack_{rep}.json"))
        finals = [run_experiment(cfg, arch, env, seed=s).reports[-1].best_fitness for s in range(args.seeds)]
        print(f"{rep:10s} final best per seed: {finals}")
        groups.append(SampleGroup(rep, tuple(finals)))
    for row in compare(groups):
        print(row)


if __name__ == "__main__":
    main()
