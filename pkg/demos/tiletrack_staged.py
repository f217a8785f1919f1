"""Staged truncation selection on TileTrack.

Every candidate drives a couple of random tracks; the best few are then
re-tested on more tracks before the final cut. Prints the per-generation
log and replays the best policy.
"""

import argparse

from factorevo.envs import EvalJobSpec, TileTrackTask, run_episode
from factorevo.envs.lm import data_path
from factorevo.evolve import GaConfig, LocalEvaluator, run_experiment
from factorevo.genome import develop
from factorevo.layers import ArchitectureSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arch", default="tiletrack_factorized",
                    choices=["tiletrack_factorized", "tiletrack_nonfactorized", "tiletrack_small"])
    ap.add_argument("--population", type=int, default=32)
    ap.add_argument("--generations", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    arch = ArchitectureSpec.load(data_path(f"archs/{args.arch}.json"))
    cfg = GaConfig(population_size=args.population, truncation=[args.population // 4, 2], evaluations=[2, 4],
                   generations=args.generations, sigma=0.01, episode_cap=400)
    env = TileTrackTask(cfg.episode_cap)

    def show(report, _):
        s0, s1 = report.stages
        print(f"gen {report.generation:3d}  stage0 best {s0.best_fitness:5.2f} mean {s0.mean_fitness:5.2f}  "
              f"stage1 best {s1.best_fitness:5.2f}  steps {s0.env_steps + s1.env_steps}")

    res = run_experiment(cfg, arch, env, seed=args.seed, on_report=show,
                         evaluator=LocalEvaluator(arch, env, threads=args.threads))
    best = res.survivors[0]
    policy = develop(best, arch)
    job = EvalJobSpec("tiletrack", 12345, 3, cfg.episode_cap)
    for seed in job.seeds:
        score, steps = run_episode(policy, seed, cfg.episode_cap)
        print(f"unseen track {seed}: {score} tiles in {steps} steps")


if __name__ == "__main__":
    main()
