"""Fitness environments and the job description shared with workers."""

from __future__ import annotations

from dataclasses import dataclass

from ..layers import Phenotype
from ..rng import derive_key
from .lm import LanguageTask
from .policy import act, policy_forward
from .tiletrack import DEFAULT_CAP, N_ACTIONS, TileTrack, generate_track

__all__ = [
    "EvalJobSpec", "LanguageTask", "TileTrackTask", "TileTrack", "make_env", "evaluate_policy",
    "run_episode", "generate_track", "policy_forward", "act",
]


@dataclass(frozen=True)
class EvalJobSpec:
    """Episodes to run for one candidate; seeds derive from ``base_seed``."""

    kind: str
    base_seed: int
    n_episodes: int = 1
    episode_cap: int = DEFAULT_CAP
    stage: int = 0

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError("a job needs at least one episode")

    @property
    def seeds(self) -> list[int]:
        return [derive_key(self.base_seed, [i]) for i in range(self.n_episodes)]


def run_episode(phenotype: Phenotype, seed: int, cap: int = DEFAULT_CAP, trace: list | None = None) -> tuple[int, int]:
    """Play one greedy episode; returns ``(score, steps)``.

    If ``trace`` is given, ``(step, action, reward)`` rows are appended to it.
    """
    env = TileTrack(seed, cap=cap)
    obs = env.observation()
    done = False
    while not done:
        a = act(phenotype, obs)
        obs, reward, done = env.step(a)
        if trace is not None:
            trace.append((env.total_steps, a, reward))
    return env.score, env.total_steps


def evaluate_policy(phenotype: Phenotype, job: EvalJobSpec) -> tuple[float, int]:
    """Mean episode score over the job's seeds and the total number of env steps."""
    arch = phenotype.arch
    if tuple(arch.input_shape) != (12, 9, 9) or arch.n_outputs != N_ACTIONS:
        raise ValueError(f"policy must map (12, 9, 9) to {N_ACTIONS} actions")
    scores, steps = [], 0
    for seed in job.seeds:
        score, n = run_episode(phenotype, seed, job.episode_cap)
        scores.append(score)
        steps += n
    return sum(scores) / len(scores), steps


@dataclass
class TileTrackTask:
    episode_cap: int = DEFAULT_CAP

    kind = "tiletrack"

    def check(self, arch) -> None:
        if tuple(arch.input_shape) != (12, 9, 9) or arch.n_outputs != N_ACTIONS:
            raise ValueError(f"policy must map (12, 9, 9) to {N_ACTIONS} actions")

    def evaluate(self, phenotype: Phenotype, job: EvalJobSpec) -> tuple[float, int]:
        return evaluate_policy(phenotype, job)

    def to_dict(self) -> dict:
        return {"kind": "tiletrack", "episode_cap": self.episode_cap}


def make_env(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "lm":
        return LanguageTask(**cfg)
    if kind == "tiletrack":
        return TileTrackTask(**cfg)
    raise ValueError(f"unknown env kind {kind!r}")
