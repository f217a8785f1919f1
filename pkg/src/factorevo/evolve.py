"""Truncation-selection genetic algorithm with staged re-evaluation.

Each generation evaluates its candidates in one or more stages. Stage ``s``
runs ``evaluations[s]`` fresh episodes per remaining candidate (fitness is
the mean over that stage's episodes only), sorts by fitness (ties by
genome id) and keeps the top ``truncation[s]``. Parents for the next
generation are drawn uniformly from the final survivors. By default the
survivors themselves are carried unchanged into the next candidate pool.

All randomness derives from the experiment seed:

* initial genomes:   ``(seed, INIT, i)``
* episode seeds:     ``(seed, ENV, generation, stage)``
* parents and seeds: ``(seed, REPRO, generation)``
"""

from __future__ import annotations

import hashlib
import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .envs import EvalJobSpec
from .genome import Genome, ParentCache, materialize, mutate
from .layers import ArchitectureSpec
from .rng import derive_key, derive_substream

log = logging.getLogger(__name__)

TAG_INIT = 1
TAG_ENV = 2
TAG_REPRO = 3

STATE_FILE = "state.json"
STATE_VERSION = 1


@dataclass(frozen=True)
class EvalResult:
    genome_id: int
    stage: int
    fitness: float
    env_steps: int


@dataclass
class GaConfig:
    population_size: int = 64
    truncation: list[int] = field(default_factory=lambda: [16])
    evaluations: list[int] = field(default_factory=lambda: [1])
    generations: int = 30
    sigma: float = 0.01
    elitism: bool = True
    reevaluate_survivors: bool = True
    factor_noise: str = "factor"
    episode_cap: int = 1000

    def __post_init__(self):
        self.truncation = list(self.truncation)
        self.evaluations = list(self.evaluations)
        self.validate()

    def validate(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if not self.truncation or len(self.truncation) != len(self.evaluations):
            raise ValueError("truncation and evaluations must be non-empty lists of equal length")
        if any(b > a for a, b in zip(self.truncation, self.truncation[1:])):
            raise ValueError("truncation sizes must be non-increasing across stages")
        if self.truncation[0] > self.population_size or min(self.truncation) < 1:
            raise ValueError("truncation sizes must lie in [1, population_size]")
        if min(self.evaluations) < 1:
            raise ValueError("each stage needs at least one evaluation")
        if self.generations < 0 or self.sigma < 0:
            raise ValueError("generations and sigma must be non-negative")
        if self.factor_noise not in ("factor", "direct"):
            raise ValueError("factor_noise must be 'factor' or 'direct'")


@dataclass
class StageReport:
    stage: int
    candidate_count: int
    best_fitness: float
    mean_fitness: float
    median_fitness: float
    wall_time_s: float
    env_steps: int
    bytes_transmitted: int


@dataclass
class GenerationReport:
    generation: int
    stages: list[StageReport]
    survivor_ids: list[int]
    best_fitness: float
    cumulative_best: float
    # (stage, genome_id, fitness, env_steps) for every evaluated candidate
    candidates: list[tuple[int, int, float, int]] = field(default_factory=list)
    final_job: EvalJobSpec | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_job"] = asdict(self.final_job) if self.final_job else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationReport":
        return cls(d["generation"], [StageReport(**s) for s in d["stages"]], list(d["survivor_ids"]),
                   d["best_fitness"], d["cumulative_best"], [tuple(c) for c in d["candidates"]],
                   EvalJobSpec(**d["final_job"]) if d.get("final_job") else None)


class Evaluator(Protocol):
    last_bytes: int

    def evaluate(self, jobs: Sequence[tuple[Genome, EvalJobSpec]]) -> list[EvalResult]: ...

    def set_survivors(self, survivors: Sequence[Genome]) -> None: ...


class LocalEvaluator:
    """In-process evaluation backed by a parent cache.

    ``last_bytes`` reports what the same jobs would cost as EVAL_REQUEST frames.
    """

    def __init__(self, arch: ArchitectureSpec, env, threads: int = 1, factor_noise: str = "factor"):
        env.check(arch)
        self.arch = arch
        self.env = env
        self.threads = threads
        self.factor_noise = factor_noise
        self.cache = ParentCache()
        self.last_bytes = 0

    def _one(self, job: tuple[Genome, EvalJobSpec]) -> EvalResult:
        genome, spec = job
        _, phenotype = materialize(genome, self.cache, self.arch, self.factor_noise)
        fitness, steps = self.env.evaluate(phenotype, spec)
        return EvalResult(genome.genome_id, spec.stage, float(fitness), int(steps))

    def evaluate(self, jobs):
        from .dist.protocol import EVAL_REQUEST_FRAME_SIZE

        self.last_bytes = EVAL_REQUEST_FRAME_SIZE * len(jobs)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(self._one, jobs))
        return [self._one(j) for j in jobs]

    def set_survivors(self, survivors):
        entries = {}
        for g in survivors:
            genotype, _ = materialize(g, self.cache, self.arch, self.factor_noise)
            entries[g.genome_id] = (g, genotype)
        self.cache.replace(entries)


def initial_population(seed: int, size: int) -> list[Genome]:
    return [Genome.root(derive_key(seed, [TAG_INIT, i])) for i in range(size)]


def rank(fitness: dict[int, float]) -> list[int]:
    """Genome ids by descending fitness, ties broken by ascending id."""
    return sorted(fitness, key=lambda gid: (-fitness[gid], gid))


def reproduce(survivors: Sequence[Genome], n: int, sigma: float, seed: int, generation: int) -> list[Genome]:
    stream = derive_substream(seed, [TAG_REPRO, generation])
    children = []
    for _ in range(n):
        parent = survivors[stream.randbelow(len(survivors))]
        children.append(mutate(parent, stream.next_u64(), sigma))
    return children


def run_generation(population: Sequence[Genome], config: GaConfig, evaluator: Evaluator, *,
                   generation: int = 0, seed: int = 0, env_kind: str = "tiletrack",
                   score_cache: dict | None = None, cumulative_best: float = float("-inf"),
                   ) -> tuple[list[Genome], list[Genome], GenerationReport]:
    """Evaluate and select one generation; returns ``(survivors, children, report)``.

    ``children`` is the next candidate pool: the survivors followed by new
    mutants when elitism is on, otherwise ``population_size`` mutants.
    """
    if len(population) != config.population_size:
        raise ValueError(f"population has {len(population)} members, config expects {config.population_size}")
    by_id = {g.genome_id: g for g in population}
    candidates = list(population)
    stages: list[StageReport] = []
    rows: list[tuple[int, int, float, int]] = []
    job = None
    for s, (n_eval, keep) in enumerate(zip(config.evaluations, config.truncation)):
        job = EvalJobSpec(env_kind, derive_key(seed, [TAG_ENV, generation, s]), n_eval, config.episode_cap, s)
        t0 = time.perf_counter()
        results: dict[int, EvalResult] = {}
        todo = []
        for g in candidates:
            cached = score_cache.get((g.genome_id, s)) if score_cache is not None else None
            if cached is not None and not config.reevaluate_survivors:
                results[g.genome_id] = cached
            else:
                todo.append((g, job))
        bytes_sent = 0
        if todo:
            for r in evaluator.evaluate(todo):
                results[r.genome_id] = r
            bytes_sent = evaluator.last_bytes
        wall = time.perf_counter() - t0
        if score_cache is not None:
            for gid, r in results.items():
                score_cache[(gid, s)] = r
        fitness = {g.genome_id: results[g.genome_id].fitness for g in candidates}
        values = list(fitness.values())
        steps = sum(results[g.genome_id].env_steps for g, _ in todo)
        stages.append(StageReport(s, len(candidates), max(values), statistics.fmean(values),
                                  statistics.median(values), wall, steps, bytes_sent))
        rows += [(s, g.genome_id, fitness[g.genome_id], results[g.genome_id].env_steps) for g in candidates]
        candidates = [by_id[gid] for gid in rank(fitness)[:keep]]

    survivors = candidates
    best = stages[-1].best_fitness
    evaluator.set_survivors(survivors)
    if config.elitism:
        children = list(survivors) + reproduce(survivors, config.population_size - len(survivors),
                                               config.sigma, seed, generation)
    else:
        children = reproduce(survivors, config.population_size, config.sigma, seed, generation)
    report = GenerationReport(generation, stages, [g.genome_id for g in survivors], best,
                              max(cumulative_best, best), rows, job)
    return survivors, children, report


# -- experiments ------------------------------------------------------------------

class ResumeError(RuntimeError):
    pass


def _checksum(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_state(path: Path, payload: dict) -> None:
    doc = {"version": STATE_VERSION, "checksum": _checksum(payload), "payload": payload}
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_state(path: Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ResumeError(f"{path}: not valid JSON (line {exc.lineno}, column {exc.colno})") from None
    if not isinstance(doc, dict) or doc.get("version") != STATE_VERSION or "payload" not in doc:
        raise ResumeError(f"{path}: unrecognized state layout")
    if _checksum(doc["payload"]) != doc.get("checksum"):
        raise ResumeError(f"{path}: checksum mismatch, file is corrupted")
    return doc["payload"]


@dataclass
class RunResult:
    reports: list[GenerationReport]
    survivors: list[Genome]
    genomes: dict[int, Genome]


def run_experiment(config: GaConfig, arch: ArchitectureSpec, env, *, seed: int = 0,
                   evaluator: Evaluator | None = None, out_dir: str | Path | None = None,
                   resume: bool = False, on_report: Callable[[GenerationReport, dict], None] | None = None,
                   stop_after: int | None = None) -> RunResult:
    """Run generations ``0 .. config.generations - 1``; generation 0 is the initial population.

    ``generations=0`` still evaluates the initial population once and reports it.

    With ``out_dir`` the genome table is checkpointed after every generation;
    ``resume=True`` continues from the last checkpoint. ``stop_after`` ends
    the run early after that generation index (used to test resumption).
    """
    if evaluator is None:
        evaluator = LocalEvaluator(arch, env, factor_noise=config.factor_noise)
    state_path = Path(out_dir) / STATE_FILE if out_dir is not None else None
    reports: list[GenerationReport] = []
    score_cache: dict | None = None if config.reevaluate_survivors else {}
    start = 0
    cumulative = float("-inf")
    population = initial_population(seed, config.population_size)
    survivors: list[Genome] = []
    if resume:
        if state_path is None or not state_path.exists():
            raise ResumeError("nothing to resume: no checkpoint in the output directory")
        st = load_state(state_path)
        try:
            population = [Genome.from_dict(d) for d in st["population"]]
            survivors = [Genome.from_dict(d) for d in st["survivors"]]
            reports = [GenerationReport.from_dict(r) for r in st["reports"]]
            start = st["generation"] + 1
            cumulative = st["cumulative_best"]
            if score_cache is not None:
                score_cache = {(int(k[0]), int(k[1])): EvalResult(*v) for k, v in st.get("scores", [])}
        except (KeyError, TypeError, ValueError) as exc:
            raise ResumeError(f"{state_path}: malformed checkpoint ({exc!r})") from None
        evaluator.set_survivors(survivors)

    genomes = {g.genome_id: g for g in population + survivors}
    for gen in range(start, max(config.generations, 1)):
        survivors, population, report = run_generation(
            population, config, evaluator, generation=gen, seed=seed, env_kind=env.kind,
            score_cache=score_cache, cumulative_best=cumulative)
        cumulative = report.cumulative_best
        reports.append(report)
        if score_cache is not None:
            live = {g.genome_id for g in population}
            score_cache = {k: v for k, v in score_cache.items() if k[0] in live}
        genomes.update({g.genome_id: g for g in population})
        log.info("generation %d: best %.5f (cumulative %.5f)", gen, report.best_fitness, cumulative)
        if state_path is not None:
            payload = {
                "generation": gen,
                "population": [g.to_dict() for g in population],
                "survivors": [g.to_dict() for g in survivors],
                "reports": [r.to_dict() for r in reports],
                "cumulative_best": cumulative,
            }
            if score_cache is not None:
                payload["scores"] = [[list(k), list(asdict(v).values())] for k, v in score_cache.items()]
            save_state(state_path, payload)
        if on_report is not None:
            on_report(report, {g.genome_id: g for g in survivors})
        if stop_after is not None and gen >= stop_after:
            break
    return RunResult(reports, survivors, genomes)
