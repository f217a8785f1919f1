import json
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorevo.envs import EvalJobSpec
from factorevo.evolve import (EvalResult, GaConfig, GenerationReport, LocalEvaluator, ResumeError,
                              initial_population, rank, reproduce, run_experiment, run_generation)
from factorevo.genome import Genome
from factorevo.rng import derive_key

from conftest import tiny_convnet


def episode_return(genome_id, seed):
    return float(derive_key(genome_id, [seed]) % 1000)


class StubEvaluator:
    """Mean of scripted per-episode returns; records every job."""

    def __init__(self, fitness=None):
        self.fitness = fitness
        self.jobs = []
        self.last_bytes = 0
        self.survivor_calls = []

    def evaluate(self, jobs):
        self.jobs.append(list(jobs))
        out = []
        for g, job in jobs:
            if self.fitness is not None:
                f = self.fitness(g)
            else:
                f = statistics.fmean(episode_return(g.genome_id, s) for s in job.seeds)
            out.append(EvalResult(g.genome_id, job.stage, f, job.n_episodes))
        return out

    def set_survivors(self, survivors):
        self.survivor_calls.append([g.genome_id for g in survivors])


class PhenotypeSumEnv:
    """Deterministic fitness from the developed parameters."""

    kind = "stub"

    def check(self, arch):
        pass

    def evaluate(self, phenotype, job):
        return -float(np.abs(phenotype.vector().astype(np.float64) - 0.05).mean()), 1


def test_config_validation():
    with pytest.raises(ValueError):
        GaConfig(population_size=4, truncation=[2, 3], evaluations=[1, 1])
    with pytest.raises(ValueError):
        GaConfig(population_size=4, truncation=[5])
    with pytest.raises(ValueError):
        GaConfig(truncation=[4], evaluations=[1, 2])
    with pytest.raises(ValueError):
        GaConfig(factor_noise="other")


def test_argmax_survivor():
    pop = initial_population(0, 4)
    index = {g.genome_id: i for i, g in enumerate(pop)}
    cfg = GaConfig(population_size=4, truncation=[1], evaluations=[1], generations=1)
    survivors, children, report = run_generation(pop, cfg, StubEvaluator(lambda g: index[g.genome_id]))
    assert survivors == [pop[3]]
    assert len(children) == 4 and children[0] == pop[3]
    assert all(c.parent_id == pop[3].genome_id for c in children[1:])


def test_rank_ties_by_id():
    assert rank({5: 1.0, 3: 1.0, 9: 2.0}) == [9, 3, 5]


def test_staged_fitness_uses_only_stage_episodes():
    pop = initial_population(1, 4)
    cfg = GaConfig(population_size=4, truncation=[2, 1], evaluations=[2, 4], generations=1)
    ev = StubEvaluator()
    survivors, _, report = run_generation(pop, cfg, ev, generation=0, seed=7)
    stage1_jobs = ev.jobs[1]
    assert len(stage1_jobs) == 2 and all(j.n_episodes == 4 and j.stage == 1 for _, j in stage1_jobs)
    for g, job in stage1_jobs:
        expected = statistics.fmean(episode_return(g.genome_id, s) for s in job.seeds)
        row = [r for r in report.candidates if r[0] == 1 and r[1] == g.genome_id][0]
        assert row[2] == expected
    best = max(stage1_jobs, key=lambda gj: (statistics.fmean(episode_return(gj[0].genome_id, s)
                                                             for s in gj[1].seeds), -gj[0].genome_id))[0]
    assert survivors == [best]


def test_no_elitism_children_are_all_new():
    pop = initial_population(0, 6)
    cfg = GaConfig(population_size=6, truncation=[2], generations=1, elitism=False)
    survivors, children, _ = run_generation(pop, cfg, StubEvaluator())
    assert len(children) == 6 and not set(children) & set(survivors)


def test_population_size_mismatch():
    with pytest.raises(ValueError):
        run_generation(initial_population(0, 3), GaConfig(population_size=4, truncation=[1]), StubEvaluator())


def test_reproduce_deterministic_and_uniform_parents():
    parents = initial_population(2, 4)
    a = reproduce(parents, 400, 0.01, 3, 5)
    assert a == reproduce(parents, 400, 0.01, 3, 5)
    counts = [sum(c.parent_id == p.genome_id for c in a) for p in parents]
    assert min(counts) > 60


def local_run(cfg, seed=3, **kw):
    arch = tiny_convnet(2)
    return run_experiment(cfg, arch, PhenotypeSumEnv(), seed=seed, **kw)


def test_sigma_zero_best_unchanged():
    cfg = GaConfig(population_size=6, truncation=[2], generations=4, sigma=0.0)
    res = local_run(cfg)
    assert len({r.best_fitness for r in res.reports}) == 1


def test_elitism_best_non_decreasing():
    cfg = GaConfig(population_size=8, truncation=[2], generations=6, sigma=0.05)
    bests = [r.best_fitness for r in local_run(cfg).reports]
    assert all(b >= a for a, b in zip(bests, bests[1:]))


def test_zero_generations_initial_report_only():
    res = local_run(GaConfig(population_size=4, truncation=[2], generations=0))
    assert [r.generation for r in res.reports] == [0]


def test_generation_count():
    res = local_run(GaConfig(population_size=4, truncation=[2], generations=3))
    assert [r.generation for r in res.reports] == [0, 1, 2]


def test_same_seed_same_survivors():
    cfg = GaConfig(population_size=6, truncation=[2], generations=3, sigma=0.02)
    a, b = local_run(cfg), local_run(cfg)
    assert [r.survivor_ids for r in a.reports] == [r.survivor_ids for r in b.reports]


def strip_time(reports):
    out = []
    for r in reports:
        d = r.to_dict()
        for s in d["stages"]:
            s["wall_time_s"] = 0
        out.append(d)
    return out


def test_resume_matches_straight_run(tmp_path):
    cfg = GaConfig(population_size=6, truncation=[3, 2], evaluations=[1, 2], generations=4, sigma=0.02)
    straight = local_run(cfg)
    local_run(cfg, out_dir=tmp_path, stop_after=1)
    resumed = local_run(cfg, out_dir=tmp_path, resume=True)
    assert strip_time(resumed.reports) == strip_time(straight.reports)


def test_resume_without_checkpoint(tmp_path):
    with pytest.raises(ResumeError):
        local_run(GaConfig(population_size=4, truncation=[2]), out_dir=tmp_path, resume=True)


def test_corrupted_checkpoint(tmp_path):
    cfg = GaConfig(population_size=4, truncation=[2], generations=3)
    local_run(cfg, out_dir=tmp_path, stop_after=0)
    state = tmp_path / "state.json"
    doc = json.loads(state.read_text())
    doc["payload"]["generation"] = 7
    state.write_text(json.dumps(doc))
    with pytest.raises(ResumeError, match="checksum"):
        local_run(cfg, out_dir=tmp_path, resume=True)
    state.write_text("{not json")
    with pytest.raises(ResumeError, match="JSON"):
        local_run(cfg, out_dir=tmp_path, resume=True)


def test_reuse_scores_when_not_reevaluating():
    cfg = GaConfig(population_size=6, truncation=[2], generations=3, reevaluate_survivors=False)
    ev = StubEvaluator()
    run_experiment(cfg, tiny_convnet(), PhenotypeSumEnv(), seed=1, evaluator=ev)
    assert [len(j) for j in ev.jobs] == [6, 4, 4]


def test_threads_do_not_change_results():
    cfg = GaConfig(population_size=6, truncation=[2], generations=3, sigma=0.02)
    arch = tiny_convnet(2)
    a = run_experiment(cfg, arch, PhenotypeSumEnv(), seed=4)
    b = run_experiment(cfg, arch, PhenotypeSumEnv(), seed=4, evaluator=LocalEvaluator(arch, PhenotypeSumEnv(), 3))
    assert [r.candidates for r in a.reports] == [r.candidates for r in b.reports]


def test_report_dict_round_trip():
    res = local_run(GaConfig(population_size=4, truncation=[2], generations=1))
    r = res.reports[0]
    assert GenerationReport.from_dict(json.loads(json.dumps(r.to_dict()))) == r


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=6, max_size=6), st.integers(1, 6))
def test_survivors_are_brute_force_top_k(values, k):
    pop = initial_population(9, 6)
    fit = {g.genome_id: v for g, v in zip(pop, values)}
    cfg = GaConfig(population_size=6, truncation=[k], generations=1)
    survivors, _, _ = run_generation(pop, cfg, StubEvaluator(lambda g: fit[g.genome_id]))
    oracle = sorted(pop, key=lambda g: (-fit[g.genome_id], g.genome_id))[:k]
    assert survivors == oracle
