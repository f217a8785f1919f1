"""Command-line entry point.

Subcommands: run, master, worker, count-params, replay, stats. Set
``FACTOREVO_LOG`` (DEBUG, INFO, WARNING, ...) to control log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
from pathlib import Path

from ..envs import EvalJobSpec, make_env, run_episode
from ..evolve import STATE_FILE, LocalEvaluator, ResumeError, run_experiment
from ..genome import Genome, develop
from ..layers import ArchitectureError, ArchitectureSpec, count_params, param_table, with_representation
from ..stats import SampleGroup, compare
from .config import ConfigError, RunConfig, load_config, parse_address, resolve_arch
from .runlog import CANDIDATES, RUNLOG, RunLog, final_best, read_runlog, write_best_genome

log = logging.getLogger("factorevo")

EXIT_USAGE = 2
EXIT_RUNTIME = 1
EXIT_WORKERS_LOST = 3


def _setup_logging() -> None:
    level = os.environ.get("FACTOREVO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


# -- run / master -------------------------------------------------------------------

def execute(cfg: RunConfig, *, resume: bool = False, overwrite: bool = False, distributed: bool | None = None,
            stop_after: int | None = None, out=None) -> int:
    """Run an experiment described by ``cfg``; returns an exit status."""
    from ..dist import Master, WorkersLost

    out = out or sys.stdout
    arch = cfg.arch()
    env_dict = cfg.env_dict()
    env = make_env(env_dict)
    env.check(arch)
    out_dir = cfg.output_dir
    state = out_dir / STATE_FILE
    if not resume and (state.exists() or (out_dir / RUNLOG).exists()):
        if not overwrite:
            print(f"error: {out_dir} already holds a run; use --resume or --overwrite", file=sys.stderr)
            return EXIT_USAGE
        for name in (STATE_FILE, RUNLOG, CANDIDATES):
            (out_dir / name).unlink(missing_ok=True)
    runlog = RunLog(out_dir, {"config_hash": cfg.config_hash, "seed": str(cfg.seed),
                              "arch": arch.name, "mode": cfg.mode})

    use_master = cfg.distributed.enabled if distributed is None else distributed
    master = None
    if use_master:
        host, port = cfg.distributed.host_port
        master = Master(arch.to_dict(), env_dict, host, port, factor_noise=cfg.ga.factor_noise,
                        job_timeout=cfg.distributed.job_timeout, worker_wait=cfg.distributed.worker_wait)
        print(f"master listening on {master.address[0]}:{master.address[1]}", file=out, flush=True)
        master.wait_for_workers(cfg.distributed.workers, timeout=max(60.0, cfg.distributed.worker_wait))
        evaluator = master
    else:
        evaluator = LocalEvaluator(arch, env, threads=cfg.threads, factor_noise=cfg.ga.factor_noise)

    if resume and state.exists():
        from ..evolve import GenerationReport, load_state

        try:
            runlog.catch_up(GenerationReport.from_dict(r) for r in load_state(state)["reports"])
        except (ResumeError, KeyError, TypeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME

    def on_report(report, _survivors):
        runlog.append(report)
        print(f"generation {report.generation}: best {report.best_fitness:.6f} "
              f"(cumulative {report.cumulative_best:.6f})", file=out, flush=True)

    try:
        result = run_experiment(cfg.ga, arch, env, seed=cfg.seed, evaluator=evaluator, out_dir=out_dir,
                                resume=resume, on_report=on_report, stop_after=stop_after)
    except ResumeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except WorkersLost as exc:
        print(f"error: {exc}; resume with --resume once workers are back", file=sys.stderr)
        return EXIT_WORKERS_LOST
    finally:
        if master is not None:
            master.close()

    if result.reports:
        last = result.reports[-1]
        best = result.survivors[0]
        write_best_genome(out_dir, best, last.best_fitness, last.final_job, arch.to_dict(), env_dict,
                          cfg.ga.factor_noise)
        print(f"best genome {best.genome_id} fitness {last.best_fitness:.6f}; log in {out_dir / RUNLOG}", file=out)
    return 0


def _load(path: str) -> RunConfig:
    return load_config(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.output_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    return execute(cfg, resume=args.resume, overwrite=args.overwrite, stop_after=args.stop_after)


def cmd_master(args) -> int:
    cfg = _load(args.config)
    if args.listen:
        cfg.distributed.listen = args.listen
        cfg.distributed.host_port
    if args.workers is not None:
        cfg.distributed.workers = args.workers
    if args.out is not None:
        cfg.output_dir = Path(args.out)
    return execute(cfg, resume=args.resume, overwrite=args.overwrite, distributed=True)


def cmd_worker(args) -> int:
    from ..dist import run_worker

    host, port = parse_address(args.connect)
    n = run_worker(host, port, die_after=args.die_after)
    log.info("worker finished after %d jobs", n)
    return 0


# -- inspection -----------------------------------------------------------------------

def cmd_count_params(args) -> int:
    try:
        arch = ArchitectureSpec.load(resolve_arch(args.arch, Path.cwd()))
    except FileNotFoundError:
        print(f"error: architecture {args.arch!r} not found", file=sys.stderr)
        return EXIT_USAGE
    if args.representation:
        arch = with_representation(arch, args.representation,
                                   args.rank if args.representation == "factorized" else None)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["layer", "kind", "shape", "genotype", "phenotype"])
    for row in param_table(arch):
        w.writerow([row["layer"], row["kind"], row["shape"], row["genotype"], row["phenotype"]])
    g, p = count_params(arch, "genotype"), count_params(arch, "phenotype")
    w.writerow(["total", "", "", g, p])
    if args.mode in ("genotype", "both"):
        print(f"genotype parameters: {g:,}")
    if args.mode in ("phenotype", "both"):
        print(f"phenotype parameters: {p:,}")
    if arch.family == "transformer":
        from ..transformer import config_of

        print(f"interpretation: {config_of(arch).describe()}")
    return 0


def cmd_replay(args) -> int:
    try:
        doc = json.loads(Path(args.genome).read_text())
        genome = Genome.from_dict(doc["genome"])
        arch = ArchitectureSpec.from_dict(doc["arch"])
        env = make_env(doc["env"])
        job_doc = doc["job"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, ArchitectureError) as exc:
        print(f"error: cannot read genome file {args.genome}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    phenotype = develop(genome, arch, doc.get("factor_noise", "factor"))
    job = EvalJobSpec(env.kind, job_doc["base_seed"] if args.env_seed is None else args.env_seed,
                      args.episodes or job_doc["n_episodes"], job_doc["episode_cap"], job_doc["stage"])
    rows = []
    if env.kind == "tiletrack":
        scores = []
        for ep, seed in enumerate(job.seeds):
            trace: list = []
            score, _ = run_episode(phenotype, seed, job.episode_cap, trace)
            scores.append(score)
            rows += [(ep, *t) for t in trace]
        fitness = sum(scores) / len(scores)
    else:
        fitness, _ = env.evaluate(phenotype, job)
    print(f"fitness={fitness!r}")
    if args.env_seed is None and args.episodes is None and "fitness" in doc:
        print(f"logged={doc['fitness']!r} match={fitness == doc['fitness']}")
    if args.trajectory:
        with open(args.trajectory, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["episode", "step", "action", "reward"])
            w.writerows(rows)
    return 0


def _read_columns(path: str, columns: list[str] | None) -> list[SampleGroup]:
    lines = [l for l in Path(path).read_text().splitlines() if l.strip() and not l.startswith("#")]
    reader = csv.DictReader(lines)
    names = columns or list(reader.fieldnames or [])
    data: dict[str, list[float]] = {c: [] for c in names}
    for row in reader:
        for c in names:
            if c not in row:
                raise ValueError(f"{path}: no column {c!r}")
            if row[c] not in ("", None):
                data[c].append(float(row[c]))
    return [SampleGroup(c, tuple(v)) for c, v in data.items()]


def _read_runs(specs: list[str]) -> list[SampleGroup]:
    groups = []
    for spec in specs:
        label, sep, pattern = spec.partition("=")
        if not sep:
            raise ValueError(f"--runs expects LABEL=GLOB, got {spec!r}")
        logs = []
        for p in sorted(glob.glob(pattern)):
            p = Path(p)
            logs.append(p / RUNLOG if p.is_dir() else p)
        if not logs:
            raise ValueError(f"no run logs match {pattern!r}")
        for p in logs:
            read_runlog(p)
        groups.append(SampleGroup(label, tuple(final_best(p) for p in logs)))
    return groups


def cmd_stats(args) -> int:
    try:
        if args.runs:
            groups = _read_runs(args.runs)
        elif args.csv:
            groups = _read_columns(args.csv, args.columns)
        else:
            print("error: give a CSV file or --runs", file=sys.stderr)
            return EXIT_USAGE
        if len(groups) < 2:
            raise ValueError("need at least two groups")
        rows = compare(groups)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    w = csv.DictWriter(sys.stdout, ["test", "groups", "statistic", "p", "effect_size"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return 0


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="factorevo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("config", help="run config JSON (path or bundled name)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
        p.add_argument("--overwrite", action="store_true", help="replace an existing run in the output directory")

    p = sub.add_parser("run", help="run an experiment")
    run_flags(p)
    p.add_argument("--threads", type=int, help="evaluation threads; 1 is the reference mode")
    p.add_argument("--seed", type=int, help="experiment seed (overrides the config)")
    p.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("master", help="run an experiment with remote workers")
    run_flags(p)
    p.add_argument("--listen", help="HOST:PORT to accept workers on")
    p.add_argument("--workers", type=int, help="workers to wait for before starting")
    p.set_defaults(func=cmd_master)

    p = sub.add_parser("worker", help="serve evaluations for a master")
    p.add_argument("--connect", required=True, help="master HOST:PORT")
    p.add_argument("--die-after", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("count-params", help="genotype and phenotype parameter counts")
    p.add_argument("arch", help="architecture JSON (path or bundled name)")
    p.add_argument("--mode", choices=("genotype", "phenotype", "both"), default="both")
    p.add_argument("--representation", choices=("factorized", "nonfactorized"),
                   help="re-express a convnet in another representation")
    p.add_argument("--rank", type=int, default=1)
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("replay", help="re-evaluate a saved genome")
    p.add_argument("genome", help="best_genome.json from a run")
    p.add_argument("--env-seed", type=int, help="base environment seed (default: the logged one)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--trajectory", help="write (episode, step, action, reward) rows here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="compare conditions with rank-based tests")
    p.add_argument("csv", nargs="?", help="CSV whose columns are conditions")
    p.add_argument("--columns", nargs="+", help="subset of columns to compare")
    p.add_argument("--runs", nargs="+", metavar="LABEL=GLOB",
                   help="groups of run directories; compares final best fitness")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
