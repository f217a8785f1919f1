"""CSV run logs.

``runlog.csv`` starts with ``# key=value`` metadata lines followed by one
row per (generation, stage). ``candidates.csv`` has every evaluated
candidate. Both files are only ever appended to.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

from .. import __version__
from ..evolve import GenerationReport
from ..genome import Genome

RUNLOG = "runlog.csv"
CANDIDATES = "candidates.csv"
BEST_GENOME = "best_genome.json"

COLUMNS = ["generation", "stage", "candidate_count", "best_fitness", "mean_fitness", "median_fitness",
           "wall_time_s", "env_steps", "bytes_transmitted"]
CANDIDATE_COLUMNS = ["generation", "stage", "genome_id", "fitness", "env_steps"]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


class RunLog:
    def __init__(self, out_dir: str | Path, metadata: dict[str, str]):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / RUNLOG
        self.cand_path = self.dir / CANDIDATES
        if not self.path.exists():
            head = "".join(f"# {k}={v}\n" for k, v in {"version": __version__, **metadata}.items())
            self.path.write_text(head + ",".join(COLUMNS) + "\n")
            self.cand_path.write_text(",".join(CANDIDATE_COLUMNS) + "\n")

    def logged_generations(self) -> set[int]:
        _, rows = read_runlog(self.path)
        return {int(r["generation"]) for r in rows}

    def append(self, report: GenerationReport) -> None:
        with self.path.open("a", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            for s in report.stages:
                w.writerow([report.generation, s.stage, s.candidate_count, _fmt(s.best_fitness),
                            _fmt(s.mean_fitness), _fmt(s.median_fitness), f"{s.wall_time_s:.6f}",
                            s.env_steps, s.bytes_transmitted])
        with self.cand_path.open("a", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            for stage, gid, fit, steps in report.candidates:
                w.writerow([report.generation, stage, gid, _fmt(fit), steps])

    def catch_up(self, reports: Iterable[GenerationReport]) -> None:
        """Append reports that a crash kept out of the log."""
        done = self.logged_generations()
        for r in reports:
            if r.generation not in done:
                self.append(r)


def read_runlog(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return meta, rows


def final_best(path: str | Path) -> float:
    """Best fitness of the last logged generation's final stage."""
    _, rows = read_runlog(path)
    if not rows:
        raise ValueError(f"{path}: no generation rows")
    last = max(int(r["generation"]) for r in rows)
    final = [r for r in rows if int(r["generation"]) == last]
    return float(max(final, key=lambda r: int(r["stage"]))["best_fitness"])


def write_best_genome(out_dir: str | Path, genome: Genome, fitness: float, job, arch: dict, env: dict,
                      factor_noise: str = "factor") -> Path:
    doc = {
        "genome": genome.to_dict(),
        "fitness": fitness,
        "job": {"base_seed": job.base_seed, "n_episodes": job.n_episodes, "episode_cap": job.episode_cap,
                "stage": job.stage},
        "arch": arch,
        "env": env,
        "factor_noise": factor_noise,
    }
    path = Path(out_dir) / BEST_GENOME
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path
