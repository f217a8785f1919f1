"""A master with worker processes on loopback, compared to a local run.

One worker is told to crash partway through; its jobs are re-queued and
the results still match the single-process run bit for bit.
"""

import argparse
import subprocess
import sys

from factorevo.dist import Master, account_bandwidth
from factorevo.envs import make_env
from factorevo.envs.lm import data_path
from factorevo.evolve import GaConfig, run_experiment
from factorevo.layers import ArchitectureSpec, count_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=3)
    ap.add_argument("--crash-after", type=int, default=4, help="jobs before the first worker dies")
    ap.add_argument("--generations", type=int, default=3)
    args = ap.parse_args()

    arch = ArchitectureSpec.load(data_path("archs/tiletrack_small.json"))
    env_doc = {"kind": "tiletrack", "episode_cap": 200}
    cfg = GaConfig(population_size=16, truncation=[4, 2], evaluations=[1, 2], generations=args.generations,
                   episode_cap=200)

    local = run_experiment(cfg, arch, make_env(env_doc), seed=3)
    with Master(arch.to_dict(), env_doc, worker_wait=30) as master:
        host, port = master.address
        cmd = [sys.executable, "-m", "factorevo", "worker", "--connect", f"{host}:{port}"]
        procs = [subprocess.Popen(cmd + (["--die-after", str(args.crash_after)] if i == 0 else []))
                 for i in range(args.workers)]
        master.wait_for_workers(args.workers)
        print(f"{args.workers} workers connected to {host}:{port}")
        remote = run_experiment(cfg, arch, make_env(env_doc), seed=3, evaluator=master)
    for p in procs:
        p.wait()
    print(f"worker exit codes: {[p.returncode for p in procs]}")

    same = [r.candidates for r in local.reports] == [r.candidates for r in remote.reports]
    print(f"every (genome, stage, fitness) identical to the local run: {same}")
    rows = [{"candidate_count": s.candidate_count, "bytes_transmitted": s.bytes_transmitted}
            for r in remote.reports for s in r.stages]
    acc = account_bandwidth(rows, count_params(arch, "phenotype"))
    # jobs re-sent after the crash are counted too, so this sits a little above one frame
    print(f"{acc['genomes_sent']} candidate evaluations, {acc['bytes_per_genome']:.1f} request bytes per candidate")


if __name__ == "__main__":
    main()
