import json
import subprocess
import sys

import pytest

from factorevo.harness import ConfigError, load_config, read_runlog
from factorevo.harness.cli import main
from factorevo.harness.runlog import COLUMNS

from conftest import write_json


def tiletrack_config(tmp_path, **over):
    doc = {
        "seed": 1,
        "mode": "tiletrack",
        "representation": "small",
        "arch": "tiletrack_small",
        "env": {"episode_cap": 80},
        "ga": {"population_size": 8, "truncation": [4, 2], "evaluations": [1, 2], "generations": 2,
               "sigma": 0.02, "episode_cap": 80},
        "output_dir": str(tmp_path / "run"),
    }
    doc.update(over)
    return write_json(tmp_path / "cfg.json", doc)


def runlog_rows(out_dir):
    return read_runlog(out_dir / "runlog.csv")


def test_smoke_config(tmp_path, capsys):
    assert main(["run", "smoke", "--out", str(tmp_path / "smoke")]) == 0
    meta, rows = runlog_rows(tmp_path / "smoke")
    assert len(rows) == 2 and list(rows[0]) == COLUMNS
    assert meta["mode"] == "lm" and "config_hash" in meta
    assert "generation 1" in capsys.readouterr().out


def test_cli_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "factorevo", "count-params", "tiletrack_factorized"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "genotype parameters: 1,024" in proc.stdout and "phenotype parameters: 25,140" in proc.stdout


def test_runs_repeat_exactly(tmp_path):
    cfg = tiletrack_config(tmp_path)
    for out in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / out)]) == 0

    def strip(rows):
        return [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    a, b = runlog_rows(tmp_path / "a"), runlog_rows(tmp_path / "b")
    assert a[0] == b[0] and strip(a[1]) == strip(b[1])
    assert (tmp_path / "a/candidates.csv").read_text() == (tmp_path / "b/candidates.csv").read_text()


def test_refuses_existing_run_then_resumes(tmp_path, capsys):
    cfg = tiletrack_config(tmp_path, ga={"population_size": 8, "truncation": [2], "generations": 3,
                                          "episode_cap": 80})
    assert main(["run", str(cfg), "--stop-after", "0"]) == 0
    assert main(["run", str(cfg)]) == 2
    assert "--resume" in capsys.readouterr().err
    assert main(["run", str(cfg), "--resume"]) == 0
    _, rows = runlog_rows(tmp_path / "run")
    assert [int(r["generation"]) for r in rows] == [0, 1, 2]
    assert main(["run", str(cfg), "--overwrite"]) == 0


def test_replay_matches_logged(tmp_path, capsys):
    cfg = tiletrack_config(tmp_path)
    assert main(["run", str(cfg)]) == 0
    capsys.readouterr()
    traj = tmp_path / "traj.csv"
    assert main(["replay", str(tmp_path / "run/best_genome.json"), "--trajectory", str(traj)]) == 0
    assert "match=True" in capsys.readouterr().out
    lines = traj.read_text().splitlines()
    assert lines[0] == "episode,step,action,reward" and len(lines) > 1


def test_replay_bad_file(tmp_path):
    bad = tmp_path / "g.json"
    bad.write_text("{broken")
    assert main(["replay", str(bad)]) != 0


def test_missing_arch_reports_line(tmp_path, capsys):
    cfg = tiletrack_config(tmp_path, arch="nowhere.json")
    assert main(["run", str(cfg)]) != 0
    err = capsys.readouterr().err
    line = cfg.read_text().splitlines().index('  "arch": "nowhere.json",') + 1
    assert f"cfg.json:{line}" in err and "not found" in err


@pytest.mark.parametrize("over, needle", [
    ({"mode": "chess"}, "mode must be"),
    ({"representation": "factorized"}, "does not match"),
    ({"bogus": 1}, "unknown key"),
    ({"seed": -1}, "seed"),
    ({"threads": 0}, "threads"),
    ({"ga": {"population_size": 4, "truncation": [8]}}, "invalid ga"),
    ({"ga": {"population": 4}}, "unknown ga setting"),
    ({"env": {"kind": "lm"}}, "env must"),
    ({"distributed": {"listen": "nohost"}}, "HOST:PORT"),
    ({"arch": "desk_lm_small"}, "cannot run in tiletrack"),
])
def test_config_errors(tmp_path, over, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(tiletrack_config(tmp_path, **over))


def test_invalid_json_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "mode": "lm",\n  oops\n}')
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert info.value.line == 3


def test_config_hash_ignores_paths(tmp_path):
    a = load_config(tiletrack_config(tmp_path))
    b = load_config(tiletrack_config(tmp_path, output_dir="elsewhere", threads=2))
    c = load_config(tiletrack_config(tmp_path, seed=9))
    assert a.config_hash == b.config_hash != c.config_hash


def test_count_params_transformer_interpretation(capsys):
    assert main(["count-params", "transformer_factorized"]) == 0
    out = capsys.readouterr().out
    assert "interpretation:" in out and "phenotype parameters: 99,024" in out


def test_count_params_rerepresent(capsys):
    assert main(["count-params", "atari_nonfactorized", "--representation", "factorized", "--rank", "1"]) == 0
    assert "phenotype parameters: 902,066" in capsys.readouterr().out
    assert main(["count-params", "no_such_arch"]) == 2


def test_stats_columns(tmp_path, capsys):
    p = tmp_path / "s.csv"
    p.write_text("a,b\n1,6\n2,7\n3,8\n4,9\n5,10\n")
    assert main(["stats", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "test,groups,statistic,p,effect_size"
    assert out[1].startswith("wilcoxon_rank_sum,a vs b,0.0,0.00793650793650")


def test_stats_runs(tmp_path, capsys):
    for i, seed in enumerate((1, 2, 3, 4)):
        cfg = tiletrack_config(tmp_path, seed=seed, ga={"population_size": 4, "truncation": [2],
                                                        "generations": 1, "episode_cap": 40})
        group = "x" if i < 2 else "y"
        assert main(["run", str(cfg), "--out", str(tmp_path / f"{group}{i}")]) == 0
    capsys.readouterr()
    assert main(["stats", "--runs", f"x={tmp_path}/x*", f"y={tmp_path}/y*"]) == 0
    assert "x vs y" in capsys.readouterr().out
    assert main(["stats", "--runs", f"z={tmp_path}/none*", f"y={tmp_path}/y*"]) == 2
