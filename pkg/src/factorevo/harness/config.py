"""JSON run configuration.

Example::

    {
      "seed": 0,
      "mode": "lm",
      "representation": "factorized",
      "arch": "desk_lm_factorized",
      "env": {"vocab_size": 256, "n_sequences": 32, "max_seq_len": 64},
      "ga": {"population_size": 64, "truncation": [16], "evaluations": [1],
             "generations": 30, "sigma": 0.01},
      "output_dir": "runs/lm_factorized",
      "threads": 1,
      "distributed": {"enabled": false, "listen": "127.0.0.1:5555", "workers": 3}
    }

``arch`` is a path (relative to the config file) or the name of a bundled
architecture. Relative ``output_dir`` values are resolved against the
current directory.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from ..envs.lm import data_path
from ..evolve import GaConfig
from ..layers import ArchitectureError, ArchitectureSpec

MODES = ("lm", "tiletrack")
REPRESENTATIONS = ("factorized", "nonfactorized", "small")
_TOP_KEYS = {"seed", "mode", "representation", "arch", "env", "ga", "output_dir", "threads", "distributed"}
_DIST_KEYS = {"enabled", "listen", "workers", "job_timeout", "worker_wait"}


class ConfigError(ValueError):
    """Invalid run configuration, with the offending line when known."""

    def __init__(self, path: str | Path, message: str, line: int | None = None):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


@dataclass
class DistConfig:
    enabled: bool = False
    listen: str = "127.0.0.1:5555"
    workers: int = 1
    job_timeout: float = 60.0
    worker_wait: float = 30.0

    @property
    def host_port(self) -> tuple[str, int]:
        return parse_address(self.listen)


@dataclass
class RunConfig:
    seed: int
    mode: str
    representation: str
    arch_path: Path
    ga: GaConfig
    env: dict[str, Any] = field(default_factory=dict)
    output_dir: Path = Path("runs/default")
    threads: int = 1
    distributed: DistConfig = field(default_factory=DistConfig)
    source: dict[str, Any] = field(default_factory=dict)

    def arch(self) -> ArchitectureSpec:
        return ArchitectureSpec.load(self.arch_path)

    def env_dict(self) -> dict[str, Any]:
        d = dict(self.env)
        d["kind"] = self.mode
        if self.mode == "tiletrack":
            d.setdefault("episode_cap", self.ga.episode_cap)
        return d

    @property
    def config_hash(self) -> str:
        """Hash of the settings that determine results (not paths or thread counts)."""
        doc = {k: v for k, v in self.source.items() if k not in ("output_dir", "threads", "distributed")}
        doc["arch"] = json.loads(self.arch_path.read_text())
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def resolve_arch(ref: str, base: Path) -> Path:
    """A path relative to ``base`` or a bundled architecture name."""
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    if p.exists():
        return p
    bundled = data_path("archs") / (ref if ref.endswith(".json") else ref + ".json")
    if bundled.exists():
        return bundled
    raise FileNotFoundError(ref)


def bundled_config(name: str) -> Path:
    return data_path("configs") / (name if name.endswith(".json") else name + ".json")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists() and bundled_config(str(path)).exists():
        path = bundled_config(str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(path, f"cannot read config ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError(path, "top level must be a JSON object", 1)

    def fail(key: str, message: str):
        raise ConfigError(path, message, _line_of(text, key))

    for key in doc:
        if key not in _TOP_KEYS:
            fail(key, f"unknown key {key!r}")
    for key in ("mode", "arch", "ga"):
        if key not in doc:
            raise ConfigError(path, f"missing required key {key!r}")
    mode = doc["mode"]
    if mode not in MODES:
        fail("mode", f"mode must be one of {MODES}, got {mode!r}")
    rep = doc.get("representation", "nonfactorized")
    if rep not in REPRESENTATIONS:
        fail("representation", f"representation must be one of {REPRESENTATIONS}, got {rep!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        fail("seed", "seed must be a non-negative integer")

    try:
        arch_path = resolve_arch(str(doc["arch"]), path.parent)
    except FileNotFoundError:
        fail("arch", f"architecture file {doc['arch']!r} not found")
    try:
        arch = ArchitectureSpec.load(arch_path)
    except (ArchitectureError, KeyError, TypeError, ValueError) as exc:
        fail("arch", f"invalid architecture {arch_path}: {exc}")
    want = "factorized" if rep == "factorized" else "nonfactorized"
    if arch.representation != want:
        fail("representation", f"representation {rep!r} does not match {arch.representation} architecture")
    if (arch.family == "transformer") != (mode == "lm"):
        fail("arch", f"{arch.family} architecture cannot run in {mode} mode")

    ga_doc = doc["ga"]
    if not isinstance(ga_doc, dict):
        fail("ga", "ga must be an object")
    known = {f.name for f in fields(GaConfig)}
    for key in ga_doc:
        if key not in known:
            fail(key, f"unknown ga setting {key!r}")
    try:
        ga = GaConfig(**ga_doc)
    except (TypeError, ValueError) as exc:
        fail("ga", f"invalid ga settings: {exc}")

    env = doc.get("env", {})
    if not isinstance(env, dict) or "kind" in env:
        fail("env", "env must be an object without 'kind' (the mode selects it)")

    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        fail("threads", "threads must be a positive integer")

    dist_doc = doc.get("distributed", {})
    if not isinstance(dist_doc, dict) or set(dist_doc) - _DIST_KEYS:
        fail("distributed", f"distributed accepts only {sorted(_DIST_KEYS)}")
    dist = DistConfig(**dist_doc)
    try:
        dist.host_port
    except ValueError as exc:
        fail("listen", str(exc))

    return RunConfig(seed, mode, rep, arch_path, ga, env, Path(doc.get("output_dir", f"runs/{path.stem}")),
                     threads, dist, doc)
