"""Rank-based tests for comparing experimental conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _sp

EXACT_LIMIT = 16


class UndefinedEffectSize(ValueError):
    """The control group has zero spread."""


@dataclass(frozen=True)
class SampleGroup:
    label: str
    observations: tuple[float, ...]

    def __post_init__(self):
        if not self.observations:
            raise ValueError(f"group {self.label!r} is empty")


@dataclass(frozen=True)
class TestResult:
    test: str
    statistic: float
    p: float


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    return _sp.rankdata(np.asarray(values, dtype=float), method="average")


def _exact_null(doubled: np.ndarray, n: int) -> dict[int, int]:
    """Counts of every achievable doubled rank sum over size-``n`` subsets."""
    # dp[j] maps a partial sum of j chosen ranks to its number of subsets
    dp: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    dp[0][0] = 1
    for r in doubled:
        r = int(r)
        for j in range(min(n, len(doubled)) - 1, -1, -1):
            for s, c in dp[j].items():
                dp[j + 1][s + r] = dp[j + 1].get(s + r, 0) + c
    return dp[n]


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], method: str = "auto",
                      alternative: str = "two-sided") -> tuple[float, float]:
    """Mann-Whitney ``U`` for ``a`` and its p value.

    ``method="auto"`` enumerates the permutation distribution exactly when
    ``len(a) + len(b) <= 16`` and otherwise uses the normal approximation
    with tie and continuity corrections. ``alternative`` is ``"two-sided"``,
    ``"greater"`` (``a`` tends larger) or ``"less"``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    if n < 2 or m < 2:
        raise ValueError("each sample needs at least two observations")
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if method == "auto":
        method = "exact" if n + m <= EXACT_LIMIT else "approx"
    ranks = midranks(np.concatenate([a, b]))
    r_a = float(ranks[:n].sum())
    u = r_a - n * (n + 1) / 2
    if np.all(ranks == ranks[0]):
        return u, 1.0

    if method == "exact":
        doubled = np.rint(ranks * 2).astype(np.int64)
        null = _exact_null(doubled, n)
        total = sum(null.values())
        obs = int(np.rint(r_a * 2))
        center = n * (n + m + 1)  # doubled expected rank sum
        if alternative == "greater":
            hits = sum(c for s, c in null.items() if s >= obs)
        elif alternative == "less":
            hits = sum(c for s, c in null.items() if s <= obs)
        else:
            dev = abs(obs - center)
            hits = sum(c for s, c in null.items() if abs(s - center) >= dev)
        return u, min(1.0, hits / total)
    if method != "approx":
        raise ValueError(f"unknown method {method!r}")

    N = n + m
    _, counts = np.unique(ranks, return_counts=True)
    tie = float(np.sum(counts ** 3 - counts))
    var = n * m / 12.0 * ((N + 1) - tie / (N * (N - 1)))
    mu = n * m / 2.0
    d = u - mu
    if alternative == "two-sided":
        z = max(abs(d) - 0.5, 0.0) / math.sqrt(var)
        p = 2 * _sp.norm.sf(z)
    elif alternative == "greater":
        p = _sp.norm.sf((d - 0.5) / math.sqrt(var))
    else:
        p = _sp.norm.cdf((d + 0.5) / math.sqrt(var))
    return u, float(min(1.0, p))


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Tie-corrected H statistic and its chi-square p value (g - 1 dof)."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("every group must be non-empty")
    pooled = np.concatenate(groups)
    N = len(pooled)
    ranks = midranks(pooled)
    _, counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - float(np.sum(counts ** 3 - counts)) / (N ** 3 - N) if N > 1 else 0.0
    if correction == 0.0:
        return 0.0, 1.0
    h, start = 0.0, 0
    for g in groups:
        r = ranks[start:start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = (12.0 / (N * (N + 1)) * h - 3 * (N + 1)) / correction
    h = max(h, 0.0)
    return float(h), float(_sp.chi2.sf(h, len(groups) - 1))


def glass_delta(treatment: Sequence[float], control: Sequence[float]) -> float:
    """Mean difference scaled by the control's sample standard deviation."""
    t = np.asarray(treatment, dtype=float)
    c = np.asarray(control, dtype=float)
    if len(t) < 1 or len(c) < 2:
        raise ValueError("need a non-empty treatment and at least two control observations")
    sd = float(np.std(c, ddof=1))
    if sd == 0.0:
        raise UndefinedEffectSize("control group has zero standard deviation")
    return (float(t.mean()) - float(c.mean())) / sd


def compare(groups: Sequence[SampleGroup]) -> list[dict]:
    """Rows of (test, groups, statistic, p, effect size) for a set of conditions.

    Two groups get a rank-sum test; more get Kruskal-Wallis plus every
    pairwise rank-sum. Effect sizes use the second group of a pair as control.
    """
    rows = []
    if len(groups) > 2:
        h, p = kruskal_wallis([g.observations for g in groups])
        rows.append({"test": "kruskal_wallis", "groups": "+".join(g.label for g in groups),
                     "statistic": h, "p": p, "effect_size": ""})
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            a, b = groups[i], groups[j]
            u, p = wilcoxon_rank_sum(a.observations, b.observations)
            try:
                eff: float | str = glass_delta(a.observations, b.observations)
            except UndefinedEffectSize:
                eff = "undefined"
            rows.append({"test": "wilcoxon_rank_sum", "groups": f"{a.label} vs {b.label}",
                         "statistic": u, "p": p, "effect_size": eff})
    return rows
