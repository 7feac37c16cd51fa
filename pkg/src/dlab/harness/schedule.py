"""Parallel Monte-Carlo scheduling with worker-count independent summaries.

Each task gets its index and must derive its randomness from it alone.  Results
are collected by index and reduced in index order, so the floating point sums
do not depend on completion order or on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def default_workers() -> int:
    raw = os.environ.get("DLAB_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class MonteCarloSummary:
    tasks: int
    count: int
    names: list
    sums: dict
    sumsq: dict
    maxima: dict
    minima: dict
    failed: list = field(default_factory=list)  # (index, message)
    values: dict = field(default_factory=dict)  # name -> per-task array (nan for failures)

    @property
    def ok(self) -> bool:
        return not self.failed

    def mean(self, name: str) -> float:
        return self.sums[name] / self.count if self.count else math.nan

    def std(self, name: str) -> float:
        if self.count < 2:
            return math.nan
        m = self.mean(name)
        var = max(self.sumsq[name] / self.count - m * m, 0.0)
        return math.sqrt(var * self.count / (self.count - 1))

    def rows(self) -> list[dict]:
        return [
            {
                "name": n,
                "count": self.count,
                "mean": self.mean(n),
                "std": self.std(n),
                "min": self.minima[n],
                "max": self.maxima[n],
                "sum": self.sums[n],
                "sumsq": self.sumsq[n],
            }
            for n in self.names
        ]


def montecarlo_schedule(
    task: Callable[[int], dict], tasks: int, workers: int | None = None
) -> MonteCarloSummary:
    """Run ``task(i)`` for i < tasks on a thread pool and reduce sums, squares and extrema.

    A task that raises is marked failed and left out of the aggregates.
    """
    if tasks < 1:
        raise ValueError("trials must be ≥ 1")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def guarded(i):
        try:
            return i, task(i), None
        except Exception as exc:  # surfaced in the summary, not swallowed
            return i, None, f"{type(exc).__name__}: {exc}"

    if workers == 1:
        results = [guarded(i) for i in range(tasks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, range(tasks)))
    results.sort(key=lambda r: r[0])

    good = [r for r in results if r[2] is None]
    names = sorted(good[0][1]) if good else []
    for _, res, _ in good:
        if sorted(res) != names:
            raise ValueError("tasks returned inconsistent result keys")
    values = {n: np.full(tasks, math.nan) for n in names}
    for i, res, _ in good:
        for n in names:
            values[n][i] = float(res[n])
    sums, sumsq, maxima, minima = {}, {}, {}, {}
    for n in names:
        s = q = 0.0
        hi, lo = -math.inf, math.inf
        for i, res, _ in good:
            x = float(res[n])
            s += x
            q += x * x
            hi = max(hi, x)
            lo = min(lo, x)
        sums[n], sumsq[n], maxima[n], minima[n] = s, q, hi, lo
    failed = [(i, msg) for i, _, msg in results if msg is not None]
    return MonteCarloSummary(tasks, len(good), names, sums, sumsq, maxima, minima, failed, values)
