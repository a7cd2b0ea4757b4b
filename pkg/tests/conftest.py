from __future__ import annotations

import time

import numpy as np
import pytest

from causefs import HyperParams, SyntheticSpec, fit, synthesize

BENCH_SEEDS = tuple(range(10))
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class BenchmarkCache:
    """Synthetic benchmark datasets and fits, computed once per session."""

    def __init__(self):
        self._data = {}
        self._fits = {}

    def data(self, seed):
        if seed not in self._data:
            self._data[seed] = synthesize(SyntheticSpec(seed=seed))
        return self._data[seed]

    def fit(self, seed, variant="full"):
        key = (seed, variant)
        if key not in self._fits:
            data, _ = self.data(seed)
            hyper = HyperParams(rho=10, seed=seed, variant=variant)
            start = time.perf_counter()
            state, ranking = fit(data, hyper)
            self._fits[key] = (state, ranking, hyper, time.perf_counter() - start)
        return self._fits[key]


@pytest.fixture(scope="session")
def bench():
    return BenchmarkCache()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
