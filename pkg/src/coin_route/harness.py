"""Replicated experiments, summary statistics, and CSV output."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import stats as _stats

from .engine import SimState, inject, new_state, step, world_utility
from .policies import ALGORITHMS, DEFAULT_CAPACITY, Knowledge, make_controller
from .topology import NetworkTopology, TopologyValidationError, resolve_network
from .wlu import deposit_and_echo

SUMMARY_COLUMNS = ("network", "regime", "algorithm", "runs", "steps", "window", "seed", "mean_delay", "sem")
SERIES_COLUMNS = ("network", "regime", "algorithm", "t", "mean_total_delay")
REGIMES = ("light", "medium", "heavy")


@dataclass
class ExperimentConfig:
    network: str | NetworkTopology = "a"
    regime: str = "medium"
    algorithm: str = "fk-coin"
    window: int = 50
    steps: int = 200
    runs: int = 50
    base_seed: int = 0
    capacity: int | None = DEFAULT_CAPACITY

    def resolve(self) -> NetworkTopology:
        topo = self.network if isinstance(self.network, NetworkTopology) else resolve_network(self.network)
        topo.regime(self.regime)
        if self.algorithm not in ALGORITHMS:
            raise TopologyValidationError(f"unknown algorithm {self.algorithm!r}")
        for name in ("window", "steps", "runs"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise TopologyValidationError(f"{name} must be a positive integer, got {v!r}")
        return topo

    @property
    def network_name(self) -> str:
        if isinstance(self.network, NetworkTopology):
            return self.network.name or "custom"
        return self.network


@dataclass
class ReplicaResult:
    seed: int
    per_packet_delay: float
    world_utility: float
    injected: int
    series: np.ndarray


@dataclass
class RunStats:
    config: ExperimentConfig
    per_run_delay: list[float]
    series: np.ndarray
    mean: float = field(init=False)
    sem: float = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.per_run_delay, dtype=float)
        self.mean = float(a.mean())
        self.sem = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else float("nan")


def run_replica(
    topology: NetworkTopology,
    regime: str,
    algorithm: str,
    window: int = 50,
    steps: int = 200,
    seed: int = 0,
    capacity: int | None = DEFAULT_CAPACITY,
    callback: Callable[[SimState, Knowledge], None] | None = None,
) -> tuple[ReplicaResult, SimState]:
    """One seeded run: ``steps`` injection steps, then drain until every packet is absorbed.

    ``callback(state, knowledge)`` is invoked before each decision round.
    """
    state = new_state(topology, regime, window, seed)
    controller = make_controller(algorithm, topology, window, capacity)
    while state.clock < steps or state.in_flight:
        if state.clock < steps:
            inject(state)
        knowledge = Knowledge.from_state(state)
        if callback is not None:
            callback(state, knowledge)
        actions = controller.act(state, knowledge)
        step(state, actions)
        controller.observe(state, deposit_and_echo(state))
    g = world_utility(state.ledger)
    result = ReplicaResult(
        seed=seed,
        per_packet_delay=g / state.injected_count if state.injected_count else 0.0,
        world_utility=g,
        injected=state.injected_count,
        series=np.asarray(state.series[:steps]),
    )
    return result, state


def _replica_job(args):
    topology, regime, algorithm, window, steps, seed, capacity = args
    return run_replica(topology, regime, algorithm, window, steps, seed, capacity)[0]


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> RunStats:
    topo = config.resolve()
    args = [
        (topo, config.regime, config.algorithm, config.window, config.steps, config.base_seed + i, config.capacity)
        for i in range(config.runs)
    ]
    if jobs > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replica_job, args))
    else:
        results = [_replica_job(a) for a in args]
    series = np.mean([r.series for r in results], axis=0)
    return RunStats(config, [r.per_packet_delay for r in results], series)


def welch_t_test(a: Iterable[float], b: Iterable[float]) -> float:
    """Two-sided Welch t-test p-value."""
    a, b = np.asarray(list(a), dtype=float), np.asarray(list(b), dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two observations")
    if a.var(ddof=1) == 0 and b.var(ddof=1) == 0:
        return 1.0 if a.mean() == b.mean() else 0.0
    with warnings.catch_warnings():
        # a constant sample (deterministic policies) trips scipy's precision-loss warning
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(_stats.ttest_ind(a, b, equal_var=False).pvalue)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return "" if x is None else str(x)


def emit_results(stats: Mapping[tuple, RunStats] | Iterable[RunStats], path, series_path=None) -> None:
    runs = list(stats.values()) if isinstance(stats, Mapping) else list(stats)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in runs:
            c = s.config
            w.writerow([_fmt(v) for v in (c.network_name, c.regime, c.algorithm, c.runs, c.steps, c.window, c.base_seed, s.mean, s.sem)])
    if series_path is not None:
        with open(Path(series_path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_COLUMNS)
            for s in runs:
                c = s.config
                for t, v in enumerate(s.series):
                    w.writerow([c.network_name, c.regime, c.algorithm, t, _fmt(v)])


def sweep(
    networks=("a", "b"),
    regimes=REGIMES,
    algorithms=ALGORITHMS,
    jobs: int = 1,
    progress: Callable[[RunStats], None] | None = None,
    **overrides,
) -> dict[tuple[str, str, str], RunStats]:
    out = {}
    for net in networks:
        for reg in regimes:
            for algo in algorithms:
                s = run_experiment(ExperimentConfig(network=net, regime=reg, algorithm=algo, **overrides), jobs=jobs)
                out[(s.config.network_name, reg, algo)] = s
                if progress is not None:
                    progress(s)
    return out
