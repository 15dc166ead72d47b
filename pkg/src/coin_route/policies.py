"""Routing policies: full-knowledge shortest path, full-knowledge COIN, memory-based COIN.

The full-knowledge policies see every router's window-averaged load from the
previous step and assume it persists. A neuron adding ``traffic`` to a router
raises that router's predicted window load by ``traffic / L``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .engine import NeuronAction, NeuronId, SimState, resident_traffic
from .learner import NearestNeighborMemory
from .topology import NetworkTopology

ALGORITHMS = ("fk-spa", "fk-coin", "mb-coin")
LEARNER_PROBABILITY = 0.5
DEFAULT_CAPACITY = 10


@dataclass(frozen=True)
class Knowledge:
    """Window-averaged router loads at ``t - 1``, assumed to hold at ``t``."""

    window_loads: Mapping[int, float]
    window: int

    @classmethod
    def from_state(cls, state: SimState) -> "Knowledge":
        ledger, t = state.ledger, state.clock - 1
        if t < 0:
            return cls({r: 0.0 for r in ledger.routers}, ledger.window)
        return cls({r: ledger.windowed_load(r, t) for r in ledger.routers}, ledger.window)


def _candidate_paths(neuron: NeuronId, topology: NetworkTopology):
    paths = topology.paths(neuron.router, neuron.destination)
    if not paths:
        raise ValueError(f"no path from {neuron.router} to {neuron.destination}")
    return paths


def own_delay_cost(path, traffic: float, knowledge: Knowledge, topology: NetworkTopology) -> float:
    """Predicted delay accrued by this neuron's own traffic along ``path`` (first node excluded)."""
    fns = topology.delay_fns()
    cost = 0.0
    for r in path[1:]:
        if r in fns:
            ell = knowledge.window_loads[r] + traffic / knowledge.window
            cost += traffic / ell * fns[r](ell)
    return cost


def predicted_world_utility(path, traffic: float, knowledge: Knowledge, topology: NetworkTopology) -> float:
    """One-step predicted G when the neuron's traffic follows ``path`` and everyone else holds still."""
    on_path = set(path[1:])
    g = 0.0
    for r, fn in topology.delay_fns().items():
        ell = knowledge.window_loads[r]
        if r in on_path:
            ell += traffic / knowledge.window
        g += fn(ell)
    return g


def _argmin_path(paths, cost):
    best, best_cost = None, None
    for p in paths:
        c = cost(p)
        if best is None or c < best_cost:
            best, best_cost = p, c
    return best


def fk_spa_path(neuron, traffic, knowledge, topology):
    return _argmin_path(_candidate_paths(neuron, topology), lambda p: own_delay_cost(p, traffic, knowledge, topology))


def fk_coin_path(neuron, traffic, knowledge, topology):
    # The clamped term of the subworld utility does not depend on this neuron's
    # action, so maximizing predicted WLU is minimizing predicted G.
    return _argmin_path(
        _candidate_paths(neuron, topology), lambda p: predicted_world_utility(p, traffic, knowledge, topology)
    )


def fk_spa_choose(neuron: NeuronId, traffic: float, knowledge: Knowledge, topology: NetworkTopology) -> NeuronAction:
    if traffic <= 0:
        raise ValueError("traffic must be positive")
    return NeuronAction.atomic(fk_spa_path(neuron, traffic, knowledge, topology)[1], traffic)


def fk_coin_choose(neuron: NeuronId, traffic: float, knowledge: Knowledge, topology: NetworkTopology) -> NeuronAction:
    if traffic <= 0:
        raise ValueError("traffic must be positive")
    return NeuronAction.atomic(fk_coin_path(neuron, traffic, knowledge, topology)[1], traffic)


def first_hops(neuron: NeuronId, topology: NetworkTopology) -> tuple[int, ...]:
    """Outgoing links of the neuron's router that still reach its destination, ascending."""
    return tuple(h for h in topology.successors(neuron.router) if topology.reaches(h, neuron.destination))


def outbound_vector(neuron: NeuronId, next_hop: int, traffic: float, topology: NetworkTopology) -> np.ndarray:
    links = topology.successors(neuron.router)
    x = np.zeros(len(links))
    x[links.index(next_hop)] = traffic
    return x


def mb_coin_choose(
    neuron: NeuronId,
    traffic: float,
    memory: NearestNeighborMemory,
    knowledge: Knowledge,
    topology: NetworkTopology,
    rng,
) -> NeuronAction:
    """Memory-based choice mixed evenly with the shortest-path choice.

    Each candidate first hop is encoded as the outbound-traffic vector over
    all of the router's links (``traffic`` on the chosen link, zero
    elsewhere). Rewards are utilities, so the highest prediction wins; ties
    go to the smallest link id. The coin is only drawn once memory is
    nonempty.
    """
    if traffic <= 0:
        raise ValueError("traffic must be positive")
    spa = fk_spa_choose(neuron, traffic, knowledge, topology)
    if not len(memory):
        return spa
    if rng.random() >= LEARNER_PROBABILITY:
        return spa
    best, best_reward = None, None
    for h in first_hops(neuron, topology):
        r = memory.predict_one(outbound_vector(neuron, h, traffic, topology))
        if best is None or r > best_reward:
            best, best_reward = h, r
    return NeuronAction.atomic(best, traffic)


class Controller:
    """Per-run decision maker: one action per neuron with resident traffic."""

    name = ""

    def __init__(self, topology: NetworkTopology, window: int):
        self.topology = topology
        self.window = window

    def choose(self, neuron: NeuronId, traffic: float, knowledge: Knowledge, state: SimState) -> NeuronAction:
        raise NotImplementedError

    def act(self, state: SimState, knowledge: Knowledge | None = None) -> dict[NeuronId, NeuronAction]:
        if knowledge is None:
            knowledge = Knowledge.from_state(state)
        actions = {}
        for neuron, packets in resident_traffic(state).items():
            traffic = sum(p.amount for p in packets)
            actions[neuron] = self.choose(neuron, traffic, knowledge, state)
            self.attach(neuron, actions[neuron], packets)
        return actions

    def attach(self, neuron, action, packets) -> None:
        pass

    def observe(self, state: SimState, rewards: Mapping[tuple[int, int], float]) -> None:
        pass


class ShortestPathController(Controller):
    name = "fk-spa"

    def choose(self, neuron, traffic, knowledge, state):
        return fk_spa_choose(neuron, traffic, knowledge, self.topology)


class CoinController(Controller):
    name = "fk-coin"

    def choose(self, neuron, traffic, knowledge, state):
        return fk_coin_choose(neuron, traffic, knowledge, self.topology)


class _Decision:
    __slots__ = ("neuron", "x", "credited")

    def __init__(self, neuron, x):
        self.neuron = neuron
        self.x = x
        self.credited = False


class MemoryCoinController(Controller):
    """One nearest-neighbor memory per neuron, trained on echoed rewards.

    Each decision's outbound vector is paired with the negated echo (the
    echo is a delay, the memory stores utilities) credited when the packets
    it routed are absorbed. Memories are first-in first-out with
    ``capacity`` samples, so predictions track recent conditions.
    """

    name = "mb-coin"

    def __init__(self, topology, window, capacity=DEFAULT_CAPACITY):
        super().__init__(topology, window)
        self.capacity = capacity
        self.memories: dict[NeuronId, NearestNeighborMemory] = {}
        self.samples = 0

    def memory(self, neuron: NeuronId) -> NearestNeighborMemory:
        if neuron not in self.memories:
            self.memories[neuron] = NearestNeighborMemory(capacity=self.capacity)
        return self.memories[neuron]

    def choose(self, neuron, traffic, knowledge, state):
        return mb_coin_choose(neuron, traffic, self.memory(neuron), knowledge, self.topology, state.rng)

    def attach(self, neuron, action, packets):
        x = outbound_vector(neuron, action.next_hop, sum(p.amount for p in packets), self.topology)
        handle = _Decision(neuron, x)
        for p in packets:
            p.decisions.append(handle)

    def observe(self, state, rewards):
        for p in state.last_absorbed:
            for handle in p.decisions:
                if handle.credited:
                    continue
                handle.credited = True
                echo = rewards[(handle.neuron.router, p.destination)]
                self.memory(handle.neuron).append(handle.x, -echo)
                self.samples += 1


def make_controller(algorithm: str, topology: NetworkTopology, window: int, capacity=DEFAULT_CAPACITY) -> Controller:
    if algorithm == "fk-spa":
        return ShortestPathController(topology, window)
    if algorithm == "fk-coin":
        return CoinController(topology, window)
    if algorithm == "mb-coin":
        return MemoryCoinController(topology, window, capacity)
    raise ValueError(f"unknown algorithm {algorithm!r} (choose from {', '.join(ALGORITHMS)})")
