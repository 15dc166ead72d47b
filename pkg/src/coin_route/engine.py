"""Discrete-time traffic simulation.

Each timestep the routers' resident traffic is recorded in a :class:`LoadLedger`,
every router with traffic accrues ``W_r(windowed load)`` of delay (split across
its packets by amount), and then every packet moves exactly one hop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .topology import DelayFn, NetworkTopology, UnknownNodeError

_EPS = 1e-9


class RoutingError(ValueError):
    """An action routes along a missing link or strands traffic."""


class NeuronId(NamedTuple):
    """A (router, ultimate destination) pair: the unit that makes routing decisions."""

    router: int
    destination: int


@dataclass(frozen=True)
class NeuronAction:
    """Allocation of one neuron's resident traffic over its outgoing links."""

    allocation: Mapping[int, float]

    @classmethod
    def atomic(cls, next_hop: int, amount: float) -> "NeuronAction":
        return cls({next_hop: amount})

    @property
    def next_hop(self) -> int:
        if len(self.allocation) != 1:
            raise ValueError("allocation is split across several links")
        return next(iter(self.allocation))


class LoadLedger:
    """Per (router, destination, timestep) traffic, plus the routers' delay functions.

    Rows are append-only: once timestep ``t + 1`` has been written, row ``t``
    can no longer change.
    """

    def __init__(self, delay_fns: Mapping[int, DelayFn], destinations, window: int, capacity: int = 64):
        if int(window) != window or window < 1:
            raise ValueError(f"window must be a positive integer, got {window!r}")
        self.delay_fns = dict(sorted(delay_fns.items()))
        self.routers = tuple(self.delay_fns)
        self.destinations = tuple(destinations)
        self.window = int(window)
        self._ri = {r: i for i, r in enumerate(self.routers)}
        self._di = {d: j for j, d in enumerate(self.destinations)}
        cap = max(int(capacity), 1)
        self._loads = np.zeros((cap, len(self.routers), len(self.destinations)))
        self._totals = np.zeros((cap, len(self.routers)))
        self.horizon = 0

    @classmethod
    def from_array(cls, delay_fns, destinations, window, loads) -> "LoadLedger":
        """Build a ledger from a ``(T, routers, destinations)`` array (routers in sorted order)."""
        loads = np.asarray(loads, dtype=float)
        if loads.ndim != 3 or loads.shape[1:] != (len(delay_fns), len(destinations)):
            raise ValueError(f"loads shape {loads.shape} does not match routers x destinations")
        if (loads < 0).any():
            raise ValueError("loads must be nonnegative")
        led = cls(delay_fns, destinations, window, capacity=len(loads))
        led._loads[: len(loads)] = loads
        led._totals[: len(loads)] = loads.sum(axis=2)
        led.horizon = len(loads)
        return led

    def copy(self) -> "LoadLedger":
        return LoadLedger.from_array(self.delay_fns, self.destinations, self.window, self.array)

    def router_index(self, router: int) -> int:
        try:
            return self._ri[router]
        except KeyError:
            raise UnknownNodeError(router) from None

    def destination_index(self, destination: int) -> int | None:
        return self._di.get(destination)

    def extend(self, horizon: int) -> None:
        """Grow the ledger to cover timesteps ``0 .. horizon - 1`` (new rows are zero)."""
        if horizon <= self.horizon:
            return
        cap = len(self._loads)
        if horizon > cap:
            new_cap = max(horizon, 2 * cap)
            loads = np.zeros((new_cap,) + self._loads.shape[1:])
            loads[:cap] = self._loads
            totals = np.zeros((new_cap, len(self.routers)))
            totals[:cap] = self._totals
            self._loads, self._totals = loads, totals
        self.horizon = horizon

    def record(self, router: int, destination: int, t: int, amount: float) -> None:
        if amount < 0:
            raise ValueError("loads must be nonnegative")
        if t < self.horizon - 1:
            raise ValueError(f"ledger is append-only: cannot write t={t} after t={self.horizon - 1}")
        ri = self.router_index(router)
        di = self._di.get(destination)
        if di is None:
            raise UnknownNodeError(destination)
        self.extend(t + 1)
        self._loads[t, ri, di] += amount
        self._totals[t, ri] += amount

    def load(self, router: int, destination: int, t: int) -> float:
        di = self._di.get(destination)
        ri = self.router_index(router)
        if di is None or not 0 <= t < self.horizon:
            return 0.0
        return float(self._loads[t, ri, di])

    def total_load(self, router: int, t: int) -> float:
        ri = self.router_index(router)
        if not 0 <= t < self.horizon:
            return 0.0
        return float(self._totals[t, ri])

    def windowed_load(self, router: int, t: int, exclude: int | None = None) -> float:
        """Mean total load over ``t - L + 1 .. t``; ``exclude`` drops one destination's traffic."""
        if t < 0:
            raise ValueError(f"timestep must be nonnegative, got {t}")
        ri = self.router_index(router)
        lo, hi = max(0, t - self.window + 1), min(t + 1, self.horizon)
        if hi <= lo:
            return 0.0
        s = float(self._totals[lo:hi, ri].sum())
        if exclude is not None and exclude in self._di:
            s -= float(self._loads[lo:hi, ri, self._di[exclude]].sum())
            s = max(s, 0.0)
        return s / self.window

    def occupied(self, router: int, t: int, exclude: int | None = None) -> bool:
        ri = self.router_index(router)
        if not 0 <= t < self.horizon:
            return False
        row = self._loads[t, ri]
        if exclude is not None and exclude in self._di:
            row = np.delete(row, self._di[exclude])
        return bool((row > 0).any())

    @property
    def array(self) -> np.ndarray:
        """Copy of the ``(horizon, routers, destinations)`` load array."""
        return self._loads[: self.horizon].copy()

    @property
    def totals(self) -> np.ndarray:
        return self._totals[: self.horizon].copy()

    def entries(self) -> dict[tuple[int, int, int], float]:
        out = {}
        for t, ri, di in zip(*np.nonzero(self._loads[: self.horizon])):
            out[(self.routers[ri], self.destinations[di], int(t))] = float(self._loads[t, ri, di])
        return out

    def __eq__(self, other):
        if not isinstance(other, LoadLedger):
            return NotImplemented
        return (
            self.delay_fns == other.delay_fns
            and self.destinations == other.destinations
            and self.window == other.window
            and np.array_equal(self._loads[: self.horizon], other._loads[: other.horizon])
        )

    def __repr__(self):
        return f"LoadLedger(routers={self.routers}, destinations={self.destinations}, window={self.window}, horizon={self.horizon})"


def windowed_load(ledger: LoadLedger, router: int, t: int) -> float:
    return ledger.windowed_load(router, t)


def window_means(totals: np.ndarray, window: int) -> np.ndarray:
    """Trailing ``window``-step means along axis 0, with zeros before the start."""
    acc = np.zeros_like(totals, dtype=float)
    n = len(totals)
    for k in range(min(window, n)):
        acc[k:] += totals[: n - k]
    return acc / window


def cell_delays(ledger: LoadLedger) -> np.ndarray:
    """``(horizon, routers)`` array of W_r(windowed load), zero where the router is idle."""
    totals = ledger.totals
    means = window_means(totals, ledger.window)
    out = np.zeros_like(means)
    for i, r in enumerate(ledger.routers):
        out[:, i] = ledger.delay_fns[r].vectorized(means[:, i])
    out[totals <= 0] = 0.0
    return out


def delay_series(ledger: LoadLedger) -> np.ndarray:
    return cell_delays(ledger).sum(axis=1)


def world_utility(ledger: LoadLedger) -> float:
    """Total delay over all occupied (router, timestep) cells."""
    return float(cell_delays(ledger).sum())


@dataclass
class RewardHeader:
    delta_sum: float = 0.0


@dataclass(slots=True, eq=False)
class Packet:
    amount: float
    destination: int
    position: int
    injected_at: int
    header: RewardHeader = field(default_factory=RewardHeader)
    accrued_delay: float = 0.0
    path: list = field(default_factory=list)
    traversals: list = field(default_factory=list)  # (router, t) cells where delay was accrued
    decisions: list = field(default_factory=list)  # opaque handles attached by the controller
    id: int = 0


@dataclass
class SimState:
    topology: NetworkTopology
    pairs: tuple[tuple[int, int], ...]
    ledger: LoadLedger
    rng: np.random.Generator
    clock: int = 0
    in_flight: list = field(default_factory=list)
    completed: dict = field(default_factory=dict)  # destination -> [count, summed delay]
    injected_amount: float = 0.0
    absorbed_amount: float = 0.0
    injected_count: int = 0
    series: list = field(default_factory=list)
    last_traversals: list = field(default_factory=list)  # (packet, router) for the step just taken
    last_absorbed: list = field(default_factory=list)
    next_id: int = 0

    @property
    def in_flight_amount(self) -> float:
        return sum(p.amount for p in self.in_flight)


def new_state(topology: NetworkTopology, regime: str, window: int = 50, seed: int = 0) -> SimState:
    pairs = topology.regime(regime)
    ledger = LoadLedger(topology.delay_fns(), topology.destinations, window)
    return SimState(topology, pairs, ledger, np.random.default_rng(seed))


def inject(state: SimState, amount: float = 1.0) -> SimState:
    """Feed one packet per (source, destination) pair of the active regime."""
    for s, d in state.pairs:
        p = Packet(amount, d, s, state.clock, path=[s], id=state.next_id)
        state.next_id += 1
        state.in_flight.append(p)
        state.injected_amount += amount
        state.injected_count += 1
    return state


def resident_traffic(state: SimState) -> dict[NeuronId, list[Packet]]:
    groups: dict[NeuronId, list[Packet]] = {}
    for p in state.in_flight:
        groups.setdefault(NeuronId(p.position, p.destination), []).append(p)
    return groups


def _assign(neuron: NeuronId, packets: list[Packet], action: NeuronAction, topo: NetworkTopology):
    alloc = {int(h): float(a) for h, a in action.allocation.items() if a > 0}
    resident = sum(p.amount for p in packets)
    if abs(sum(alloc.values()) - resident) > _EPS * max(1.0, resident):
        raise RoutingError(f"neuron {tuple(neuron)}: allocation sums to {sum(alloc.values())}, resident traffic is {resident}")
    for h in alloc:
        if not topo.has_link(neuron.router, h):
            raise RoutingError(f"neuron {tuple(neuron)}: no link {neuron.router}->{h}")
        if not topo.reaches(h, neuron.destination):
            raise RoutingError(f"neuron {tuple(neuron)}: next hop {h} cannot reach destination {neuron.destination}")
    if len(alloc) == 1:
        h = next(iter(alloc))
        return [(p, h) for p in packets]
    moves = []
    queue = sorted(packets, key=lambda p: p.id)
    for h in sorted(alloc):
        need = alloc[h]
        while need > _EPS:
            if not queue or queue[0].amount > need + _EPS:
                raise RoutingError(f"neuron {tuple(neuron)}: allocation does not split into whole packets")
            p = queue.pop(0)
            need -= p.amount
            moves.append((p, h))
    return moves


def step(state: SimState, actions: Mapping[NeuronId, NeuronAction]) -> SimState:
    """Accrue this timestep's delay, then advance every packet one hop."""
    topo, ledger, t = state.topology, state.ledger, state.clock
    moves = []
    for neuron, packets in resident_traffic(state).items():
        action = actions.get(neuron)
        if action is None:
            raise RoutingError(f"no action for neuron {tuple(neuron)}")
        moves.extend(_assign(neuron, packets, action, topo))

    ledger.extend(t + 1)
    at_router: dict[int, list[Packet]] = {}
    for p in state.in_flight:
        if p.position in ledger.delay_fns:
            ledger.record(p.position, p.destination, t, p.amount)
            at_router.setdefault(p.position, []).append(p)

    step_delay = 0.0
    state.last_traversals = []
    for r, packets in at_router.items():
        total = ledger.total_load(r, t)
        w = ledger.delay_fns[r](ledger.windowed_load(r, t))
        step_delay += w
        for p in packets:
            p.accrued_delay += p.amount / total * w
            p.traversals.append((r, t))
            state.last_traversals.append((p, r))
    state.series.append(step_delay)

    state.last_absorbed = []
    for p, h in moves:
        p.position = h
        p.path.append(h)
        if h == p.destination:
            state.last_absorbed.append(p)
            tally = state.completed.setdefault(h, [0, 0.0])
            tally[0] += 1
            tally[1] += p.accrued_delay
            state.absorbed_amount += p.amount
    if state.last_absorbed:
        gone = {id(p) for p in state.last_absorbed}
        state.in_flight = [p for p in state.in_flight if id(p) not in gone]
    state.clock += 1
    return state
