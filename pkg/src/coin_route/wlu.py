"""Clamping, the Wonderful Life Utility, and its per-cell decomposition.

A subworld is identified by its destination id: it is every (router, d)
neuron sharing that ultimate destination. Clamping zeroes the subworld's
traffic in the recorded ledger without re-simulating anything, so the utility
of a subworld is simply ``G(ledger) - G(clamp(ledger, d))``.
"""

from __future__ import annotations

import numpy as np

from .engine import LoadLedger, SimState, cell_delays, world_utility


def clamp(ledger: LoadLedger, subworld: int) -> LoadLedger:
    """Copy of ``ledger`` with every entry tagged for ``subworld`` set to zero."""
    loads = ledger.array
    j = ledger.destination_index(subworld)
    if j is not None:
        loads[:, :, j] = 0.0
    return LoadLedger.from_array(ledger.delay_fns, ledger.destinations, ledger.window, loads)


def wonderful_life_utility(ledger: LoadLedger, subworld: int) -> float:
    return world_utility(ledger) - world_utility(clamp(ledger, subworld))


def delta(ledger: LoadLedger, subworld: int, router: int, t: int) -> float:
    """Change in router ``router``'s delay at ``t`` caused by the subworld's traffic.

    Each side follows the occupied-cell rule of :func:`world_utility`, so the
    terms sum exactly to the subworld's WLU.
    """
    fn = ledger.delay_fns[ledger.routers[ledger.router_index(router)]]
    full = fn(ledger.windowed_load(router, t)) if ledger.occupied(router, t) else 0.0
    if ledger.occupied(router, t, exclude=subworld):
        clamped = fn(ledger.windowed_load(router, t, exclude=subworld))
    else:
        clamped = 0.0
    return full - clamped


def delta_table(ledger: LoadLedger, subworld: int) -> np.ndarray:
    """``(horizon, routers)`` array of delta values, computed through :func:`clamp`."""
    return cell_delays(ledger) - cell_delays(clamp(ledger, subworld))


def deposit_and_echo(state: SimState) -> dict[tuple[int, int], float]:
    """Run the header/echo reward protocol for the step just taken.

    Every packet that sat at a router during the last step adds its share of
    that cell's delta (share = packet amount / subworld load in the cell) to
    its header. Each destination then sums the headers of the packets it
    absorbed and echoes the sum to every node on those packets' paths.

    Returns ``{(node, destination): echoed reward}``.
    """
    ledger = state.ledger
    t = state.clock - 1
    cells: dict[tuple[int, int], float] = {}
    for p, r in state.last_traversals:
        key = (r, p.destination)
        if key not in cells:
            cells[key] = delta(ledger, p.destination, r, t) / ledger.load(r, p.destination, t)
        p.header.delta_sum += p.amount * cells[key]

    sums: dict[int, float] = {}
    for p in state.last_absorbed:
        sums[p.destination] = sums.get(p.destination, 0.0) + p.header.delta_sum
    rewards: dict[tuple[int, int], float] = {}
    for p in state.last_absorbed:
        for node in p.path[:-1]:
            rewards[(node, p.destination)] = sums[p.destination]
    return rewards


def central_rewards(state: SimState) -> dict[tuple[int, int], float]:
    """Centrally recomputed counterpart of :func:`deposit_and_echo` for the last step.

    Uses whole-ledger delta tables and the packets' recorded traversals rather
    than their headers.
    """
    ledger = state.ledger
    tables: dict[int, np.ndarray] = {}
    sums: dict[int, float] = {}
    for p in state.last_absorbed:
        d = p.destination
        if d not in tables:
            tables[d] = delta_table(ledger, d)
        total = 0.0
        for r, t in p.traversals:
            ri = ledger.router_index(r)
            total += p.amount / ledger.load(r, d, t) * tables[d][t, ri]
        sums[d] = sums.get(d, 0.0) + total
    return {(node, p.destination): sums[p.destination] for p in state.last_absorbed for node in p.path[:-1]}
