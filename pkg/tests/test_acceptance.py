"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line for its criterion (visible in
``pytest -v`` output, or run this file directly).
"""

import sys
import time

import numpy as np
import pytest

from coin_route.cli import main as cli_main
from coin_route.engine import LoadLedger, NeuronId, inject, new_state, step
from coin_route.harness import REGIMES, run_experiment, run_replica, sweep, welch_t_test, ExperimentConfig
from coin_route.learner import NearestNeighborMemory, nn_predict, nn_update
from coin_route.policies import ALGORITHMS, first_hops, fk_coin_choose, make_controller, predicted_world_utility
from coin_route.topology import DelayFn, load_default
from coin_route.wlu import central_rewards, clamp, delta, deposit_and_echo, wonderful_life_utility

NETWORKS = ("a", "b")
SWEEP_BUDGET_S = 300.0


def report(capsys, number, title, ok, detail=""):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, detail


@pytest.fixture(scope="module")
def full_sweep():
    t0 = time.perf_counter()
    results = sweep(NETWORKS, REGIMES, ALGORITHMS, runs=50, window=50, steps=200)
    return results, time.perf_counter() - t0


# 1. ordering and significance


def test_criterion_1_ordering(full_sweep, capsys):
    results, elapsed = full_sweep
    lines, ok = [], elapsed < SWEEP_BUDGET_S
    for net in NETWORKS:
        for reg in REGIMES:
            spa, coin, mb = (results[(net, reg, a)] for a in ("fk-spa", "fk-coin", "mb-coin"))
            p_coin = welch_t_test(coin.per_run_delay, spa.per_run_delay)
            p_mb = welch_t_test(mb.per_run_delay, spa.per_run_delay)
            good = coin.mean < mb.mean < spa.mean and p_coin < 0.05 and p_mb < 0.05
            ok &= good
            lines.append(
                f"{net}/{reg}: coin {coin.mean:.4f} < mb {mb.mean:.4f} < spa {spa.mean:.4f}, "
                f"p_coin={p_coin:.2g} p_mb={p_mb:.2g} {'ok' if good else 'VIOLATED'}"
            )
    with capsys.disabled():
        print("\n" + "\n".join("    " + s for s in lines))
    report(capsys, 1, "FK COIN < MB COIN < FK SPA, Welch p < .05, sweep < 5 min", ok, f"sweep took {elapsed:.1f}s")


# 2. gap magnitudes


def test_criterion_2_gaps(full_sweep, capsys):
    results, _ = full_sweep
    ok, parts = True, []
    for net in NETWORKS:
        gaps, closes = [], []
        for reg in REGIMES:
            spa, coin, mb = (results[(net, reg, a)].mean for a in ("fk-spa", "fk-coin", "mb-coin"))
            gaps.append((spa - coin) / coin)
            closes.append((spa - mb) / (spa - coin))
        g, c = float(np.mean(gaps)), float(np.mean(closes))
        ok &= 0.05 <= g <= 0.25 and c >= 0.15
        per = ", ".join(f"{r}: gap {x:.1%} closed {y:.0%}" for r, x, y in zip(REGIMES, gaps, closes))
        parts.append(f"{net}: mean gap {g:.1%}, mean closed {c:.0%} [{per}]")
    with capsys.disabled():
        print("\n" + "\n".join("    " + s for s in parts))
    report(capsys, 2, "(SPA-COIN)/COIN in [5%, 25%], MB closes >= 15% of the gap, averaged over regimes", ok)


# 3. WLU identities


def random_ledger(rng):
    n_r, n_d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    horizon, window = int(rng.integers(1, 11)), int(rng.integers(1, 6))
    fns = {r: [DelayFn("power", 3.0), DelayFn("log1p"), DelayFn("power", 1.7)][int(rng.integers(3))] for r in range(1, n_r + 1)}
    dense = rng.random((horizon, n_r, n_d)) < 0.5
    arr = np.where(dense, rng.choice([0.5, 1.0, 2.0, 3.0, 0.1], size=dense.shape), 0.0)
    return LoadLedger.from_array(fns, list(range(10, 10 + n_d)), window, arr)


def test_criterion_3_wlu_identities(capsys):
    rng = np.random.default_rng(2024)
    n, worst, fails = 1500, 0.0, []
    for i in range(n):
        led = random_ledger(rng)
        for d in led.destinations:
            wlu = wonderful_life_utility(led, d)
            total = sum(delta(led, d, r, t) for r in led.routers for t in range(led.horizon))
            err = abs(total - wlu) / max(abs(wlu), 1.0)
            worst = max(worst, err)
            once = clamp(led, d)
            if err > 1e-12 or wlu < -1e-12 * max(1.0, abs(wlu)) or clamp(once, d) != once:
                fails.append(i)
        if clamp(led, 999) != led:
            fails.append(i)
    report(capsys, 3, "WLU decomposition, nonnegativity, clamp idempotence and identity", not fails,
           f"{n} ledgers, worst relative error {worst:.1e}, failures {len(fails)}")


# 4. one-step factoredness


def test_criterion_4_factoredness(capsys):
    checked, bad = 0, 0
    runs = [(NETWORKS[i % 2], REGIMES[i % 3], i) for i in range(10)]
    for net, reg, seed in runs:
        topo = load_default(net)

        def audit(state, knowledge):
            nonlocal checked, bad
            traffic = {}
            for p in state.in_flight:
                n = NeuronId(p.position, p.destination)
                traffic[n] = traffic.get(n, 0.0) + p.amount
            for n, amt in traffic.items():
                pick = fk_coin_choose(n, amt, knowledge, topo).next_hop
                best = {
                    h: min(predicted_world_utility(path, amt, knowledge, topo) for path in topo.paths(n.router, n.destination) if path[1] == h)
                    for h in first_hops(n, topo)
                }
                checked += 1
                bad += best[pick] > min(best.values())

        run_replica(topo, reg, "mb-coin", window=50, steps=200, seed=seed, callback=audit)
    report(capsys, 4, "fk_coin pick minimizes one-step predicted G over candidate first hops", bad == 0 and checked > 0,
           f"{checked} neuron-states from 10 runs, {bad} violations")


# 5. echo vs central oracle


def test_criterion_5_echo_oracle(capsys):
    rng = np.random.default_rng(5)
    worst, compared, mismatched = 0.0, 0, 0
    for i in range(100):
        net = NETWORKS[i % 2]
        reg = REGIMES[int(rng.integers(3))]
        algo = ALGORITHMS[int(rng.integers(3))]
        window, steps = int(rng.integers(1, 8)), int(rng.integers(5, 25))
        topo = load_default(net)
        state = new_state(topo, reg, window, seed=i)
        ctl = make_controller(algo, topo, window)
        while state.clock < steps or state.in_flight:
            if state.clock < steps:
                inject(state)
            step(state, ctl.act(state))
            echo = deposit_and_echo(state)
            oracle = central_rewards(state)
            if echo.keys() != oracle.keys():
                mismatched += 1
            for k, v in oracle.items():
                err = abs(echo.get(k, np.inf) - v) / max(abs(v), 1e-300)
                worst = max(worst, err if v else abs(echo.get(k, np.inf)))
                compared += 1
            ctl.observe(state, echo)
    ok = mismatched == 0 and worst <= 1e-12
    report(capsys, 5, "decentralized echoes equal central sum of deltas", ok,
           f"100 runs, {compared} rewards, worst relative error {worst:.1e}")


# 6. determinism and startup transient


def test_criterion_6_determinism_and_transient(tmp_path, capsys):
    blobs = []
    for i in range(2):
        out, series = tmp_path / f"s{i}.csv", tmp_path / f"t{i}.csv"
        code = cli_main(["run", "--network", "a", "--load", "medium", "--algo", "mb-coin", "--runs", "5", "--seed", "17",
                         "--out", str(out), "--series-out", str(series)])
        assert code == 0
        blobs.append(out.read_bytes() + series.read_bytes())
    identical = blobs[0] == blobs[1]
    monotone = []
    for net in NETWORKS:
        for algo in ALGORITHMS:
            s = run_experiment(ExperimentConfig(network=net, regime="medium", algorithm=algo, runs=5, window=50)).series
            d = np.diff(s[: 2 * 50])
            if (d >= 0).all() or (d <= 0).all():
                monotone.append(f"{net}/{algo}")
    report(capsys, 6, "bit-identical CSV for same (config, seed); medium series non-monotone within 2L",
           identical and not monotone, f"identical={identical}, monotone series: {monotone or 'none'}")


# 7. learner contract


def test_criterion_7_learner(capsys):
    rng = np.random.default_rng(77)
    bad = 0
    for _ in range(10_000):
        n, dim = int(rng.integers(1, 15)), int(rng.integers(1, 5))
        xs = rng.integers(0, 4, size=(n, dim)).astype(float)
        ys = rng.normal(size=n)
        m = NearestNeighborMemory()
        for x, y in zip(xs, ys):
            nn_update(m, x, y)
        q = rng.integers(0, 4, size=dim) + rng.choice([0.0, 0.5, 0.25], size=dim)
        d = [float(np.sqrt(((x - q) ** 2).sum())) for x in xs]
        expected = ys[d.index(min(d))]
        bad += nn_predict(m, q) != expected
        j = int(rng.integers(n))
        first = next(k for k in range(n) if (xs[k] == xs[j]).all())
        bad += nn_predict(m, xs[j]) != ys[first]
    report(capsys, 7, "nn_predict equals linear scan; exact matches return stored reward", bad == 0,
           f"10000 pairs, {bad} mismatches")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
