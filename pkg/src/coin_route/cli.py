"""Command-line entry point: ``coin-route run | sweep | validate``."""

from __future__ import annotations

import argparse
import sys

from .harness import REGIMES, ExperimentConfig, emit_results, run_experiment, sweep, welch_t_test
from .policies import ALGORITHMS, DEFAULT_CAPACITY
from .topology import DEFAULT_NETWORKS, TopologyError, UnknownNodeError, load_topology, resolve_network

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(Exception):
    pass


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _capacity(text):
    # 0 keeps every sample
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"capacity must be >= 0, got {v}")
    return v or None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p):
    p.add_argument("--window", type=_positive, default=50, help="window length L (default 50)")
    p.add_argument("--steps", type=_positive, default=200, help="injection steps T (default 200)")
    p.add_argument("--runs", type=_positive, default=50, help="replicas per configuration (default 50)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed + i")
    p.add_argument(
        "--capacity",
        type=_capacity,
        default=DEFAULT_CAPACITY,
        help=f"samples kept per learner memory, 0 for unbounded (default {DEFAULT_CAPACITY})",
    )
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes for replicas")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--series-out", help="per-timestep series CSV path")


def build_parser():
    parser = _Parser(prog="coin-route", description="Packet-routing experiments with COIN and shortest-path routers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="replicate one (network, load, algorithm) configuration")
    run.add_argument("--network", required=True, help="bundled network (a, b) or a topology file")
    run.add_argument("--load", required=True, help="regime name, e.g. light, medium, heavy")
    run.add_argument("--algo", required=True, choices=ALGORITHMS)
    _add_common(run)

    sw = sub.add_parser("sweep", help="run every network x load x algorithm combination")
    sw.add_argument("--networks", nargs="+", default=sorted(DEFAULT_NETWORKS))
    sw.add_argument("--loads", nargs="+", default=list(REGIMES))
    sw.add_argument("--algos", nargs="+", default=list(ALGORITHMS), choices=ALGORITHMS)
    _add_common(sw)

    val = sub.add_parser("validate", help="parse and validate a topology file")
    val.add_argument("path")
    return parser


def _read_topology(path):
    try:
        return load_topology(path)
    except OSError as exc:
        raise TopologyError(f"cannot read topology {path}: {exc.strerror or exc}") from None


def _network(name):
    """Bundled names stay short in the CSV; files are labelled by their stem."""
    if name.lower().removeprefix("network-") in DEFAULT_NETWORKS:
        resolve_network(name)
        return name
    return _read_topology(name)


def _overrides(args):
    return dict(window=args.window, steps=args.steps, runs=args.runs, base_seed=args.seed, capacity=args.capacity)


def _cmd_run(args):
    cfg = ExperimentConfig(network=_network(args.network), regime=args.load, algorithm=args.algo, **_overrides(args))
    cfg.resolve()
    stats = run_experiment(cfg, jobs=args.jobs)
    emit_results([stats], args.out, args.series_out)
    print(f"{cfg.network_name} {cfg.regime} {cfg.algorithm}: {stats.mean:.4f} +/- {stats.sem:.4f}")


def _cmd_sweep(args):
    nets = [_network(n) for n in args.networks]
    for n in nets:
        for reg in args.loads:
            ExperimentConfig(network=n, regime=reg, algorithm=args.algos[0], **_overrides(args)).resolve()

    def progress(s):
        c = s.config
        print(f"{c.network_name:>10} {c.regime:<7} {c.algorithm:<8} {s.mean:.4f} +/- {s.sem:.4f}", flush=True)

    results = sweep(nets, args.loads, args.algos, jobs=args.jobs, progress=progress, **_overrides(args))
    emit_results(results, args.out, args.series_out)
    if "fk-spa" in args.algos and args.runs > 1:
        for (net, reg, algo), s in results.items():
            if algo != "fk-spa":
                p = welch_t_test(s.per_run_delay, results[(net, reg, "fk-spa")].per_run_delay)
                print(f"{net} {reg}: {algo} vs fk-spa p = {p:.3g}")


def _cmd_validate(args):
    topo = _read_topology(args.path)
    print(
        f"{args.path}: ok ({len(topo.sources)} sources, {len(topo.routers)} routers, "
        f"{len(topo.destinations)} destinations, regimes: {', '.join(topo.regimes) or 'none'})"
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"coin-route: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate}[args.command]
    try:
        handler(args)
    except (TopologyError, UnknownNodeError) as exc:
        print(f"coin-route: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"coin-route: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
