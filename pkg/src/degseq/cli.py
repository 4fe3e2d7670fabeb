"""Command-line interface: ``degseq <command> [options]``.

Exit codes: 0 success, 1 rejected input, 2 every pilot trial failed,
3 a selftest check failed.
"""

import argparse
import itertools
import json
import logging
import math
import statistics
import sys
import time
from collections import Counter
from pathlib import Path

from .degrees import DegreeSequence, DegreeSequenceError, mckay_log_count, regime_check
from .estimators import AllTrialsFailed, count_graphs, generate_fast, generate_uniform
from .oracle import (
    InstanceTooLarge,
    brute_force_count,
    count_graphs_exact,
    enumerate_graphs,
    exact_distribution,
)
from .sampler import run_reference, sample, stream_seed

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ALL_FAILED = 2
EXIT_SELFTEST = 3


class _Parser(argparse.ArgumentParser):
    # usage errors are input rejections; exit code 2 is reserved
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _unit_interval(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--degrees", metavar="FILE", help="degree file, one integer per line")
    src.add_argument("--regular", nargs=2, type=int, metavar=("N", "D"),
                     help="d-regular sequence on n vertices")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--epsilon", type=_unit_interval, default=0.05)
    common.add_argument("--delta", type=_unit_interval, default=0.05)
    common.add_argument("--samples", type=_positive_int, default=1)
    common.add_argument("--format", choices=("edgelist", "json"), default="edgelist")
    common.add_argument("--output", metavar="PATH", help="write here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="degseq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", parents=[common], help="sample graphs")
    gen.add_argument("--fast", action="store_true",
                     help="raw Procedure A samples, no uniformity correction")
    gen.add_argument("--max-retries", type=_positive_int, default=100,
                     help="failed runs tolerated per sample with --fast")
    gen.add_argument("--plot", metavar="PNG", help="bar chart of per-graph frequencies")

    sub.add_parser("count", parents=[common], help="approximate count (JSON)")
    sub.add_parser("exact-count", parents=[common], help="count by exhaustive enumeration")
    sub.add_parser("mckay", parents=[common], help="closed-form asymptotic estimate")
    sub.add_parser("validate", parents=[common], help="Erdos-Gallai check")
    sub.add_parser("selftest", parents=[common], help="oracle-equivalence checks")

    bench = sub.add_parser("bench", parents=[common], help="single-sample wall time vs m")
    bench.add_argument("--degree", type=_positive_int, default=4,
                       help="regular degree used when no sequence is given")
    bench.add_argument("--sizes", type=_positive_int, nargs="+",
                       default=[10_000, 20_000, 40_000])
    bench.add_argument("--repeats", type=_positive_int, default=3)
    bench.add_argument("--plot", metavar="PNG",
                       help="figure path (default: next to --output, with .png)")
    return parser


def load_sequence(args):
    if args.degrees is not None:
        return DegreeSequence.from_file(args.degrees)
    if args.regular is not None:
        n, d = args.regular
        if n < 1 or d < 0:
            raise DegreeSequenceError(f"--regular needs n >= 1 and d >= 0, got {n} {d}")
        return DegreeSequence.regular(n, d)
    raise DegreeSequenceError("one of --degrees or --regular is required")


def _emit(args, text):
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2) + "\n"


def cmd_generate(args):
    seq = load_sequence(args)
    if args.fast:
        graphs, attempts = generate_fast(seq, args.seed, args.samples, args.max_retries)
        count = None
    else:
        result = generate_uniform(seq, args.epsilon, args.delta, args.seed, args.samples)
        graphs = result.samples
        attempts = [s.attempts for s in result.stats]
        count = result.count.to_dict()
    meta = []
    for s, (g, a) in enumerate(zip(graphs, attempts)):
        meta.append({**g.metadata(), "sample": s, "attempts": a})

    if args.format == "json":
        records = [{**md, "edges": [list(e) for e in g.edges]} for md, g in zip(meta, graphs)]
        _emit(args, _dumps({"samples": records, "count": count}))
    else:
        _emit(args, "\n".join(g.edgelist_text() for g in graphs))
        if args.output:
            sidecar = meta[0] if len(meta) == 1 else meta
            Path(args.output + ".json").write_text(_dumps(sidecar), encoding="utf-8")
    if args.plot:
        from .plotting import plot_frequencies

        freq = Counter(g.key for g in graphs)
        keys = sorted(freq)
        expected = None
        if seq.n <= 6:
            support = enumerate_graphs(seq)
            keys = support
            expected = len(graphs) / len(support)
        plot_frequencies([freq.get(k, 0) for k in keys], args.plot, expected)
    return EXIT_OK


def cmd_count(args):
    seq = load_sequence(args)
    est = count_graphs(seq, args.epsilon, args.delta, args.seed)
    _emit(args, _dumps(est.to_dict()))
    return EXIT_OK


def cmd_exact_count(args):
    seq = load_sequence(args)
    if args.format == "json":
        if seq.n <= 6:
            _emit(args, exact_distribution(seq).to_json() + "\n")
        else:
            graphs = enumerate_graphs(seq)
            _emit(args, _dumps({"count": len(graphs),
                                "graphs": [{"edges": [list(e) for e in g]} for g in graphs]}))
    else:
        _emit(args, f"{count_graphs_exact(seq)}\n")
    return EXIT_OK


def cmd_mckay(args):
    seq = load_sequence(args)
    log_est = mckay_log_count(seq)
    estimate = math.exp(log_est) if log_est < 700 else math.inf
    if args.format == "json":
        _emit(args, _dumps({"log_count": log_est, "log10_count": log_est / math.log(10),
                            "estimate": estimate if math.isfinite(estimate) else None}))
    elif math.isfinite(estimate):
        _emit(args, f"{estimate!r}\n")
    else:
        _emit(args, f"10^{log_est / math.log(10):.6f}\n")
    return EXIT_OK


def cmd_validate(args):
    seq = load_sequence(args)
    regime = regime_check(seq)
    if args.format == "json":
        _emit(args, _dumps({"graphical": True, "n": seq.n, "m": seq.m, **regime.as_dict()}))
    else:
        _emit(args, f"graphical n={seq.n} m={seq.m} d_max={seq.d_max} "
                    f"ratio={regime.ratio:.4f} in_regime={str(regime.in_regime).lower()}\n")
    return EXIT_OK


def _graphical_sequences(n):
    for degs in itertools.product(range(n), repeat=n):
        try:
            yield DegreeSequence(degs)
        except DegreeSequenceError:
            continue


def _selftest_checks(seed):
    seqs = [s for n in range(1, 6) for s in _graphical_sequences(n)]

    def counts_match():
        return all(count_graphs_exact(s) == brute_force_count(s) for s in seqs)

    def tree_exact():
        for s in seqs:
            dist = exact_distribution(s)
            if dist.total() != 1 or dist.expected_n != dist.graph_count:
                return False
        return True

    def kernel_matches_reference():
        for s in (DegreeSequence((2, 2, 2, 2)), DegreeSequence((3, 3, 2, 2, 2)),
                  DegreeSequence.regular(8, 3)):
            for k in range(20):
                stream = stream_seed(seed, k)
                g = sample(s, stream=stream)
                ok, log_p, order, _ = run_reference(s, stream)
                if g.success != ok or list(g.order) != list(order) or \
                        not math.isclose(g.log_p, log_p, rel_tol=1e-12, abs_tol=1e-12):
                    return False
        return True

    def small_count():
        est = count_graphs(DegreeSequence((2, 2, 2, 2)), 0.05, 0.05, seed)
        return 2.7 <= est.estimate <= 3.3

    return [
        ("exact-count equals brute force (all n <= 5)", counts_match),
        ("outcome law sums to 1 and E[N] equals the count (all n <= 5)", tree_exact),
        ("compiled sampler equals reference", kernel_matches_reference),
        ("count estimate on (2,2,2,2) near 3", small_count),
    ]


def cmd_selftest(args):
    lines = []
    failed = 0
    for name, check in _selftest_checks(args.seed):
        ok = bool(check())
        failed += not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}\n")
    _emit(args, "".join(lines))
    return EXIT_OK if not failed else EXIT_SELFTEST


def bench_rows(sequences, seed=0, repeats=3):
    """Median single-sample wall time for each sequence; returns a list of dicts."""
    rows = []
    for seq in sequences:
        sample(seq, seed)  # compile and warm caches
        times = []
        for r in range(repeats):
            t0 = time.perf_counter()
            sample(seq, seed + 1 + r)
            times.append(time.perf_counter() - t0)
        rows.append({"n": seq.n, "m": seq.m, "d_max": seq.d_max,
                     "seconds": statistics.median(times)})
    for prev, row in zip(rows, rows[1:]):
        row["ratio"] = row["seconds"] / prev["seconds"]
    return rows


def cmd_bench(args):
    if args.degrees is not None or args.regular is not None:
        sequences = [load_sequence(args)]
    else:
        sequences = [DegreeSequence.regular(n, args.degree) for n in args.sizes]
    rows = bench_rows(sequences, args.seed, args.repeats)
    lines = ["n\tm\td_max\tseconds\tratio\n"]
    for row in rows:
        ratio = f"{row['ratio']:.3f}" if "ratio" in row else ""
        lines.append(f"{row['n']}\t{row['m']}\t{row['d_max']}\t{row['seconds']:.6f}\t{ratio}\n")
    _emit(args, "".join(lines))
    plot = args.plot or (str(Path(args.output).with_suffix(".png")) if args.output else None)
    if plot:
        from .plotting import plot_scaling

        plot_scaling([r["m"] for r in rows], [r["seconds"] for r in rows], plot)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "count": cmd_count,
    "exact-count": cmd_exact_count,
    "mckay": cmd_mckay,
    "validate": cmd_validate,
    "selftest": cmd_selftest,
    "bench": cmd_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AllTrialsFailed as exc:
        print(f"AllTrialsFailed: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except DegreeSequenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except (InstanceTooLarge, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
