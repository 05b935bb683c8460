"""`bench` command line interface for the synthetic benchmark harness."""

from __future__ import annotations

import argparse
import json
import sys

from . import benchmark


def _cmd_run(args) -> int:
    rows = benchmark.run_benchmark(
        function=args.function, strategy=args.strategy, eps=args.eps,
        iterations=args.iters, repeats=args.repeats, seed=args.seed,
    )
    benchmark.write_trace_csv(rows, args.out)
    print(f"wrote {len(rows)} trace rows to {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    rows = benchmark.read_trace_csv(args.infile)
    summary = benchmark.summarize(rows)
    doc = [
        {"strategy": r.strategy, "function": r.function, "eps": r.eps,
         "iteration": r.iteration, "median": r.median, "q25": r.q25, "q75": r.q75}
        for r in summary
    ]
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(doc)} summary entries to {args.out}")
    return 0


def _cmd_plotdata(args) -> int:
    rows = benchmark.read_trace_csv(args.infile)
    summary = benchmark.summarize(rows)
    benchmark.write_summary_csv(summary, args.out)
    print(f"wrote {len(summary)} plot rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Run and summarize preference-optimization benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark configuration")
    run.add_argument("--function", required=True,
                     choices=sorted(benchmark.TEST_FUNCTIONS))
    run.add_argument("--strategy", required=True, choices=["ei", "pe", "random"])
    run.add_argument("--eps", type=float, required=True)
    run.add_argument("--iters", type=int, required=True)
    run.add_argument("--repeats", type=int, required=True)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--out", required=True)
    run.set_defaults(handler=_cmd_run)

    summ = sub.add_parser("summarize", help="summarize a trace CSV to JSON")
    summ.add_argument("--in", dest="infile", required=True)
    summ.add_argument("--out", required=True)
    summ.set_defaults(handler=_cmd_summarize)

    plot = sub.add_parser("plotdata",
                          help="emit per-iteration median/IQR as CSV")
    plot.add_argument("--in", dest="infile", required=True)
    plot.add_argument("--out", required=True)
    plot.set_defaults(handler=_cmd_plotdata)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
