"""Command-line interface: ``sead run|sweep|combo|bench|swap-demo|gen``."""

from __future__ import annotations

import argparse
import glob
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import evaluation as ev
from .core import DataStream
from .detectors import CAPACITY, KINDS, DetectorSpec
from .io import DatasetSpec, gen_synthetic, load_csv, write_csv
from .pipeline import IDENTITY, CombinerSpec, Pipeline, PipelineError, load_config, stream_names


def _label_arg(text: str):
    if text.lower() == "none":
        return None
    return int(text) if text.lstrip("-").isdigit() else text


def _add_data(p, required=True):
    p.add_argument("--data", action="append", default=[], required=required,
                   metavar="[NAME=]PATH", help="CSV dataset; repeat for several streams")
    p.add_argument("--label", type=_label_arg, default=-1,
                   help="label column name or index, or 'none' (default: last column)")
    p.add_argument("--no-header", action="store_true", help="CSV files have no header line")


def _load_streams(args, wanted: Optional[List[str]] = None) -> Dict[str, DataStream]:
    """Load ``--data`` entries; unnamed ones fill ``wanted`` names in order."""
    streams, unnamed = {}, []
    for item in args.data:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = None, item
        s = load_csv(DatasetSpec(path, label=args.label, header=not args.no_header, name=name))
        if name is None:
            unnamed.append(s)
        else:
            streams[name] = s
    free = [n for n in (wanted or []) if n not in streams]
    if wanted is None:
        for s in unnamed:
            streams[s.name] = s
        return streams
    if len(unnamed) == 1 and len(free) > 1:
        unnamed = unnamed * len(free)
    if len(unnamed) > len(free):
        raise ValueError(f"{len(unnamed)} unnamed datasets but only {len(free)} unbound names {free}")
    for n, s in zip(free, unnamed):
        streams[n] = DataStream(s.X, s.labels, n)
    missing = [n for n in wanted if n not in streams]
    if missing:
        raise ValueError(f"no dataset for stream(s) {missing}")
    return streams


def _pipeline(args) -> Pipeline:
    p = load_config(args.config, backend=getattr(args, "backend", None))
    if getattr(args, "seed", None) is not None:
        p = p.with_seed(args.seed)
    if getattr(args, "fixed_point", False):
        for slot in p.detector_slots():
            slot.content.fixed_point = True
    problems = p.validate()
    if problems:
        raise PipelineError("invalid pipeline:\n  " + "\n  ".join(problems))
    return p


def _print_sinks(p: Pipeline, streams, result, out):
    truth, cont = ev._truth_for(p, streams)
    aucs = ev.sink_aucs(p, result, truth, cont)
    for prod, ch in p.routing.sinks.items():
        s = result.sinks[ch]
        line = f"sink {ch} <- {prod}: N={len(s)} mean score {s.mean():.4f}"
        if ch in aucs:
            line += f"  AUC-S {aucs[ch][0]:.4f}  AUC-L {aucs[ch][1]:.4f}"
        print(line, file=out)


def cmd_run(args, out):
    p = _pipeline(args)
    p = p.with_mode("parallel" if args.parallel else p.mode, threads=args.threads,
                    block=args.block)
    streams = _load_streams(args, stream_names(p))
    res = p.run(streams)
    _print_sinks(p, streams, res, out)
    ops = ev.pipeline_op_total(p, streams)
    print(ev.EvalReport(None, None, res.elapsed, ops, p.mode).line(), file=out)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for ch, s in res.sinks.items():
            np.savetxt(os.path.join(args.out, f"{ch}.csv"), s, delimiter=",")
    return 0


def cmd_sweep(args, out):
    streams = _load_streams(args)
    if len(streams) != 1:
        raise ValueError("sweep takes exactly one dataset")
    (dname, stream), = streams.items()
    res = ev.sweep_ensemble(args.detector, stream, args.r_list, args.seeds, window=args.window,
                            fixed_point=args.fixed_point, threads=args.threads)
    print(res.table(), file=out)
    if args.report:
        ev.write_report(ev.sweep_records(res, dname), args.report)
    return 0


def cmd_combo(args, out):
    d = args.config_dir
    if not os.path.isdir(d):
        bundled = os.path.join(os.path.dirname(__file__), "configs", d)
        d = bundled if os.path.isdir(bundled) else d
    paths = sorted(glob.glob(os.path.join(d, "*.cfg")))
    if not paths:
        raise ValueError(f"no .cfg files in {args.config_dir}")
    schemes = {}
    for path in paths:
        p = load_config(path)
        problems = p.validate()
        if problems:
            raise PipelineError(f"{path}:\n  " + "\n  ".join(problems))
        schemes[p.name] = p.with_mode("sequential", block=args.block)
    streams = _load_streams(args)
    table = ev.combo_study(schemes, streams, args.seeds, threads=args.threads)
    print(table.table(), file=out)
    if args.report:
        ev.write_report(table.records(), args.report)
    return 0


def cmd_bench(args, out):
    p = _pipeline(args)
    streams = _load_streams(args, stream_names(p))
    threads = sorted(set(args.threads or [2, 4]))
    res = ev.bench(p, streams, threads=threads, block=args.block)
    print(f"pipeline {p.name}: op_total {res.op_total}", file=out)
    print(res.table(), file=out)
    if args.report:
        ev.write_report(({"scheme": p.name, "dataset": ",".join(streams), "seed": "",
                          "R": "", "auc_s": r.auc_score, "auc_l": r.auc_label,
                          "time": r.execution_time, "ops": r.op_total}
                         for r in res.reports), args.report)
    return 0


def _content(text: str, window: int):
    """``identity``, ``combiner[:method]`` or ``KIND[:R]``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "identity":
        return IDENTITY
    if kind == "combiner":
        return CombinerSpec(arg or "averaging")
    if kind in KINDS:
        return DetectorSpec(kind, int(arg) if arg else CAPACITY[kind], window)
    raise ValueError(f"unknown slot content {text!r}")


def cmd_swap_demo(args, out):
    p = _pipeline(args)
    streams = _load_streams(args, stream_names(p))
    if args.slot not in p.slots:
        raise PipelineError(f"unknown slot {args.slot}")
    p.start(streams)
    p.advance(args.at)
    content = _content(args.to, args.window)
    old = p.slots[args.slot].content
    cost = p.measure_swap_cost(args.slot, content)
    res = p.finish()
    s = res.outputs[args.slot]
    pre, post = s[: args.at], s[args.at:]
    print(f"swap {args.slot}: {type(old).__name__} -> {args.to} at sample {args.at}", file=out)
    print(f"swap cost {cost * 1e3:.3f} ms", file=out)
    if pre.size:
        print(f"pre-swap  N={pre.size} mean {pre.mean():.4f}", file=out)
    if post.size:
        print(f"post-swap N={post.size} mean {post.mean():.4f}", file=out)
    _print_sinks(p, streams, res, out)
    return 0


def cmd_gen(args, out):
    s = gen_synthetic(args.n, args.d, args.contamination, args.seed)
    if args.out:
        write_csv(s, args.out)
        print(f"wrote {len(s)} samples ({int(s.labels.sum())} outliers) to {args.out}", file=out)
    else:
        write_csv(s, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sead", description="Streaming ensemble anomaly detection")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a pipeline config over datasets")
    p.add_argument("config")
    _add_data(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--threads", type=int)
    p.add_argument("--fixed-point", action="store_true")
    p.add_argument("--block", type=int, help="samples per lockstep step (default 1)")
    p.add_argument("--out", help="directory for per-sink score CSVs")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="AUC mean and variance over ensemble sizes and seeds")
    p.add_argument("detector", choices=KINDS)
    _add_data(p)
    p.add_argument("--r-list", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--fixed-point", action="store_true")
    p.add_argument("--threads", type=int)
    p.add_argument("--report", help="flat CSV report path")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("combo", help="combination study over a directory of scheme configs")
    p.add_argument("config_dir")
    _add_data(p)
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    p.add_argument("--threads", type=int)
    p.add_argument("--block", type=int, default=256)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_combo)

    p = sub.add_parser("bench", help="sequential and parallel timing with op rates")
    p.add_argument("config")
    _add_data(p)
    p.add_argument("--threads", type=int, nargs="+")
    p.add_argument("--fixed-point", action="store_true")
    p.add_argument("--block", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("swap-demo", help="swap one slot's content mid-stream")
    p.add_argument("config")
    _add_data(p)
    p.add_argument("--at", type=int, required=True)
    p.add_argument("--slot", required=True)
    p.add_argument("--to", required=True, help="identity | combiner[:method] | KIND[:R]")
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_swap_demo)

    p = sub.add_parser("gen", help="write a synthetic labeled CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--contamination", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args, out)
    except (PipelineError, ValueError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
