"""Command-line entry point: ``tdpnet <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data-format error, 4 numeric or shape error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import preprocess as pp
from .codetection import (f1_score, interarrival_stats, load_config, simulate, write_codetection_csv,
                          write_events_csv, write_interarrival_csv)
from .codetection.energy import format_report
from .exceptions import FormatError, InsufficientDataError, TDPError
from .network import (batch_macs, canonical_network, infer_batch, infer_windows,
                      peak_intermediate_bytes, random_weights, zero_weights)
from .quantize import quantization_report, quantize_store
from .streaming import StreamState, derive_plan, plan_memory_bytes, step_cost_ops, stream_spectrogram
from .weightfile import load_weights, save_weights

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _need_parent(path: str) -> Path:
    p = Path(path)
    if not p.parent.exists() and str(p.parent):
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _emit(rows, out) -> None:
    for frame, prob, threshold in rows:
        out.write(f"{frame},{prob:.7f},{int(prob >= threshold)}\n")


def cmd_preprocess(args, out) -> int:
    raw = _need_file(args.raw)
    dst = _need_parent(args.out)
    samples = pp.read_raw(raw, args.raw_format)
    if pp.n_columns(len(samples)) == 0:
        raise FormatError(f"{raw}: {len(samples)} samples, need at least {pp.FRAME_SIZE}")
    spec = pp.spectrogram(samples)
    pp.write_spectrogram(spec, dst, args.out_format)
    out.write(f"{spec.shape[0]} columns x {spec.shape[1]} bins -> {dst}\n")
    return 0


def cmd_infer(args, out) -> int:
    store = load_weights(_need_file(args.weights))
    spec = pp.read_spectrogram(_need_file(args.spectrogram))
    net = store.network
    plan = derive_plan(net)
    if args.full:
        if args.mode == "batch":
            prob = infer_batch(net, store, spec[..., None])
        else:
            prob = float(stream_spectrogram(plan, store, spec, "full")[0])
        _emit([(0, prob, args.threshold)], out)
        return 0
    hop = plan.window if args.decimate else 1
    if args.mode == "batch":
        probs = infer_windows(net, store, spec[..., None], hop)
    else:
        probs = stream_spectrogram(plan, store, spec, "tumbling" if args.decimate else "sliding")
    _emit([(k * hop * plan.p0, p, args.threshold) for k, p in enumerate(probs)], out)
    return 0


def cmd_stream(args, out) -> int:
    store = load_weights(_need_file(args.weights))
    raw = _need_file(args.raw)
    plan = derive_plan(store.network)
    mode = "tumbling" if args.decimate else "sliding"
    hop = plan.window if args.decimate else 1
    state = StreamState(plan, store, mode)
    front = pp.SpectrogramStream()
    pending = []
    emitted = 0

    def emit(probs):
        nonlocal emitted
        _emit([((emitted + i) * hop * plan.p0, p, args.threshold) for i, p in enumerate(probs)], out)
        emitted += len(probs)

    data = raw.read_bytes()
    width = 4 if args.raw_format == "f32" else 3
    if len(data) == 0 or len(data) % width:
        raise FormatError(f"{raw}: empty or truncated sample stream")
    if args.chunk <= 0:
        raise UsageError("--chunk must be positive")
    step = args.chunk * width
    for start in range(0, len(data), step):
        for col in front.push(pp.decode_raw(data[start:start + step], args.raw_format)):
            pending.append(col.values)
            if len(pending) == plan.p0:
                prob = state.push_columns(np.stack(pending))
                pending.clear()
                if prob is not None:
                    emit([prob])
    # columns left in ``pending`` (fewer than one step) are dropped
    if state.columns_seen < store.network.input_t:
        raise FormatError(f"stream produced {state.columns_seen} usable columns, "
                          f"need {store.network.input_t}")
    emit(state.flush())
    return 0


def cmd_quantize(args, out) -> int:
    store = load_weights(_need_file(args.src))
    dst = _need_parent(args.dst)
    if args.report:
        rows = quantization_report(store)
        out.write("layer,params,float_bytes,quantized_bytes,n1,n2,max_error\n")
        for r in rows:
            out.write(f"{r['layer']},{r['params']},{r['float_bytes']},{r['quantized_bytes']},"
                      f"{r['n1']},{r['n2']},{r['max_error']:.6g}\n")
        out.write(f"total,{sum(r['params'] for r in rows)},{sum(r['float_bytes'] for r in rows)},"
                  f"{sum(r['quantized_bytes'] for r in rows)},,,\n")
    save_weights(quantize_store(store), dst)
    return 0


def cmd_account(args, out) -> int:
    net = load_weights(_need_file(args.weights)).network if args.weights else canonical_network()
    cols = args.input_cols or net.input_t
    plan = derive_plan(net)
    batch = peak_intermediate_bytes(net, cols)
    tdp = plan_memory_bytes(plan)
    params = net.parameter_count
    rows = [
        ("input_columns", cols),
        ("batch_peak_bytes", batch),
        ("tdp_buffer_bytes", tdp),
        ("reduction_factor", f"{batch / tdp:.3f}"),
        ("params", params),
        ("param_bytes_float32", 4 * params),
        ("param_bytes_pow2", params),
        ("p0", plan.p0),
        ("processing_windows", " ".join(map(str, plan.p))),
        ("carry_buffers", " ".join(map(str, plan.b))),
        ("acquisition_time_s", f"{pp.acquisition_time(plan.p0):.3f}"),
        ("step_macs", step_cost_ops(plan)),
        ("batch_macs", batch_macs(net, cols)),
    ]
    out.write("".join(f"{k} = {v}\n" for k, v in rows))
    return 0


def cmd_simulate(args, out) -> int:
    cfg = load_config(_need_file(args.config))
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise UsageError(f"output directory does not exist: {out_dir}")
    res = simulate(cfg, args.workers)
    write_events_csv(res.events, out_dir / "events.csv")
    write_codetection_csv(res.bins, out_dir / "codetections.csv")
    extra = {
        "nodes": cfg.nodes,
        "events": len(res.events),
        "events_per_hour_per_sensor": f"{res.events_per_hour_per_sensor:.4f}",
        "mean_event_length_s": f"{res.mean_event_length:.4f}",
    }
    try:
        stats = interarrival_stats(res.events)
    except InsufficientDataError:
        stats = None
    hist, cdf = out_dir / "interarrival_hist.csv", out_dir / "interarrival_cdf.csv"
    if stats is not None:
        write_interarrival_csv(stats, hist, cdf)
        extra["interarrival_mean_s"] = f"{stats.mean:.3f}"
    else:
        hist.write_text("bin_start_s,count\n")
        cdf.write_text("interarrival_s,cumulative_fraction\n")
    report = format_report(res.lifetime, extra)
    (out_dir / "energy.txt").write_text(report)
    out.write(report)
    return 0


def cmd_f1(args, out) -> int:
    out.write(f"{f1_score(args.tp, args.fp, args.fn):.6f}\n")
    return 0


def cmd_init(args, out) -> int:
    dst = _need_parent(args.out)
    net = canonical_network()
    store = random_weights(net, args.seed) if args.random else zero_weights(net)
    save_weights(store, dst)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdpnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="raw samples -> spectrogram file")
    p.add_argument("raw")
    p.add_argument("out")
    p.add_argument("--raw-format", choices=("f32", "s24"), default="f32")
    p.add_argument("--out-format", choices=("bin", "csv"), default="bin")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("infer", help="classify a spectrogram file")
    p.add_argument("weights")
    p.add_argument("spectrogram")
    p.add_argument("--mode", choices=("batch", "stream"), default="stream")
    p.add_argument("--decimate", action="store_true", help="disjoint windows instead of sliding")
    p.add_argument("--full", action="store_true", help="one probability for the whole input")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("stream", help="classify a raw sample file incrementally")
    p.add_argument("weights")
    p.add_argument("raw")
    p.add_argument("--raw-format", choices=("f32", "s24"), default="f32")
    p.add_argument("--chunk", type=int, default=512, help="samples read per step")
    p.add_argument("--decimate", action="store_true")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("quantize", help="power-of-two quantize a weight file")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("account", help="memory and compute accounting")
    p.add_argument("weights", nargs="?")
    p.add_argument("--input-cols", type=int)
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("simulate", help="run a synthetic sensor-network scenario")
    p.add_argument("config")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("f1", help="F1 score from confusion counts")
    p.add_argument("--tp", type=int, required=True)
    p.add_argument("--fp", type=int, required=True)
    p.add_argument("--fn", type=int, required=True)
    p.set_defaults(func=cmd_f1)

    p = sub.add_parser("init", help="write a zero or random canonical weight file")
    p.add_argument("out")
    p.add_argument("--random", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"tdpnet: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"tdpnet: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (TDPError, ValueError, ZeroDivisionError) as exc:
        print(f"tdpnet: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
