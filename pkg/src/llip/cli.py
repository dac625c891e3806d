"""Command line front end: extract, train, filter, bench, compare, export-vectors.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bench import compare, run_bench
from .data import (
    ExtractionConfig,
    FrameSpec,
    extract_samples,
    iter_contexts,
    read_dataset,
    read_yuv420,
    records_bit_depth_check,
    split_records,
    write_dataset,
)
from .errors import FormatError, InputError, LlipError, UsageError
from .interpf import BlockContext, blend_output, combine_quarter, filter_block, horizontal_blend, vertical_blend
from .mlp import Component, Normalization, ResolutionGroup, Scheme, build_inputs, learned_filter_block
from .model_io import export_model, import_model
from .trainer import BatchLog, TrainConfig, TrainingSet, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: error: {message}\n")


def _block_sizes(text: str) -> tuple[tuple[int, int], ...]:
    try:
        return tuple(tuple(int(v) for v in item.lower().split("x")) for item in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block list {text!r}; use e.g. 8x8,16x16") from None


def _components(text: str) -> tuple[str, ...]:
    return tuple(c.strip().upper() for c in text.split(",") if c.strip())


def _add_video_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--width", type=int, required=required, help="luma width")
    p.add_argument("--height", type=int, required=required, help="luma height")
    p.add_argument("--bit-depth", type=int, default=10)
    p.add_argument("--frames", type=int, default=None,
                   help="frame count (default: everything in the file)")
    p.add_argument("--blocks", type=_block_sizes, default=((8, 8), (16, 16)),
                   help="block sizes to tile with, e.g. 8x8,16x16")
    p.add_argument("--components", type=_components, default=("Y", "U", "V"))
    p.add_argument("--max-shift", type=int, default=3, help="motion shift range in samples")
    p.add_argument("--qp-like-noise", type=float, default=4.0,
                   help="std dev of prediction noise, in sample units")
    p.add_argument("--border-noise", type=float, default=4.0,
                   help="std dev of border noise, in sample units")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def _load_video(args):
    path = Path(getattr(args, "input", None) or args.video)
    frames = args.frames
    if frames is None:
        probe = FrameSpec(args.width, args.height, args.bit_depth, 1)
        size = path.stat().st_size
        if size == 0 or size % probe.frame_bytes:
            raise FormatError(
                f"{path}: {size} bytes is not a whole number of {probe.frame_bytes}-byte frames"
            )
        frames = size // probe.frame_bytes
    spec = FrameSpec(args.width, args.height, args.bit_depth, frames)
    return read_yuv420(path, spec)


def _extraction_config(args, cap=None) -> ExtractionConfig:
    return ExtractionConfig(
        block_sizes=args.blocks,
        components=args.components,
        max_shift=args.max_shift,
        noise_sigma=args.qp_like_noise,
        border_noise_sigma=args.border_noise,
        seed=args.seed,
        cap_per_frame=cap,
    )


def cmd_extract(args) -> int:
    frames = _load_video(args)
    records = extract_samples(frames, _extraction_config(args, args.cap), threads=args.threads)
    write_dataset(records, args.output)
    print(f"wrote {records.size} records from {len(frames)} frame(s) to {args.output}")
    return 0


def records_to_training_set(records, scheme: Scheme, norm: Normalization) -> TrainingSet:
    r = records
    inputs = build_inputs(scheme, r["r1"], r["r2"], r["r3"], r["r4"], r["p"], r["x"], r["y"], norm)
    return TrainingSet(inputs.astype(np.float64), r["g"] / norm.pixel_scale)


def _select_component(records, component: str | None):
    if not component or component.lower() == "all":
        return records
    return records[records["component"] == int(Component.parse(component))]


def cmd_train(args) -> int:
    records = _select_component(read_dataset(args.dataset), args.component)
    if records.size == 0:
        raise InputError("dataset has no records for the selected component")
    records_bit_depth_check(records, args.bit_depth)
    scheme = Scheme.parse(args.scheme)
    norm = Normalization.for_bit_depth(args.bit_depth, args.coord_scale)
    config = TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr_initial=args.lr,
        lr_final=args.lr_final,
        seed=args.seed,
    )
    epoch_losses: dict[int, list[float]] = {}

    def log(entry: BatchLog) -> None:
        epoch_losses.setdefault(entry.epoch, []).append(entry.loss)
        if entry.batch % args.log_every == 0:
            print(f"epoch {entry.epoch} batch {entry.batch} lr {entry.lr:g} loss {entry.loss:.6e}")

    component = Component.parse(args.component) if args.component and args.component.lower() != "all" \
        else Component.SHARED
    model = train(
        records_to_training_set(records, scheme, norm),
        config,
        scheme=scheme,
        normalization=norm,
        component=component,
        group=ResolutionGroup.parse(args.group),
        bit_depth=args.bit_depth,
        callback=log,
    )
    for epoch, losses in epoch_losses.items():
        print(f"epoch {epoch} mean loss {np.mean(losses):.6e}")
    export_model(model, args.output)
    print(f"wrote scheme {int(scheme)} model ({model.parameter_count} parameters) to {args.output}")
    return 0


def _read_contexts(path) -> list[BlockContext]:
    contexts = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            contexts.append(BlockContext(
                obj["width"], obj["height"], obj["prediction"], obj["top"], obj["left"],
                obj.get("bit_depth", 10),
            ))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}:{n}: bad context line ({exc})") from None
    return contexts


def context_to_json(ctx: BlockContext) -> dict:
    return {
        "width": ctx.width,
        "height": ctx.height,
        "bit_depth": ctx.bit_depth,
        "top": ctx.top.tolist(),
        "left": ctx.left.tolist(),
        "prediction": ctx.prediction.reshape(-1).tolist(),
    }


def write_contexts(contexts, path) -> None:
    Path(path).write_text("".join(json.dumps(context_to_json(c)) + "\n" for c in contexts))


def cmd_filter(args) -> int:
    if args.contexts:
        items = [({}, ctx) for ctx in _read_contexts(args.contexts)]
    else:
        frames = _load_video(args)
        config = _extraction_config(args)
        items = [
            ({"component": comp.name, "frame": i, "x0": origin[0], "y0": origin[1]}, ctx)
            for i, fr in enumerate(frames)
            for comp, origin, ctx, _ in iter_contexts(fr, i, config)
        ]
    if args.traditional:
        def run(ctx):
            return filter_block(ctx)
    else:
        model = import_model(args.model)
        if args.scheme is not None and Scheme.parse(args.scheme) is not model.scheme:
            raise InputError(f"--scheme {args.scheme} does not match the scheme {int(model.scheme)} model")

        def run(ctx):
            if ctx.bit_depth != model.bit_depth:
                raise InputError(f"{ctx.bit_depth}-bit block for a {model.bit_depth}-bit model")
            return learned_filter_block(model, ctx)

    ctxs = [ctx for _, ctx in items]
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            outputs = list(pool.map(run, ctxs))
    else:
        outputs = [run(c) for c in ctxs]
    with open(args.output, "w") as fh:
        for (meta, ctx), out in zip(items, outputs):
            row = dict(meta, width=ctx.width, height=ctx.height, output=out.reshape(-1).tolist())
            fh.write(json.dumps(row) + "\n")
    print(f"filtered {len(outputs)} block(s) -> {args.output}")
    return 0


def cmd_bench(args) -> int:
    model = import_model(args.model)
    report = run_bench(model, args.width, args.height, args.iterations, args.blocks,
                       args.warmup, args.seed)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.format())
    return 0


def cmd_compare(args) -> int:
    records = read_dataset(args.dataset)
    model = import_model(args.model)
    if args.scheme is not None and Scheme.parse(args.scheme) is not model.scheme:
        raise InputError(f"--scheme {args.scheme} does not match the scheme {int(model.scheme)} model")
    records = _select_component(records, args.component)
    records_bit_depth_check(records, model.bit_depth)
    if args.held_out:
        records = split_records(records, args.held_out, args.split_seed)[1]
    report = compare(model, records, str(args.dataset))
    if args.json:
        print(json.dumps(report.__dict__, indent=2))
    else:
        print(report.format())
    return 0


def conformance_vectors(count: int, seed: int, bit_depth: int = 10):
    """Random per-pixel test vectors with every intermediate of the integer filter."""
    rng = np.random.default_rng(seed)
    hi = (1 << bit_depth)
    sizes = [4, 8, 16, 32, 64, 128]
    rows = []
    for _ in range(count):
        w, h = (int(v) for v in rng.choice(sizes, 2))
        x, y = int(rng.integers(w)), int(rng.integers(h))
        r1, r2, r3, r4, p = (int(v) for v in rng.integers(0, hi, 5))
        pv = vertical_blend(y, h, r1, r4)
        ph = horizontal_blend(x, w, r3, r2)
        pq = combine_quarter(pv, ph)
        rows.append((w, h, x, y, r1, r2, r3, r4, p, pv, ph, pq, blend_output(p, pq)))
    return rows


def cmd_export_vectors(args) -> int:
    lines = ["w,h,x,y,R1,R2,R3,R4,P,PV,PH,PQ,O"]
    lines += [",".join(map(str, r)) for r in conformance_vectors(args.count, args.seed, args.bit_depth)]
    text = "\n".join(lines) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="llip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="simulate filter inputs from raw 4:2:0 video")
    p.add_argument("--input", required=True, help="raw planar YUV 4:2:0 file")
    _add_video_args(p)
    p.add_argument("--cap", type=int, default=None, help="max records per frame")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scheme", choices=["1", "2"], default="2")
    p.add_argument("--component", default="all", help="Y, U, V or all")
    p.add_argument("--group", default="shared", help="HighRes, LowRes or shared (metadata)")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-final", type=float, default=3e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", type=int, default=10)
    p.add_argument("--coord-scale", type=float, default=64.0)
    p.add_argument("--log-every", type=int, default=100, help="print every Nth batch loss")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("filter", help="apply the integer or learned filter to blocks")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--contexts", help="JSON-lines block contexts")
    src.add_argument("--video", help="raw YUV file; contexts are synthesised as in extract")
    how = p.add_mutually_exclusive_group(required=True)
    how.add_argument("--model")
    how.add_argument("--traditional", action="store_true")
    p.add_argument("--scheme", choices=["1", "2"], default=None)
    p.add_argument("--output", required=True)
    _add_video_args(p, required=False)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("bench", help="time learned vs integer filter")
    p.add_argument("--model", required=True)
    p.add_argument("--width", type=int, default=16, help="block width")
    p.add_argument("--height", type=int, default=16, help="block height")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--blocks", type=int, default=256, help="blocks per iteration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="MSE of prediction, integer and learned filters")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--scheme", choices=["1", "2"], default=None)
    p.add_argument("--component", default="all")
    p.add_argument("--held-out", type=float, default=0.0,
                   help="evaluate only this held-out fraction of the dataset")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-vectors", help="write integer-filter conformance vectors as CSV")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", type=int, default=10)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_export_vectors)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "filter" and args.video and (args.width is None or args.height is None):
        parser.error("--video needs --width and --height")
    try:
        return args.func(args)
    except LlipError as exc:
        print(f"llip {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"llip {args.command}: {exc}", file=sys.stderr)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
