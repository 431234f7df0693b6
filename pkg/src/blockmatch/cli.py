"""Benchmark harness for the motion-search algorithms.

Three subcommands: `run` estimates motion for every consecutive frame
pair with one algorithm and reports coding quality and search effort,
`compare` tabulates several algorithms against the exhaustive-search
reference, and `trace` dumps the visited-cell pattern of a single block
search. Human summaries go to stdout; machine artifacts are only written
where --out/--mv-dump point.
"""

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .baselines import ds_search, tss_search
from .de import DeParams
from .metrics import (
    FrameOutcome,
    SequenceReport,
    aggregate,
    d_psnr,
    export_pattern_trace,
    mse,
)
from .motion import (
    ALGORITHMS,
    BlockRef,
    SearchConfig,
    SearchProbe,
    compensate,
    debm_search,
    estimate_frame,
    full_search,
    partition,
)
from .video_io import (
    SequenceSource,
    SynthParams,
    open_sequence,
    read_report,
    synth_sequence,
    write_json,
    write_mv_dump,
    write_report,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmatch",
        description="Block-matching motion estimation benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--input",
        required=True,
        help="sequence path (or synthetic spec like 'translate:3,-2' with "
        "--format synth)",
    )
    common.add_argument(
        "--format",
        choices=("y4m", "yuv420", "pgm", "synth"),
        help="input format; inferred from the file suffix when omitted",
    )
    common.add_argument("--width", type=int, help="frame width (yuv420 and synth)")
    common.add_argument("--height", type=int, help="frame height (yuv420 and synth)")
    common.add_argument("--frames", type=int, help="max frames to read or generate")
    common.add_argument("--block-size", type=int, default=16)
    common.add_argument("--search-range", type=int, default=7)
    common.add_argument("--seed", type=int, default=0)

    run_p = sub.add_parser("run", parents=[common], help="run one algorithm")
    run_p.add_argument("--algo", choices=ALGORITHMS, required=True)
    run_p.add_argument("--out", help="report file (.json or .csv)")
    run_p.add_argument("--mv-dump", help="per-block motion-vector CSV")
    run_p.set_defaults(handler=cmd_run)

    cmp_p = sub.add_parser(
        "compare", parents=[common], help="compare algorithms against fsa"
    )
    cmp_p.add_argument(
        "--algo",
        default="fsa,debm,tss,ds",
        help="comma-separated algorithm list (default: fsa,debm,tss,ds)",
    )
    cmp_p.add_argument(
        "--reference", help="stored fsa JSON report to compare against"
    )
    cmp_p.add_argument("--out", help="comparison table JSON")
    cmp_p.set_defaults(handler=cmd_compare)

    trc_p = sub.add_parser(
        "trace", parents=[common], help="dump one block's search pattern"
    )
    trc_p.add_argument("--algo", choices=ALGORITHMS, required=True)
    trc_p.add_argument(
        "--trace-block", required=True, metavar="X,Y", help="block anchor"
    )
    trc_p.add_argument(
        "--frame", type=int, default=1, help="frame index to predict (default 1)"
    )
    trc_p.add_argument("--out", required=True, help="trace JSON path")
    trc_p.set_defaults(handler=cmd_trace)
    return parser


# ---------------------------------------------------------------------------
# Input handling
# ---------------------------------------------------------------------------

_SUFFIX_FORMATS = {".y4m": "y4m", ".yuv": "yuv420", ".pgm": "pgm"}


def _resolve_format(args) -> str:
    if args.format:
        return args.format
    suffix = os.path.splitext(args.input)[1].lower()
    if suffix in _SUFFIX_FORMATS:
        return _SUFFIX_FORMATS[suffix]
    if "*" in args.input or "?" in args.input:
        return "pgm"
    raise ValueError(
        f"cannot infer format from {args.input!r}; pass --format"
    )


def _parse_synth_spec(spec: str, args) -> tuple[str, SynthParams]:
    kind, _, motion = spec.partition(":")
    aliases = {"random": "random_texture_translate"}
    kind = aliases.get(kind, kind)
    du = dv = 0
    if motion:
        try:
            du_text, dv_text = motion.split(",")
            du, dv = int(du_text), int(dv_text)
        except ValueError:
            raise ValueError(
                f"bad synthetic motion {motion!r}, expected 'du,dv'"
            ) from None
    params = SynthParams(
        width=args.width or 176,
        height=args.height or 144,
        frames=args.frames or 10,
        du=du,
        dv=dv,
        seed=args.seed,
        max_shift=args.search_range,
    )
    return kind, params


def load_frames(args) -> list[np.ndarray]:
    fmt = _resolve_format(args)
    if fmt == "synth":
        kind, params = _parse_synth_spec(args.input, args)
        return list(synth_sequence(kind, params))
    source = SequenceSource(
        format=fmt,
        path=args.input,
        width=args.width,
        height=args.height,
        frame_count=args.frames,
    )
    return list(open_sequence(source))


def build_config(args) -> SearchConfig:
    return SearchConfig(
        w=args.search_range,
        n=args.block_size,
        de=DeParams(rng_seed=args.seed),
    )


# ---------------------------------------------------------------------------
# Shared pipeline
# ---------------------------------------------------------------------------


def run_sequence(
    frames: list[np.ndarray],
    config: SearchConfig,
    algorithm: str,
    reference: SequenceReport | None = None,
) -> tuple[SequenceReport, list[BlockRef], list[tuple[int, list]]]:
    """Estimate, compensate and score every consecutive frame pair.

    Returns the aggregated report, the block grid, and the per-frame
    block results keyed by predicted-frame index (for MV dumps).
    """
    if len(frames) < 2:
        raise ValueError(f"need at least two frames, got {len(frames)}")
    blocks = partition(frames[0], config.n)
    outcomes = []
    dump_entries = []
    for t in range(1, len(frames)):
        mv_field, results = estimate_frame(
            frames[t], frames[t - 1], config, algorithm
        )
        predicted = compensate(frames[t - 1], mv_field, config.n)
        outcomes.append(FrameOutcome(t, mse(frames[t], predicted), results))
        dump_entries.append((t, results))
    return aggregate(algorithm, outcomes, reference), blocks, dump_entries


def _fmt_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def _cleanup(paths: list[str]) -> None:
    for path in paths:
        try:
            os.remove(path)
        except OSError:
            pass


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    written: list[str] = []
    try:
        frames = load_frames(args)
        config = build_config(args)
        report, blocks, dump_entries = run_sequence(frames, config, args.algo)
        if args.out:
            write_report(report, args.out)
            written.append(args.out)
        if args.mv_dump:
            write_mv_dump(args.mv_dump, blocks, dump_entries)
            written.append(args.mv_dump)
    except Exception as exc:
        _cleanup(written)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    extra = (
        f" exact_frames={report.infinite_psnr_frames}"
        if report.infinite_psnr_frames
        else ""
    )
    print(
        f"{args.algo}: frame_pairs={len(report.per_frame)} "
        f"blocks_per_frame={len(blocks)} mean_psnr={_fmt_db(report.mean_psnr)}"
        f"{extra} mean_search_points={report.mean_search_points:.2f}"
    )
    return 0


def cmd_compare(args) -> int:
    written: list[str] = []
    try:
        algos = [a.strip() for a in args.algo.split(",") if a.strip()]
        unknown = [a for a in algos if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}, expected {ALGORITHMS}")
        if not algos:
            raise ValueError("no algorithms requested")
        if args.reference is None and "fsa" not in algos:
            raise ValueError(
                "comparison needs 'fsa' in --algo or a stored --reference report"
            )
        frames = load_frames(args)
        config = build_config(args)

        if args.reference is not None:
            reference = read_report(args.reference)
            if reference.algorithm != "fsa":
                raise ValueError(
                    f"--reference holds a {reference.algorithm!r} report, "
                    f"expected fsa"
                )
        else:
            reference, _, _ = run_sequence(frames, config, "fsa")

        cache: dict[str, SequenceReport] = {"fsa": reference}
        rows = []
        for algo in algos:
            if algo not in cache:
                cache[algo], _, _ = run_sequence(frames, config, algo)
            report = cache[algo]
            rows.append(
                {
                    "algorithm": algo,
                    "mean_psnr": report.mean_psnr,
                    "d_psnr": d_psnr(reference.mean_psnr, report.mean_psnr),
                    "mean_search_points": report.mean_search_points,
                }
            )
        # Rank 1 = fewest true evaluations per block; ties keep list order.
        for rank, row in enumerate(
            sorted(rows, key=lambda r: r["mean_search_points"]), start=1
        ):
            row["rank"] = rank

        if args.out:
            write_json({"reference": "fsa", "rows": rows}, args.out)
            written.append(args.out)
    except Exception as exc:
        _cleanup(written)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"{'algorithm':<10} {'mean_psnr':>10} {'d_psnr%':>9} {'points':>8} {'rank':>5}")
    for row in rows:
        dp = "n/a" if row["d_psnr"] is None else f"{row['d_psnr']:.2f}"
        print(
            f"{row['algorithm']:<10} {_fmt_db(row['mean_psnr']):>10} {dp:>9} "
            f"{row['mean_search_points']:>8.2f} {row['rank']:>5}"
        )
    return 0


def cmd_trace(args) -> int:
    written: list[str] = []
    try:
        frames = load_frames(args)
        config = build_config(args)
        if not 1 <= args.frame < len(frames):
            raise ValueError(
                f"frame {args.frame} out of range; predictable frames are "
                f"1..{len(frames) - 1}"
            )
        try:
            x_text, y_text = args.trace_block.split(",")
            x, y = int(x_text), int(y_text)
        except ValueError:
            raise ValueError(
                f"bad --trace-block {args.trace_block!r}, expected 'x,y'"
            ) from None

        current, previous = frames[args.frame], frames[args.frame - 1]
        blocks = partition(current, config.n)
        anchors = {(b.x, b.y): i for i, b in enumerate(blocks)}
        if (x, y) not in anchors:
            xs = sorted({b.x for b in blocks})
            ys = sorted({b.y for b in blocks})
            raise ValueError(
                f"block ({x}, {y}) is not on the partition grid; valid x: "
                f"{xs}, valid y: {ys}"
            )
        index = anchors[(x, y)]
        block = BlockRef(x, y, config.n)
        probe = SearchProbe()
        if args.algo == "fsa":
            result = full_search(current, previous, block, config.w, probe)
        elif args.algo == "debm":
            # Match the per-block seed derivation of a full run.
            block_config = replace(
                config, de=replace(config.de, rng_seed=config.de.rng_seed ^ index)
            )
            result = debm_search(current, previous, block, block_config, probe)
        elif args.algo == "tss":
            result = tss_search(current, previous, block, config.w, probe)
        else:
            result = ds_search(current, previous, block, config.w, probe)

        document = {
            "algorithm": args.algo,
            "frame": args.frame,
            "block": {"x": x, "y": y, "n": config.n},
            "sad": result.sad,
            "evaluations": result.evaluations,
            "estimations": result.estimations,
        }
        document.update(export_pattern_trace(probe.visits, result.mv, config.w))
        write_json(document, args.out)
        written.append(args.out)
    except Exception as exc:
        _cleanup(written)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{args.algo} block ({x},{y}) frame {args.frame}: mv=({result.mv.u},"
        f"{result.mv.v}) sad={result.sad} evaluations={result.evaluations} "
        f"estimations={result.estimations} -> {args.out}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
