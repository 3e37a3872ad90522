"""Command-line entry point: ``vidsal run|eval|synth|flow|segment|plot``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 some videos failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config, parse_value
from .errors import ConfigError, VidsalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("vidsal")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 160x120, got {text!r}") from None


def _parse_levels(text: str):
    if text == "all":
        return "all"
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("levels must be 'all' or comma-separated integers") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vidsal", description="Region-based multiscale video saliency.")
    p.add_argument("--version", action="version", version=f"vidsal {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="compute saliency maps for every video in a dataset")
    r.add_argument("dataset", type=Path, help="root holding <video>/frames/*.png")
    r.add_argument("output", type=Path)
    r.add_argument("--config", type=Path, help="JSON file of dotted keys")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    r.add_argument("--levels", type=_parse_levels, help="scale levels to fuse: 1, 2, 3, a list, or all")
    r.add_argument("--alpha", type=float, help="low-level weight in the spatial combination")
    r.add_argument("--no-atw", action="store_true", help="disable the adaptive temporal window")
    r.add_argument("--objectness-dir", type=Path, help="precomputed objectness maps")
    r.add_argument("--color-hist", choices=("joint", "per-channel"))
    r.add_argument("--bndcon", choices=("soft", "literal"))
    r.add_argument("--mca-lambda", choices=("logodds", "odds"))
    r.add_argument("--debug", action="store_true", help="write flow, label and feature dumps")
    r.add_argument("--threads", type=int, help="videos processed in parallel (default SALIENT_THREADS)")

    e = sub.add_parser("eval", help="score saliency maps against ground truth")
    e.add_argument("maps", type=Path, help="root holding <video>/<stem>.png maps")
    e.add_argument("dataset", type=Path, help="root holding <video>/gt/<stem>.png masks")
    e.add_argument("--out", type=Path, help="report directory (default: <maps>/eval)")
    e.add_argument("--label", default="method", help="curve label in the SVG plot")

    s = sub.add_parser("synth", help="write a synthetic video with exact ground truth")
    s.add_argument("kind", choices=("moving_square", "static_blob", "two_objects"))
    s.add_argument("output", type=Path, help="dataset root to write into")
    s.add_argument("--frames", type=int, default=32)
    s.add_argument("--size", type=_parse_size, default=(160, 120), help="WIDTHxHEIGHT")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--name", help="video directory name (default: the kind)")

    f = sub.add_parser("flow", help="dump optical flow for one video")
    f.add_argument("video", type=Path, help="directory of frames or a video directory with frames/")
    f.add_argument("output", type=Path)
    f.add_argument("--config", type=Path)
    f.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    g = sub.add_parser("segment", help="dump multiscale superpixels for one video")
    g.add_argument("video", type=Path)
    g.add_argument("output", type=Path)
    g.add_argument("--config", type=Path)
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    pl = sub.add_parser("plot", help="draw PR curves from eval CSV files")
    pl.add_argument("csv", type=Path, nargs="+")
    pl.add_argument("--labels", help="comma-separated curve labels (default: file stems)")
    pl.add_argument("--out", type=Path, required=True)
    return p


def _overrides(args) -> dict:
    out = {}
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_value(value.strip())
    flags = {
        "levels": "fusion.levels",
        "alpha": "fusion.alpha",
        "objectness_dir": "mid_level.objectness_dir",
        "color_hist": "low_level.color_mode",
        "bndcon": "mid_level.bndcon",
        "mca_lambda": "fusion.mca_lambda",
    }
    for attr, key in flags.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = str(val) if isinstance(val, Path) else val
    if getattr(args, "no_atw", False):
        out["fusion.atw"] = False
    if getattr(args, "debug", False):
        out["output.debug"] = True
    return out


def _frames_dir(path: Path) -> Path:
    return path / "frames" if (path / "frames").is_dir() else path


def _cmd_run(args) -> int:
    from .pipeline import run

    cfg = load_config(args.config, _overrides(args))
    report = run(args.dataset, args.output, cfg, threads=args.threads)
    n = len(report.manifest["videos"])
    if report.failures:
        log.error("%d of %d videos failed: %s", len(report.failures), n, ", ".join(report.failures))
        return EXIT_DATA if len(report.failures) == n else EXIT_PARTIAL
    print(f"wrote maps for {n} video(s) to {args.output}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from . import evaluation as ev

    videos = ev.collect_pairs(args.maps, args.dataset)
    if not any(videos.values()):
        raise VidsalError(f"no saliency maps in {args.maps} match ground truth in {args.dataset}")
    report = ev.evaluate(videos)
    out = args.out or args.maps / "eval"
    out.mkdir(parents=True, exist_ok=True)
    ev.write_csv(report, out / "pr_curve.csv")
    ev.write_pr_svg({args.label: (report.precision, report.recall)}, out / "pr_curve.svg")
    ev.write_summary(report, out / "summary.json")
    print(json.dumps({"f_adap": round(report.f_adap, 4), "f_max": round(report.f_max, 4),
                      "mae": round(report.mae, 4)}))
    return EXIT_OK


def _cmd_synth(args) -> int:
    from .synth import write_dataset

    w, h = args.size
    vdir = write_dataset(args.output, args.kind, args.frames, w, h, args.seed, args.name)
    print(f"wrote {args.frames} frame(s) to {vdir}")
    return EXIT_OK


def _cmd_flow(args) -> int:
    from .frame_io import load_frame_sequence, to_lab, write_saliency
    from .optical_flow import flow_magnitude, write_flow
    from .pipeline import compute_flows

    cfg = load_config(args.config, _overrides(args))
    frames = load_frame_sequence(_frames_dir(args.video))
    flows = compute_flows([to_lab(f) for f in frames], cfg)
    for f, flow in zip(frames, flows):
        write_flow(flow, args.output / f"{f.stem}.flo")
        mag = flow_magnitude(flow)
        top = float(mag.max())
        write_saliency(mag / top if top > 0 else mag, args.output / f"{f.stem}_mag.png")
    print(f"wrote {len(flows)} flow field(s) to {args.output}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    from .frame_io import load_frame_sequence, to_lab
    from .pipeline import compute_flows
    from .segmentation import segment_video, write_label_png, write_region_csv

    cfg = load_config(args.config, _overrides(args))
    frames = load_frame_sequence(_frames_dir(args.video))
    labs = [to_lab(f) for f in frames]
    seg = cfg.segmentation
    targets = tuple(seg.scale_targets) if seg.scale_targets is not None else None
    msl = segment_video(labs, compute_flows(labs, cfg), targets, seg.compactness, seg.n_iter,
                        seg.max_iter, seg.drift)
    for l, chain in enumerate(msl.scales):
        for f, labeling in zip(frames, chain):
            write_label_png(labeling, args.output / f"scale{l + 1}" / f"{f.stem}_labels.png")
            write_region_csv(labeling, args.output / f"scale{l + 1}" / f"{f.stem}_regions.csv")
    print(f"wrote {msl.n_scales} scale(s) x {len(frames)} frame(s) to {args.output}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .evaluation import read_curve_csv, write_pr_svg

    labels = args.labels.split(",") if args.labels else [p.stem for p in args.csv]
    if len(labels) != len(args.csv):
        raise _UsageError("--labels must name every CSV file")
    curves = {}
    for label, path in zip(labels, args.csv):
        p, r = read_curve_csv(path)
        if p.size == 0:
            raise VidsalError(f"{path} holds no curve")
        curves[label] = (p, r)
    write_pr_svg(curves, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "flow": _cmd_flow,
    "segment": _cmd_segment,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"vidsal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (_UsageError, ConfigError) as exc:
        print(f"vidsal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VidsalError, OSError, ValueError) as exc:
        print(f"vidsal: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
