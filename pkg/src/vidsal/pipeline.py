"""End-to-end video saliency: flow, multiscale regions, features, temporal window, fusion."""
from __future__ import annotations

import json
import logging
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import low_level as ll
from . import mid_level as ml
from . import spatiotemporal as st
from .config import PipelineConfig
from .errors import NoFrames
from .frame_io import Frame, LabFrame, list_videos, load_frame_sequence, to_lab, write_saliency
from .optical_flow import FlowField, FlowParams, estimate_flow, write_flow
from .segmentation import segment_video, write_label_png, write_region_csv

log = logging.getLogger(__name__)


@dataclass
class VideoResult:
    name: str
    stems: list
    maps: list  # per frame, H x W float in [0, 1]
    seconds: float = 0.0
    # filled when keep_intermediate=True: per kept scale, per frame
    spatial: dict = field(default_factory=dict)
    temporal: dict = field(default_factory=dict)
    low: dict = field(default_factory=dict)
    mid: dict = field(default_factory=dict)
    labelings: object = None


@dataclass
class RunReport:
    manifest: dict
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def flow_params(cfg: PipelineConfig) -> FlowParams:
    f = cfg.flow
    return FlowParams(f.pyramid_levels, f.scale_factor, f.smoothness_alpha, f.iterations_per_level,
                      f.presmooth_sigma)


def compute_flows(labs: list[LabFrame], cfg: PipelineConfig) -> list[FlowField]:
    """Forward flows t -> t+1, each on the grid of frame t."""
    params = flow_params(cfg)
    return [estimate_flow(labs[t].l, labs[t + 1].l, params, t, t + 1) for t in range(len(labs) - 1)]


def feature_flows(labs: list[LabFrame], flows: list[FlowField], cfg: PipelineConfig) -> list[FlowField]:
    """Motion used for each frame's dynamic features, sampled on that frame's own grid.

    For t >= 1 this is the backward flow t -> t-1 negated, i.e. the motion that
    brought each pixel of frame t from frame t-1. Frame 0 has no predecessor and
    borrows the forward flow 0 -> 1. A single frame gets zero motion.
    """
    if not flows:
        return [FlowField.zeros(labs[0].shape, 0, 0)]
    params = flow_params(cfg)
    out = [flows[0]]
    for t in range(1, len(labs)):
        back = estimate_flow(labs[t].l, labs[t - 1].l, params, t, t - 1)
        out.append(FlowField(-back.u, -back.v, t - 1, t))
    return out


def _objectness(cfg, lab, labeling, video_name, stem):
    odir = cfg.mid_level.objectness_dir
    if odir:
        for d in (Path(odir) / video_name, Path(odir)):
            path = ml.find_objectness_file(d, stem)
            if path is not None:
                omap = ml.load_objectness(path)
                if omap.values.shape == lab.shape:
                    return omap
                log.warning("objectness map %s has the wrong size; computing instead", path)
                break
        else:
            log.warning("no objectness map for %s/%s; computing instead", video_name, stem)
    return ml.objectness(lab, labeling, cfg.mid_level.objectness_windows,
                         seed=cfg.mid_level.objectness_seed)


def process_video(
    frames: list[Frame],
    cfg: PipelineConfig | None = None,
    name: str = "video",
    debug_dir: Path | None = None,
    keep_intermediate: bool = False,
) -> VideoResult:
    """Saliency maps for one frame sequence."""
    cfg = cfg or PipelineConfig()
    cfg.validate()
    if not frames:
        raise NoFrames(f"{name}: empty frame sequence")
    start = time.perf_counter()
    labs = [to_lab(f) for f in frames]
    flows = compute_flows(labs, cfg)

    seg = cfg.segmentation
    targets = tuple(seg.scale_targets) if seg.scale_targets is not None else None
    msl = segment_video(labs, flows, targets, seg.compactness, seg.n_iter, seg.max_iter, seg.drift)
    scale_ids = cfg.scale_indices(msl.n_scales)

    lo, mi, fu = cfg.low_level, cfg.mid_level, cfg.fusion
    bank = ll.GaborBank(lo.gabor_gamma, lo.gabor_wavelength, lo.gabor_sigma_ratio)
    atw = st.AtwParams(fu.atw_max_window, fu.atw_lambda, fu.sigma_tpdst)
    mca = st.McaParams(fu.mca_iterations, fu.mca_coupling, fu.mca_delta, fu.mca_lambda)
    # per scale: spatial values keyed by track id for the last M frames
    history = {l: deque(maxlen=atw.max_window) for l in scale_ids}
    result = VideoResult(name=name, stems=[f.stem for f in frames], maps=[])
    if keep_intermediate:
        result.labelings = msl
        for store in (result.spatial, result.temporal, result.low, result.mid):
            store.update({l: [] for l in scale_ids})

    motion = feature_flows(labs, flows, cfg)
    for t, lab in enumerate(labs):
        flow = motion[t]
        gabor = ll.gabor_energy(lab.l, bank)
        omap = _objectness(cfg, lab, msl.scales[0][t], name, frames[t].stem)
        layers = []
        for l in scale_ids:
            labeling = msl.scales[l][t]
            hists = ll.region_histograms(labeling, lab, gabor, flow, lo.orientation_bins)
            contrib = ll.low_level_contributions(hists, labeling.centroid, labeling.sizes(),
                                                 lo.weights, lo.sigma_spdst, lo.color_mode)
            s_lf = ll.minmax(contrib.sum(axis=1))
            scores = ml.mid_level_scores(labeling, lab, flow, omap, mi.sigma_cen, mi.sigma_clr,
                                         mi.sigma_bgr, mi.bndcon)
            s_mf = ml.mid_level_map(scores, mi.weights)
            spatial = st.combine_spatial(s_lf, s_mf, fu.alpha)

            if fu.atw:
                mu, _, beta = st.region_motion_stats(labeling, flow)
                phi = st.window_sizes(mu, beta, atw, t)
                temporal = st.temporal_smooth(spatial, labeling.track_id, phi, history[l], atw.sigma_tpdst)
            else:
                temporal = spatial
            history[l].append(dict(zip(labeling.track_id.tolist(), spatial.tolist())))
            layers.append(st.rasterize(temporal, labeling))

            if keep_intermediate:
                result.low[l].append(s_lf)
                result.mid[l].append(s_mf)
                result.spatial[l].append(spatial)
                result.temporal[l].append(temporal)
            if debug_dir is not None:
                ddir = debug_dir / f"scale{l + 1}"
                stem = frames[t].stem
                ll.write_debug_csv(ddir / f"{stem}_low.csv", s_lf, contrib)
                write_label_png(labeling, ddir / f"{stem}_labels.png")
                write_region_csv(labeling, ddir / f"{stem}_regions.csv")

        smap = layers[0] if len(layers) == 1 else st.mca_fuse(layers, mca)
        result.maps.append(np.clip(smap, 0.0, 1.0))
        if debug_dir is not None and t < len(flows):
            write_flow(flows[t], debug_dir / "flow" / f"{frames[t].stem}.flo")

    result.seconds = time.perf_counter() - start
    return result


def _thread_cap() -> int:
    raw = os.environ.get("SALIENT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring SALIENT_THREADS=%r", raw)
    return os.cpu_count() or 1


def _run_one(vdir: Path, out_root: Path, cfg: PipelineConfig) -> dict:
    frames = load_frame_sequence(vdir / "frames")
    debug = out_root / vdir.name / "debug" if cfg.output.debug else None
    res = process_video(frames, cfg, vdir.name, debug)
    for stem, smap in zip(res.stems, res.maps):
        write_saliency(smap, out_root / vdir.name / f"{stem}.png")
    return {"status": "ok", "frames": len(frames), "seconds": round(res.seconds, 3)}


def run(dataset_root, output_root, cfg: PipelineConfig | None = None, threads: int | None = None) -> RunReport:
    """Process every ``<dataset_root>/<video>/frames`` directory into ``<output_root>/<video>/``.

    Failures are isolated per video and listed in the manifest.
    """
    cfg = cfg or PipelineConfig()
    cfg.validate()
    dataset_root = Path(dataset_root)
    out_root = Path(output_root)
    if not dataset_root.is_dir():
        raise NoFrames(f"dataset root {dataset_root} does not exist")
    videos = list_videos(dataset_root)
    if not videos:
        raise NoFrames(f"no <video>/frames directories under {dataset_root}")
    out_root.mkdir(parents=True, exist_ok=True)

    workers = max(1, min(threads or _thread_cap(), len(videos)))
    start = time.perf_counter()
    entries: dict[str, dict] = {}

    def task(vdir):
        try:
            return vdir.name, _run_one(vdir, out_root, cfg)
        except Exception as exc:  # isolate per-video failures
            log.error("video %s failed: %s", vdir.name, exc)
            return vdir.name, {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    if workers == 1:
        results = [task(v) for v in videos]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, videos))
    for name, entry in results:
        entries[name] = entry

    manifest = {
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config_hash": cfg.hash(),
        "config": cfg.to_flat(),
        "threads": workers,
        "videos": entries,
        "seconds": round(time.perf_counter() - start, 3),
    }
    (out_root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    failures = [n for n, e in entries.items() if e["status"] != "ok"]
    return RunReport(manifest=manifest, failures=failures)
