"""Command-line driver and experiment harness.

Subcommands:
  render     render a frame sequence in pt or pg mode
  reference  accumulate a high-spp ground-truth image
  compare    error metrics of two images against a reference
  flicker    temporal-MSE series of a static-camera sequence
  ab         paired 1-spp comparison of pg vs pt against a reference

Every command is deterministic given its configuration and seed (the
timing CSV is the one exception). Exit codes: 0 success, 1 IO/runtime
failure, 2 usage error.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import guide_buffers as gb
from . import metrics, mixture, ptrace
from . import scene as sc


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    scene: str = "cornell-occluder"
    width: int = 64
    height: int = 64
    frames: int = 1
    spp: int = 1
    mode: str = "pt"
    seed: int = 0
    kmax: int = mixture.KMAX_DEFAULT
    out: str = "."
    checkpoint_in: Optional[str] = None
    checkpoint_out: Optional[str] = None
    warmup: int = 128
    pairs: int = 64
    ref_spp: int = 4096
    max_depth: int = 4
    depth_rel_tol: float = 0.1
    normal_dot_min: float = 0.9
    neighbor_radius: float = gb.NEIGHBOR_RADIUS
    roughness_min_guide: float = 0.05

    def validate(self):
        if self.frames < 1 or self.spp < 1:
            raise UsageError("frames and spp must be >= 1")
        if self.width < 1 or self.height < 1:
            raise UsageError("resolution must be at least 1x1")
        if self.mode not in ("pt", "pg"):
            raise UsageError("mode must be 'pt' or 'pg'")
        if self.kmax < 1:
            raise UsageError("kmax must be >= 1")

    def path_config(self, guiding):
        return ptrace.PathConfig(
            max_depth=self.max_depth,
            guiding=guiding,
            roughness_min_guide=self.roughness_min_guide,
            spp=self.spp,
        )

    def policy(self):
        return gb.ReprojectionPolicy(
            depth_rel_tol=self.depth_rel_tol, normal_dot_min=self.normal_dot_min
        )


def load_scene_arg(name_or_path):
    if name_or_path in sc.BUILTIN_SCENES:
        return sc.load_scene(name_or_path)
    if os.path.exists(name_or_path):
        with open(name_or_path, "r") as f:
            return sc.load_scene(f.read())
    raise UsageError(
        f"unknown scene {name_or_path!r}: not a built-in "
        f"({', '.join(sorted(sc.BUILTIN_SCENES))}) and not a file"
    )


class RenderSession:
    """Frame-sequential driver owning the guiding state for one run.

    pg frames run reproject -> render -> train; pt frames render with the
    guiding machinery disabled and never touch the guiding buffer.
    """

    def __init__(self, scene, cfg, mode=None):
        self.scene = scene
        self.cfg = cfg
        self.mode = mode or cfg.mode
        self.gamma = None
        self.gbuf_prev = None
        self.prev_cam = None
        if self.mode == "pg":
            if cfg.checkpoint_in:
                self.gamma = gb.checkpoint_load(
                    cfg.checkpoint_in, expect_size=(cfg.width, cfg.height)
                )
            else:
                self.gamma = gb.GuidingBuffer.create(cfg.width, cfg.height)

    def run_frame(self, frame_index, spp=None, want_moments=False):
        cfg = self.cfg
        cam = sc.camera_at(self.scene, frame_index)
        gbuf = ptrace.gbuffer_pass(self.scene, frame_index, (cfg.width, cfg.height))
        pcfg = cfg.path_config(self.mode == "pg")
        if spp is not None:
            pcfg = replace(pcfg, spp=spp)
        if self.mode == "pg":
            if self.gbuf_prev is not None:
                motion, has = ptrace.motion_vectors(self.prev_cam, cam, gbuf)
                gbuf.motion = motion
                gbuf.has_history = has
                self.gamma = gb.reproject(self.gamma, self.gbuf_prev, gbuf, cfg.policy())
            result = ptrace.render_frame(
                self.scene, frame_index, self.gamma.stats_for_render(), pcfg,
                cfg.seed, gbuf=gbuf, want_moments=want_moments,
            )
            self.gamma = gb.training_pass(
                self.gamma, result.vpl, gbuf, k_max=cfg.kmax, seed=cfg.seed,
                frame_index=frame_index, neighbor_radius=cfg.neighbor_radius,
            )
        else:
            result = ptrace.render_frame(
                self.scene, frame_index, None, pcfg, cfg.seed, gbuf=gbuf,
                want_moments=want_moments,
            )
        self.gbuf_prev = gbuf
        self.prev_cam = cam
        return result


def _write_frame_outputs(out_dir, frame_index, image):
    pfm = os.path.join(out_dir, f"frame_{frame_index:04d}.pfm")
    ppm = os.path.join(out_dir, f"frame_{frame_index:04d}.ppm")
    metrics.write_pfm(image, pfm)
    metrics.write_ppm_tonemapped(image, ppm, exposure=1.0)
    return pfm


def cmd_render(cfg):
    cfg.validate()
    scene = load_scene_arg(cfg.scene)
    os.makedirs(cfg.out, exist_ok=True)
    session = RenderSession(scene, cfg)
    timing_rows = []
    for f in range(cfg.frames):
        t0 = time.perf_counter()
        result = session.run_frame(f)
        wall_ms = (time.perf_counter() - t0) * 1e3
        _write_frame_outputs(cfg.out, f, result.image)
        timing_rows.append((f, cfg.mode, wall_ms, result.mean_path_length))
        print(
            f"frame {f}: {wall_ms:.1f} ms, mean path length "
            f"{result.mean_path_length:.3f}, nonfinite {result.nonfinite_count}"
        )
    if cfg.checkpoint_out and session.gamma is not None:
        gb.checkpoint_save(session.gamma, cfg.checkpoint_out)
    with open(os.path.join(cfg.out, "timing.csv"), "w", newline="") as f:
        f.write("frame,pass,wall_ms,mean_path_length\n")
        for row in timing_rows:
            f.write(f"{row[0]},{row[1]},{row[2]:.3f},{row[3]:.6f}\n")
    return 0


def cmd_reference(cfg):
    cfg.validate()
    scene = load_scene_arg(cfg.scene)
    os.makedirs(cfg.out, exist_ok=True)
    cfg = replace(cfg, mode="pt")
    session = RenderSession(scene, cfg, mode="pt")
    result = session.run_frame(0)
    path = os.path.join(cfg.out, "reference.pfm")
    metrics.write_pfm(result.image, path)
    metrics.write_ppm_tonemapped(
        result.image, os.path.join(cfg.out, "reference.ppm"), exposure=1.0
    )
    print(f"reference written to {path} ({cfg.spp} spp)")
    return 0


def cmd_compare(image_a, image_b, reference, out_dir):
    a = metrics.read_pfm(image_a)
    b = metrics.read_pfm(image_b)
    ref = metrics.read_pfm(reference)
    rows = []
    for name, fn in (("mse", metrics.mse), ("relmse", metrics.rel_mse)):
        va = fn(a, ref)
        vb = fn(b, ref)
        ratio = vb / va if va > 0 else float("inf") if vb > 0 else 1.0
        rows.append((name, va, vb, ratio))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "compare.csv")
    with open(path, "w", newline="") as f:
        f.write("metric,image_a,image_b,ratio_b_over_a\n")
        for name, va, vb, ratio in rows:
            f.write(f"{name},{va!r},{vb!r},{ratio!r}\n")
    for name, va, vb, ratio in rows:
        print(f"{name}: A={va:.6g} B={vb:.6g} B/A={ratio:.4g}")
    return 0


def cmd_flicker(cfg):
    cfg.validate()
    if cfg.frames < 2:
        raise UsageError("flicker needs at least 2 frames")
    scene = load_scene_arg(cfg.scene)
    if not sc.camera_is_static(scene):
        raise UsageError("flicker requires a static camera (animated keyframes found)")
    os.makedirs(cfg.out, exist_ok=True)
    session = RenderSession(scene, cfg)
    frames = []
    for f in range(cfg.warmup + cfg.frames):
        if f < cfg.warmup and cfg.mode == "pt":
            continue  # pt carries no state; warmup frames would be unused
        result = session.run_frame(f)
        if f >= cfg.warmup:
            frames.append(result.image)
    rows = metrics.flicker_series(frames)
    rows = [metrics.MetricRow(r.frame + cfg.warmup, r.metric, r.value) for r in rows]
    path = os.path.join(cfg.out, "flicker.csv")
    metrics.write_metrics_csv(path, rows)
    mean_v = float(np.mean([r.value for r in rows]))
    print(f"temporal MSE over {len(rows)} transitions: mean {mean_v:.6g} -> {path}")
    return 0


def run_ab(scene, cfg):
    """Reference, pg warmup, then paired 1-spp renders of both arms.

    Returns dict with per-arm mean relMSE and the pg/pt ratio. Seeds differ
    per measured frame (distinct RNG streams per frame index); pg keeps
    training through the measurement window, pt never touches the guiding
    buffer.
    """
    ref_cfg = replace(cfg, spp=cfg.ref_spp, mode="pt")
    ref_session = RenderSession(scene, ref_cfg, mode="pt")
    reference = ref_session.run_frame(10_000_000).image.astype(np.float64)

    pg_session = RenderSession(scene, replace(cfg, spp=1), mode="pg")
    for f in range(cfg.warmup):
        pg_session.run_frame(f)

    pt_session = RenderSession(scene, replace(cfg, spp=1), mode="pt")
    pg_errs = []
    pt_errs = []
    for i in range(cfg.pairs):
        f = cfg.warmup + i
        pg_img = pg_session.run_frame(f, spp=1).image
        pt_img = pt_session.run_frame(f, spp=1).image
        pg_errs.append(metrics.rel_mse(pg_img, reference))
        pt_errs.append(metrics.rel_mse(pt_img, reference))
    pg_mean = float(np.mean(pg_errs))
    pt_mean = float(np.mean(pt_errs))
    return {
        "pg_mean_relmse": pg_mean,
        "pt_mean_relmse": pt_mean,
        "pg_over_pt": pg_mean / pt_mean if pt_mean > 0 else float("inf"),
        "reference": reference,
    }


def cmd_ab(cfg):
    cfg.validate()
    scene = load_scene_arg(cfg.scene)
    os.makedirs(cfg.out, exist_ok=True)
    summary = run_ab(scene, cfg)
    path = os.path.join(cfg.out, "ab_summary.csv")
    with open(path, "w", newline="") as f:
        f.write("metric,value\n")
        f.write(f"pg_mean_relmse,{summary['pg_mean_relmse']!r}\n")
        f.write(f"pt_mean_relmse,{summary['pt_mean_relmse']!r}\n")
        f.write(f"pg_over_pt,{summary['pg_over_pt']!r}\n")
    print(
        f"relMSE pg={summary['pg_mean_relmse']:.6g} pt={summary['pt_mean_relmse']:.6g} "
        f"ratio={summary['pg_over_pt']:.4g} -> {path}"
    )
    return 0


# ---------------------------------------------------------------------------
# argument handling: defaults < config file < explicit flags

_CFG_FIELDS = {f.name for f in fields(RunConfig)}


def _add_run_flags(p):
    p.add_argument("--config", help="JSON config file (same keys as flags)")
    p.add_argument("--scene", default=argparse.SUPPRESS)
    p.add_argument("--width", type=int, default=argparse.SUPPRESS)
    p.add_argument("--height", type=int, default=argparse.SUPPRESS)
    p.add_argument("--frames", type=int, default=argparse.SUPPRESS)
    p.add_argument("--spp", type=int, default=argparse.SUPPRESS)
    p.add_argument("--mode", choices=("pt", "pg"), default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--kmax", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS)
    p.add_argument("--checkpoint-in", dest="checkpoint_in", default=argparse.SUPPRESS)
    p.add_argument("--checkpoint-out", dest="checkpoint_out", default=argparse.SUPPRESS)
    p.add_argument("--warmup", type=int, default=argparse.SUPPRESS)
    p.add_argument("--pairs", type=int, default=argparse.SUPPRESS)
    p.add_argument("--ref-spp", dest="ref_spp", type=int, default=argparse.SUPPRESS)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=argparse.SUPPRESS)
    p.add_argument("--depth-rel-tol", dest="depth_rel_tol", type=float, default=argparse.SUPPRESS)
    p.add_argument("--normal-dot-min", dest="normal_dot_min", type=float, default=argparse.SUPPRESS)
    p.add_argument("--neighbor-radius", dest="neighbor_radius", type=float, default=argparse.SUPPRESS)
    p.add_argument("--roughness-min-guide", dest="roughness_min_guide", type=float, default=argparse.SUPPRESS)


def _config_from_args(args):
    values = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            with open(cfg_path) as f:
                file_cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config file {cfg_path}: {e}") from e
        unknown = set(file_cfg) - _CFG_FIELDS
        if unknown:
            raise UsageError(f"config file has unknown keys: {sorted(unknown)}")
        values.update(file_cfg)
    values.update(
        {k: v for k, v in vars(args).items() if k in _CFG_FIELDS}
    )
    return RunConfig(**values)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pgtrace",
        description="Deterministic CPU path tracer with screen-space mixture guiding",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("render", "reference", "flicker", "ab"):
        p = sub.add_parser(name)
        _add_run_flags(p)
    p = sub.add_parser("compare")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("reference")
    p.add_argument("--out", default=".")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            return cmd_compare(args.image_a, args.image_b, args.reference, args.out)
        cfg = _config_from_args(args)
        if args.command == "render":
            return cmd_render(cfg)
        if args.command == "reference":
            return cmd_reference(cfg)
        if args.command == "flicker":
            return cmd_flicker(cfg)
        if args.command == "ab":
            return cmd_ab(cfg)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (sc.SceneError, gb.CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
