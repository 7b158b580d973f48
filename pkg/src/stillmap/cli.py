"""Command-line pipeline: synth, clean, build-map, evaluate.

Every stage writes files, so stages can be re-run and diffed independently;
the ablation switch --no-removal produces the "w/o removal" arm. The
effective configuration is echoed into the output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config, save_config
from .core import PointCloud, PoseSE3
from .errors import MalformedFileError, RegistrationFailedError
from .evaluation import (
    localization_error,
    odometry_error,
    write_localization_report,
    write_odometry_report,
)
from .fileio import (
    read_cloud_ply,
    read_detections,
    read_poses,
    read_scan_binary,
    read_scan_dir,
    write_cloud_ply,
    write_poses,
    write_scan_binary,
)
from .core import Trajectory
from .mapping import MapBuilder
from .removal import RemovalConfig, process_frame
from .synthetic import demo_scene, generate_pass, load_scene, write_pass


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    for flag in ("scans", "poses", "detections", "out"):
        value = getattr(args, flag, None)
        if value:
            setattr(cfg, flag, value)
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "no_removal", False):
        cfg.removal_enabled = False
    if getattr(args, "fallback_detector", False):
        cfg.fallback_detector = True
    if getattr(args, "no_loop_closure", False):
        cfg.loop_closure = False
    return cfg


def _prepare_out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config_used.yaml")
    return out


def _scan_files(scans_dir: str) -> list[Path]:
    path = Path(scans_dir)
    if not path.is_dir():
        raise FileNotFoundError(f"scan directory not found: {path}")
    files = sorted(path.glob("*.bin"))
    if not files:
        raise FileNotFoundError(f"no .bin scans in {path}")
    return files


def _clean_one(scan_path: str, records, rcfg: RemovalConfig, out_path: str):
    cloud = read_scan_binary(scan_path)
    detections = {cloud.frame_id: records} if records is not None else None
    result = process_frame(cloud, detections, rcfg)
    write_scan_binary(result.cleaned, out_path)
    return (
        cloud.frame_id,
        len(result.cleaned),
        int(result.dynamic_indices.size),
        result.degenerate,
    )


def cmd_clean(args) -> int:
    cfg = _resolve_config(args)
    files = _scan_files(cfg.scans)
    detections = read_detections(cfg.detections) if cfg.detections else None
    out = _prepare_out(cfg)
    cleaned_dir = out / "cleaned"
    cleaned_dir.mkdir(exist_ok=True)
    rcfg = cfg.removal_config()

    jobs = []
    for f in files:
        fid = int(f.stem) if f.stem.isdigit() else 0
        records = detections.get(fid, []) if detections is not None else None
        jobs.append((str(f), records, rcfg, str(cleaned_dir / f.name)))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_clean_one, *zip(*jobs)))
    else:
        rows = [_clean_one(*job) for job in jobs]

    rows.sort(key=lambda r: r[0])
    lines = ["# frame points dynamic degenerate"]
    for fid, n, ndyn, degenerate in rows:
        lines.append(f"{fid} {n} {ndyn} {int(degenerate)}")
    (out / "clean_log.txt").write_text("\n".join(lines) + "\n")
    print(f"cleaned {len(rows)} scans -> {cleaned_dir}")
    return 0


def _quantize32(cloud: PointCloud) -> PointCloud:
    # match the float32 on-disk precision of cmd_clean's output, so a fused
    # run equals the clean-then-build file path
    inten = None if cloud.intensity is None else cloud.intensity.astype("<f4").astype(np.float64)
    return PointCloud(cloud.xyz.astype("<f4").astype(np.float64), inten, cloud.frame_id)


def cmd_build_map(args) -> int:
    cfg = _resolve_config(args)
    files = _scan_files(cfg.scans)
    detections = read_detections(cfg.detections) if cfg.detections else None
    out = _prepare_out(cfg)

    removal_active = cfg.removal_enabled and (detections is not None or cfg.fallback_detector)
    rcfg = dataclasses.replace(cfg.removal_config(), enabled=removal_active)
    builder = MapBuilder(cfg.mapping_config())

    written = []
    skipped = []
    last_pose = PoseSE3.identity()
    for f in files:
        cloud = read_scan_binary(f)
        result = process_frame(cloud, detections, rcfg)
        if removal_active:
            result = dataclasses.replace(result, cleaned=_quantize32(result.cleaned))
        try:
            builder.add_frame(result)
            last_pose = builder.state.pose_of(cloud.frame_id)
        except RegistrationFailedError as e:
            skipped.append((cloud.frame_id, str(e)))
        written.append((cloud.frame_id, last_pose))

    write_cloud_ply(builder.state.map_cloud, out / "map.ply")
    write_poses(Trajectory(written), out / "trajectory.txt")

    lines = ["# loop-closure and registration log"]
    for ev in builder.loop_events:
        lines.append(
            f"loop current={ev.current_frame} matched={ev.matched_frame} "
            f"distance={ev.distance:.6f} accepted={int(ev.accepted)} "
            f"residual_t={ev.residual_translation:.6f} residual_yaw={ev.residual_yaw:.6f}"
        )
    for fid, reason in skipped:
        lines.append(f"skipped frame={fid} reason={reason}")
    (out / "loop_log.txt").write_text("\n".join(lines) + "\n")

    print(
        f"map: {len(builder.state.map_cloud)} points from "
        f"{len(builder.state.poses)} frames ({len(skipped)} skipped, "
        f"{len(builder.loop_events)} loop events) -> {out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.poses:
        print("evaluate: ground-truth --poses required", file=sys.stderr)
        return 2
    out = _prepare_out(cfg)
    gt = read_poses(cfg.poses)

    if args.mode == "odometry":
        if not args.est:
            print("evaluate --mode odometry: --est trajectory required", file=sys.stderr)
            return 2
        est = read_poses(args.est)
        report = odometry_error(est, gt)
        write_odometry_report(report, out / "odometry_report.txt")
        print(
            f"odometry: average error {report.average_error:.4f} m "
            f"over {report.frame_count} frames"
        )
    else:
        if not args.map:
            print("evaluate --mode localization: --map required", file=sys.stderr)
            return 2
        if not cfg.scans:
            print("evaluate --mode localization: --scans required", file=sys.stderr)
            return 2
        map_cloud = read_cloud_ply(args.map)
        scans = read_scan_dir(cfg.scans)
        report = localization_error(map_cloud, scans, gt, cfg.icp)
        write_localization_report(report, out / "localization_report.txt")
        print(
            f"localization: xy_rmse {report.xy_rmse:.4f} m, "
            f"yaw_rmse {report.yaw_rmse:.4f} rad over {len(report.per_frame)} frames "
            f"({len(report.skipped_frames)} skipped)"
        )
    return 0


def cmd_synth(args) -> int:
    scene = load_scene(args.scene) if args.scene else demo_scene()
    if args.seed is not None:
        scene = dataclasses.replace(scene, seed=args.seed)
    data = generate_pass(scene, args.pass_name)
    write_pass(data, args.out)
    print(
        f"pass '{args.pass_name}': {len(data.scans)} scans, "
        f"{sum(len(v) for v in data.detections.values())} detections -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stillmap",
        description="Static LiDAR maps: flatten dynamic objects onto the ground, "
        "accumulate scans with ICP and loop closure, evaluate against ground truth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="pipeline config YAML")
        p.add_argument("--scans", help="directory of *.bin scans")
        p.add_argument("--poses", help="ground-truth pose file")
        p.add_argument("--detections", help="detection file (JSON lines)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--no-removal", action="store_true", help="ablation: skip dynamic removal")
        p.add_argument(
            "--fallback-detector", action="store_true",
            help="use the clustering fallback when no detections exist",
        )

    p_clean = sub.add_parser("clean", help="write cleaned per-frame scans")
    add_common(p_clean)
    p_clean.add_argument("--workers", type=int, help="parallel frame workers")
    p_clean.set_defaults(func=cmd_clean)

    p_map = sub.add_parser("build-map", help="accumulate scans into a static map")
    add_common(p_map)
    p_map.add_argument("--no-loop-closure", action="store_true")
    p_map.set_defaults(func=cmd_build_map)

    p_eval = sub.add_parser("evaluate", help="odometry or localization accuracy")
    add_common(p_eval)
    p_eval.add_argument("--mode", choices=("odometry", "localization"), required=True)
    p_eval.add_argument("--est", help="estimated trajectory (odometry mode)")
    p_eval.add_argument("--map", help="map PLY (localization mode)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--scene", help="scene spec YAML (defaults to a demo scene)")
    p_synth.add_argument(
        "--pass", dest="pass_name", choices=("first", "second"), default="first"
    )
    p_synth.add_argument("--seed", type=int, help="override the scene seed")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, MalformedFileError, ValueError) as e:
        print(f"stillmap {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
