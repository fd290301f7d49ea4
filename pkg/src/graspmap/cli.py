"""Command line workflows: transfer, solve, animate, bench, serve.

Exit codes: 0 on success, 1 when a solve fails or misses its value
threshold, 2 for input errors (unreadable files, bad references, schema
violations). Relative --config paths that do not exist in the working
directory are retried against the directory named by GRASPMAP_CONFIG_DIR.
"""

import argparse
import json
import os
import sys

import numpy as np

from .hand import HandError
from .logmap import LogmapError
from .mesh import MeshError
from .objective import ObjectiveError
from .patch import PatchError
from .scene import (
    SceneError,
    load_correspondence,
    load_scene,
    run_transfer,
    save_correspondence,
    save_results,
    solve_scene,
)
from .sequence import (
    ManipulationTrack,
    SequenceError,
    export_animation,
    solve_track,
)
from .solver import SolverError, available_backends
from .transfer import TransferError

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_INPUT_ERROR = 2

CONFIG_DIR_ENV = "GRASPMAP_CONFIG_DIR"

INPUT_ERRORS = (SceneError, MeshError, HandError, PatchError, LogmapError,
                TransferError, SequenceError, ObjectiveError,
                FileNotFoundError)


def resolve_config(path):
    """Leave resolvable or absolute paths alone, else try the config dir."""
    if os.path.isabs(path) or os.path.exists(path):
        return path
    root = os.environ.get(CONFIG_DIR_ENV)
    if root:
        candidate = os.path.join(root, path)
        if os.path.exists(candidate):
            return candidate
    return path


def _default_output(config_path, suffix):
    stem = config_path[:-5] if config_path.endswith(".json") else config_path
    return stem + suffix


def _load_scene_with_seed(args):
    scene = load_scene(resolve_config(args.config))
    if args.seed is not None:
        scene.seed = args.seed
    return scene


def cmd_transfer(args):
    scene = _load_scene_with_seed(args)
    correspondences, timings = run_transfer(scene)
    out = args.output or _default_output(resolve_config(args.config),
                                         ".correspondence.json")
    save_correspondence(correspondences, out, timings=timings,
                        scene_name=scene.name)
    total = sum(len(c) for c in correspondences.values())
    unreachable = sum(int((~c.reachable).sum())
                      for c in correspondences.values())
    print(f"{scene.name}: {total} pairs ({unreachable} unreachable), "
          f"chart {timings['chart_seconds']:.3f}s, "
          f"transfer {timings['transfer_seconds']:.3f}s -> {out}")
    return EXIT_OK


def cmd_solve(args):
    scene = _load_scene_with_seed(args)
    corr_path = args.correspondence or _default_output(
        resolve_config(args.config), ".correspondence.json")
    correspondences = load_correspondence(resolve_config(corr_path))
    backends = args.backend or [scene.optimizer.backend]
    records = []
    missed = False
    for backend in backends:
        _, result = solve_scene(scene, correspondences, backend=backend,
                                max_calls=args.max_calls,
                                value_threshold=args.threshold)
        records.append(result)
        threshold = result["value_threshold"]
        if threshold is not None and result["best_value"] > threshold:
            missed = True
        print(f"{scene.name} [{backend}]: value {result['best_value']:.6g} "
              f"in {result['calls']} calls / {result['iterations']} "
              f"iterations, {result['solve_seconds']:.3f}s")
    out = args.output or _default_output(resolve_config(args.config),
                                         ".result.json")
    save_results(records, out, scene_name=scene.name)
    print(f"wrote {out}")
    return EXIT_NOT_CONVERGED if missed else EXIT_OK


def load_track_file(path):
    """Track file: a scene reference plus per-frame object poses."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneError(f"track file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON ({exc})") from None
    if data.get("version") != 1:
        raise SceneError(f"{path}: unsupported track file version")
    try:
        scene_ref = data["scene"]
        poses = [np.asarray(frame["pose"], dtype=np.float64)
                 for frame in data["frames"]]
    except (KeyError, TypeError) as exc:
        raise SceneError(f"{path}: missing track field {exc}") from None
    if not poses:
        raise SceneError(f"{path}: track needs at least one frame")
    base = os.path.dirname(os.path.abspath(path))
    if not os.path.isabs(scene_ref):
        scene_ref = os.path.join(base, scene_ref)
    return scene_ref, poses


def cmd_animate(args):
    config = resolve_config(args.config)
    scene_ref, poses = load_track_file(config)
    scene = load_scene(scene_ref)
    if args.seed is not None:
        scene.seed = args.seed
    corr_path = args.correspondence or _default_output(
        scene_ref, ".correspondence.json")
    correspondences = load_correspondence(resolve_config(corr_path))

    windows = {label: (0, len(poses) - 1) for label in correspondences}
    track = ManipulationTrack(poses, [dict(correspondences)
                                      for _ in poses], windows)
    cfg = scene.optimizer
    solve_track(track, scene.load_hand(), scene.binding(),
                scene.load_object(),
                backend=(args.backend[0] if args.backend else cfg.backend),
                problem_kwargs={"lambda_d": cfg.lambda_d,
                                "lambda_n": cfg.lambda_n,
                                "lambda_p": cfg.lambda_p},
                session_kwargs={"rel_tol": cfg.rel_tol,
                                "rel_window": cfg.rel_window,
                                "step_tol": cfg.step_tol})
    out = args.output or _default_output(config, ".animation.json")
    payload = {
        "version": 1,
        "scene": scene.name,
        "track": track.to_json_dict(),
        "animation": export_animation(track, scene.load_hand()),
    }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    failed = [t for t, err in enumerate(track.errors) if err is not None]
    solved = track.n_frames - len(failed)
    print(f"{scene.name}: solved {solved}/{track.n_frames} frames, "
          f"{track.total_iterations()} iterations -> {out}")
    if failed:
        print(f"failed frames: {failed}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_bench(args):
    from .bench import bench_scenes, format_csv, format_table

    paths = [resolve_config(p) for p in args.config]
    report = bench_scenes(paths, reps=args.reps, seed=args.seed,
                          backend=args.backend[0] if args.backend else None)
    text = format_table(report)
    print(text)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(format_csv(report))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def cmd_serve(args):
    from .service import serve

    scene = _load_scene_with_seed(args)
    backend = args.backend[0] if args.backend else None
    serve(scene, host=args.host, port=args.port, backend=backend)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graspmap",
        description="Contact patch transfer and grasp pose workflows.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_list=False):
        if config_list:
            p.add_argument("--config", nargs="*", default=[],
                           help="scene files to benchmark")
        else:
            p.add_argument("--config", required=True,
                           help="scene (or track) file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scene seed")
        p.add_argument("--backend", action="append",
                       choices=available_backends(), default=None,
                       help="solver backend (repeatable for solve)")

    p = sub.add_parser("transfer", help="chart both surfaces and map patches")
    common(p)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_transfer)

    p = sub.add_parser("solve", help="optimize the hand pose for a scene")
    common(p)
    p.add_argument("--correspondence", default=None)
    p.add_argument("--max-calls", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("animate", help="solve a tracked object trajectory")
    common(p)
    p.add_argument("--correspondence", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_animate)

    p = sub.add_parser("bench", help="timed transfer + solve over scenes")
    common(p, config_list=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--csv", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("serve", help="expose a scene session over WebSocket")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SolverError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
