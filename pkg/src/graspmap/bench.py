"""Benchmark harness: timed transfer + solve over scenes and repetitions.

Each scene is measured under three initial object placements (small rigid
perturbations of the scene pose, drawn deterministically from the scene
seed), and each repetition re-runs the same three placements so that a
deterministic solver produces identical values on every row while the wall
times expose machine noise. Chart, transfer and solve stages are timed
separately on a monotonic clock.
"""

import csv
import io

import numpy as np
from scipy.spatial.transform import Rotation

from .scene import load_scene, run_transfer, solve_scene

PLACEMENTS = 3
ROTATION_SCALE = 0.05
TRANSLATION_FRACTION = 0.02

COLUMNS = ("scene", "rep", "seed", "chart_seconds", "transfer_seconds",
           "solve_seconds", "calls", "final_value")


def perturb_pose(pose, rng, scale):
    """Small rigid perturbation of a 4x4 pose."""
    delta = np.eye(4)
    delta[:3, :3] = Rotation.from_rotvec(
        rng.normal(size=3) * ROTATION_SCALE).as_matrix()
    delta[:3, 3] = rng.normal(size=3) * TRANSLATION_FRACTION * scale
    return delta @ pose


def scene_placements(scene, seed=None):
    """The scene's three benchmark placements, fixed by its seed."""
    rng = np.random.default_rng(scene.seed if seed is None else seed)
    mesh = scene.load_object()
    scale = float(np.linalg.norm(mesh.vertices.max(axis=0)
                                 - mesh.vertices.min(axis=0)))
    return [perturb_pose(scene.object_pose, rng, scale)
            for _ in range(PLACEMENTS)]


def bench_scenes(scene_paths, reps=1, seed=None, backend=None):
    """Run the benchmark; returns a report dict with one row per rep."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    for path in scene_paths:
        scene = load_scene(path)
        base_seed = scene.seed if seed is None else int(seed)
        placements = scene_placements(scene, seed=seed)
        correspondences, timings = run_transfer(scene)
        for rep in range(reps):
            solve_seconds = []
            calls = []
            values = []
            for pose in placements:
                scene.object_pose = pose
                _, result = solve_scene(scene, correspondences,
                                        backend=backend)
                solve_seconds.append(result["solve_seconds"])
                calls.append(result["calls"])
                values.append(result["best_value"])
            rows.append({
                "scene": scene.name,
                "rep": rep,
                "seed": base_seed + rep,
                "chart_seconds": timings["chart_seconds"],
                "transfer_seconds": timings["transfer_seconds"],
                "solve_seconds": float(np.mean(solve_seconds)),
                "calls": float(np.mean(calls)),
                "final_value": float(np.mean(values)),
            })
    return {"version": 1, "placements": PLACEMENTS, "rows": rows}


def format_table(report):
    """Fixed-width text table, one line per row; header only when empty."""
    widths = {c: len(c) for c in COLUMNS}
    printed = []
    for row in report["rows"]:
        line = {}
        for c in COLUMNS:
            v = row[c]
            line[c] = f"{v:.6g}" if isinstance(v, float) else str(v)
            widths[c] = max(widths[c], len(line[c]))
        printed.append(line)
    header = "  ".join(c.ljust(widths[c]) for c in COLUMNS)
    rule = "  ".join("-" * widths[c] for c in COLUMNS)
    lines = [header, rule]
    for line in printed:
        lines.append("  ".join(line[c].ljust(widths[c]) for c in COLUMNS))
    return "\n".join(lines)


def format_csv(report):
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=COLUMNS)
    writer.writeheader()
    for row in report["rows"]:
        writer.writerow({c: row[c] for c in COLUMNS})
    return out.getvalue()
