"""Grasp sequences: interpolate patch targets between an initial and a
final grasp, then solve every frame with warm starts.

A :class:`ManipulationTrack` holds N ordered frames, each with an object
pose and the set of patch correspondences active at that frame. Patches
present at both endpoint grasps move by linear interpolation of their
skin targets in log-map chart coordinates, re-snapped to skin vertices
per frame; patches present at only one end are active for only that
end's half of the track. Solving walks the frames in order, seeding each
frame's start pose and prior with the previous frame's solution.
"""

import numpy as np

from .objective import PoseProblem
from .solver import SolveSession

DEFAULT_FRAME_ITERATION_CAP = 200


class SequenceError(ValueError):
    """Raised for malformed tracks or endpoint grasps that cannot pair."""


class ManipulationTrack:
    """Ordered frames of object pose plus active patch correspondences.

    ``frames[t]`` maps patch label to its Correspondence at frame t and
    must contain exactly the labels whose activity window covers t.
    Solved poses, per-frame call records and per-frame errors start empty
    and are filled in by :func:`solve_track`.
    """

    def __init__(self, object_poses, frames, windows):
        self.object_poses = np.asarray(object_poses, dtype=np.float64)
        if self.object_poses.ndim != 3 or self.object_poses.shape[1:] != (
                4, 4):
            raise SequenceError("object poses must be an (N, 4, 4) array")
        self.n_frames = len(self.object_poses)
        if self.n_frames < 1:
            raise SequenceError("a track needs at least one frame")
        if len(frames) != self.n_frames:
            raise SequenceError(
                f"{len(frames)} correspondence frames for "
                f"{self.n_frames} poses"
            )
        self.frames = [dict(f) for f in frames]
        self.windows = {}
        for label, (on, off) in windows.items():
            on = int(on)
            off = int(off)
            if not (0 <= on <= off <= self.n_frames - 1):
                raise SequenceError(
                    f"patch {label!r} window [{on}, {off}] outside frames "
                    f"0..{self.n_frames - 1}"
                )
            self.windows[label] = (on, off)
        for t, frame in enumerate(self.frames):
            expected = {label for label, (on, off) in self.windows.items()
                        if on <= t <= off}
            if set(frame) != expected:
                raise SequenceError(
                    f"frame {t} carries patches {sorted(frame)} but the "
                    f"windows say {sorted(expected)}"
                )
        self.thetas = [None] * self.n_frames
        self.records = [None] * self.n_frames
        self.errors = [None] * self.n_frames

    def active_labels(self, t):
        return sorted(self.frames[t])

    def pairs_at(self, t):
        """Reachable (object vertex, skin vertex) pairs active at frame t."""
        pairs = []
        for label in self.active_labels(t):
            pairs.extend(self.frames[t][label].reachable_pairs())
        return pairs

    def total_iterations(self):
        return sum(r.iterations for recs in self.records if recs
                   for r in recs)

    def to_json_dict(self):
        return {
            "version": 1,
            "frame_count": self.n_frames,
            "windows": {label: [on, off]
                        for label, (on, off) in sorted(self.windows.items())},
            "thetas": [None if th is None else [float(x) for x in th]
                       for th in self.thetas],
            "errors": list(self.errors),
            "iterations": [None if recs is None
                           else sum(r.iterations for r in recs)
                           for recs in self.records],
        }


def _snap_to_chart(chart, target):
    """Nearest valid chart vertex to a chart-plane point, ties lowest id."""
    pts = chart.plane_points()
    candidates = np.flatnonzero(chart.valid)
    d2 = np.sum((pts[candidates] - target) ** 2, axis=1)
    best = candidates[int(np.argmin(d2))]
    return int(best), float(np.sqrt(d2.min()))


def _aligned_pairs(label, first, second):
    """Pair indices usable at both ends, validating object-side alignment."""
    if len(first.pairs) != len(second.pairs):
        raise SequenceError(
            f"patch {label!r}: endpoint grasps have {len(first.pairs)} vs "
            f"{len(second.pairs)} pairs; they must come from the same patch"
        )
    keep = []
    for i, ((a0, _), (a1, _)) in enumerate(zip(first.pairs, second.pairs)):
        if a0 != a1:
            raise SequenceError(
                f"patch {label!r}: pair {i} targets object vertex {a0} "
                f"initially but {a1} finally; endpoint pairs must align"
            )
        if first.reachable[i] and second.reachable[i]:
            keep.append(i)
    if not keep:
        raise SequenceError(
            f"patch {label!r}: no pair is reachable at both endpoint grasps"
        )
    return keep


def interpolate_patches(initial, final, n_frames, skin_charts,
                        switch_frames=None):
    """Per-frame correspondence sets between two endpoint grasps.

    ``initial`` and ``final`` map patch labels to Correspondences. For
    labels present at both ends, each pair's skin target moves linearly
    in the chart plane of ``skin_charts[label]`` and is re-snapped to the
    nearest valid skin vertex per frame; the endpoint frames reuse the
    endpoint sets unchanged. Pairs unreachable at either end are dropped.
    Labels present at one end only are held fixed and get a window
    covering that end's half, switching at ``n_frames // 2`` unless
    ``switch_frames`` overrides it per label.

    Returns ``(frames, windows)`` ready for :class:`ManipulationTrack`.
    """
    if n_frames < 2:
        raise SequenceError("interpolation needs at least two frames")
    switch_frames = dict(switch_frames or {})
    labels = set(initial) | set(final)
    for label in switch_frames:
        if label not in labels:
            raise SequenceError(
                f"switch frame given for patch {label!r}, which matches "
                f"no endpoint grasp"
            )

    frames = [{} for _ in range(n_frames)]
    windows = {}
    for label in sorted(labels):
        switch = int(switch_frames.get(label, n_frames // 2))
        if not 1 <= switch <= n_frames - 1:
            raise SequenceError(
                f"patch {label!r}: switch frame {switch} must lie in "
                f"1..{n_frames - 1}"
            )
        if label not in final:
            windows[label] = (0, switch - 1)
            for t in range(0, switch):
                frames[t][label] = initial[label]
            continue
        if label not in initial:
            windows[label] = (switch, n_frames - 1)
            for t in range(switch, n_frames):
                frames[t][label] = final[label]
            continue

        first = initial[label]
        second = final[label]
        keep = _aligned_pairs(label, first, second)
        chart = skin_charts.get(label)
        if chart is None:
            raise SequenceError(f"no skin chart for patch {label!r}")
        pts = chart.plane_points()
        for i in keep:
            for corr, end in ((first, "initial"), (second, "final")):
                v = corr.pairs[i][1]
                if not chart.valid[v]:
                    raise SequenceError(
                        f"patch {label!r}: {end} skin vertex {v} is not "
                        f"covered by the interpolation chart"
                    )

        windows[label] = (0, n_frames - 1)
        frames[0][label] = first
        frames[n_frames - 1][label] = second
        start = pts[[first.pairs[i][1] for i in keep]]
        stop = pts[[second.pairs[i][1] for i in keep]]
        for t in range(1, n_frames - 1):
            s = t / (n_frames - 1)
            targets = (1.0 - s) * start + s * stop
            pairs = []
            residuals = []
            for i, target in zip(keep, targets):
                skin_v, res = _snap_to_chart(chart, target)
                pairs.append((first.pairs[i][0], skin_v))
                residuals.append(res)
            frames[t][label] = type(first)(pairs, residuals,
                                           [True] * len(pairs))
    return frames, windows


def _frame_problem(track, t, hand, binding, object_mesh, problem_kwargs):
    pairs = track.pairs_at(t)
    if not pairs:
        raise SequenceError(f"frame {t} has no active reachable pairs")
    object_ids = [a for a, _ in pairs]
    skin_ids = [b for _, b in pairs]
    pose = track.object_poses[t]
    points = object_mesh.vertices[object_ids] @ pose[:3, :3].T + pose[:3, 3]
    normals = object_mesh.vertex_normals[object_ids] @ pose[:3, :3].T
    return PoseProblem(hand, binding, points, normals, skin_ids,
                       **problem_kwargs)


def solve_track(track, hand, binding, object_mesh, backend="mma",
                frame_iteration_cap=DEFAULT_FRAME_ITERATION_CAP,
                first_frame_calls=3, first_frame_threshold=np.inf,
                warm_start=True, problem_kwargs=None, session_kwargs=None):
    """Solve every frame in order, each seeded by the previous solution.

    Frame 0 gets up to ``first_frame_calls`` full-cap calls (solved to
    acceptance); later frames get one call capped at
    ``frame_iteration_cap``, started and anchored at the last good frame's
    pose. A failing frame is recorded in ``track.errors`` and solving
    continues from the last good pose. ``warm_start=False`` restarts every
    frame cold from the rest pose, which is only useful as a baseline.
    """
    problem_kwargs = dict(problem_kwargs or {})
    session_kwargs = dict(session_kwargs or {})
    last_good = None
    for t in range(track.n_frames):
        try:
            problem = _frame_problem(track, t, hand, binding, object_mesh,
                                     problem_kwargs)
            if t == 0:
                session = SolveSession(problem, backend=backend,
                                       **session_kwargs)
                session.run_to_acceptance(first_frame_calls,
                                          first_frame_threshold)
            else:
                warm = last_good if warm_start else None
                session = SolveSession(problem, backend=backend,
                                       iteration_cap=frame_iteration_cap,
                                       warm_start=warm, **session_kwargs)
                session.solve_call()
        except Exception as exc:  # noqa: BLE001 - later frames still run
            track.errors[t] = str(exc)
            continue
        track.records[t] = list(session.history)
        track.thetas[t] = session.theta_star
        last_good = session.theta_star
    return track


def export_animation(track, hand):
    """Per-frame link and object transforms for solved frames, as JSON."""
    frames = []
    for t, theta in enumerate(track.thetas):
        if theta is None:
            continue
        transforms = hand.forward_kinematics(theta)
        frames.append({
            "frame": t,
            "theta": [float(x) for x in theta],
            "object_pose": [[float(v) for v in row]
                            for row in track.object_poses[t]],
            "links": [[[float(v) for v in row] for row in tf]
                      for tf in transforms],
        })
    return {
        "version": 1,
        "frame_count": track.n_frames,
        "link_names": [link.name for link in hand.links],
        "frames": frames,
    }
