"""Scene files: meshes, hand, patches and solver settings in one place.

A scene JSON names the object mesh (with its initial pose), the hand
description, the skin mesh, the contact patches with their per-patch
transfer parameters, and the optimizer configuration. File references are
resolved relative to the scene file and must exist at load time. The
helpers here run the two batch workflows over a scene: chart + transfer
(producing a correspondence file) and correspondence + solve (producing a
pose result).
"""

import json
import os
import time

import numpy as np

from .hand import bind_skin, load_hand
from .logmap import LogmapSolver
from .meshio import load_mesh
from .objective import PoseProblem
from .patch import ContactPatch
from .solver import (
    DEFAULT_ITERATION_CAP,
    DEFAULT_REL_TOL,
    DEFAULT_REL_WINDOW,
    DEFAULT_STEP_TOL,
    SolveSession,
    available_backends,
)
from .transfer import Correspondence, TransferSpec, transfer_patch

SCENE_VERSION = 1
CORRESPONDENCE_VERSION = 1
RESULT_VERSION = 1


class SceneError(ValueError):
    """Raised for unreadable scene files, bad references or bad config."""


class ScenePatch:
    """One contact patch plus its transfer parameters."""

    def __init__(self, label, root, boundary, skin_root, object_dir,
                 skin_dir, interior=None, radius_multiplier=1.5):
        self.label = str(label)
        self.root = int(root)
        self.boundary = [int(v) for v in boundary]
        self.interior = None if interior is None else [int(v)
                                                       for v in interior]
        self.skin_root = int(skin_root)
        self.object_dir = [float(x) for x in object_dir]
        self.skin_dir = [float(x) for x in skin_dir]
        self.radius_multiplier = float(radius_multiplier)

    def to_json_dict(self):
        data = {
            "label": self.label,
            "root": self.root,
            "boundary": self.boundary,
            "skin_root": self.skin_root,
            "object_dir": self.object_dir,
            "skin_dir": self.skin_dir,
            "radius_multiplier": self.radius_multiplier,
        }
        if self.interior is not None:
            data["interior"] = self.interior
        return data

    @classmethod
    def from_json_dict(cls, data):
        return cls(data["label"], data["root"], data["boundary"],
                   data["skin_root"], data["object_dir"], data["skin_dir"],
                   interior=data.get("interior"),
                   radius_multiplier=data.get("radius_multiplier", 1.5))


class OptimizerConfig:
    """Solver and objective settings; None means the library default."""

    def __init__(self, lambda_d=None, lambda_n=None, lambda_p=None,
                 eps=None, t_scale=1.0, backend="mma",
                 iteration_cap=DEFAULT_ITERATION_CAP, max_calls=3,
                 value_threshold=None, rel_tol=DEFAULT_REL_TOL,
                 rel_window=DEFAULT_REL_WINDOW, step_tol=DEFAULT_STEP_TOL):
        for name, value in (("lambda_d", lambda_d), ("lambda_n", lambda_n),
                            ("lambda_p", lambda_p)):
            if value is not None and value < 0:
                raise SceneError(f"{name} must be nonnegative")
        if eps is not None and eps <= 0:
            raise SceneError("eps must be positive")
        if t_scale <= 0:
            raise SceneError("t_scale must be positive")
        if backend not in available_backends():
            raise SceneError(
                f"unknown backend {backend!r}; choose from "
                f"{available_backends()}"
            )
        if iteration_cap < 1 or max_calls < 1:
            raise SceneError("iteration_cap and max_calls must be >= 1")
        self.lambda_d = None if lambda_d is None else float(lambda_d)
        self.lambda_n = None if lambda_n is None else float(lambda_n)
        self.lambda_p = None if lambda_p is None else float(lambda_p)
        self.eps = None if eps is None else float(eps)
        self.t_scale = float(t_scale)
        self.backend = str(backend)
        self.iteration_cap = int(iteration_cap)
        self.max_calls = int(max_calls)
        self.value_threshold = (None if value_threshold is None
                                else float(value_threshold))
        self.rel_tol = float(rel_tol)
        self.rel_window = int(rel_window)
        self.step_tol = float(step_tol)

    def to_json_dict(self):
        return {
            "lambda_d": self.lambda_d,
            "lambda_n": self.lambda_n,
            "lambda_p": self.lambda_p,
            "eps": self.eps,
            "t_scale": self.t_scale,
            "backend": self.backend,
            "iteration_cap": self.iteration_cap,
            "max_calls": self.max_calls,
            "value_threshold": self.value_threshold,
            "rel_tol": self.rel_tol,
            "rel_window": self.rel_window,
            "step_tol": self.step_tol,
        }

    @classmethod
    def from_json_dict(cls, data):
        known = {"lambda_d", "lambda_n", "lambda_p", "eps", "t_scale",
                 "backend", "iteration_cap", "max_calls", "value_threshold",
                 "rel_tol", "rel_window", "step_tol"}
        unknown = set(data) - known
        if unknown:
            raise SceneError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**data)


class Scene:
    """Loaded scene description with lazily cached resources."""

    def __init__(self, object_mesh, hand, skin, patches, object_pose=None,
                 optimizer=None, seed=0, name="scene", base_dir="."):
        self.object_mesh = str(object_mesh)
        self.hand = str(hand)
        self.skin = str(skin)
        self.patches = list(patches)
        self.object_pose = (np.eye(4) if object_pose is None
                            else np.asarray(object_pose, dtype=np.float64))
        if self.object_pose.shape != (4, 4):
            raise SceneError("object pose must be a 4x4 transform")
        self.optimizer = optimizer or OptimizerConfig()
        self.seed = int(seed)
        self.name = str(name)
        self.base_dir = str(base_dir)
        labels = [p.label for p in self.patches]
        if len(set(labels)) != len(labels):
            raise SceneError(f"duplicate patch labels in {sorted(labels)}")
        self._cache = {}

    def resolve(self, ref):
        if os.path.isabs(ref):
            return ref
        return os.path.join(self.base_dir, ref)

    def check_files(self):
        for ref in (self.object_mesh, self.hand, self.skin):
            path = self.resolve(ref)
            if not os.path.exists(path):
                raise SceneError(f"scene file reference not found: {path}")

    def load_object(self):
        if "object" not in self._cache:
            self._cache["object"] = load_mesh(self.resolve(self.object_mesh))
        return self._cache["object"]

    def load_hand(self):
        if "hand" not in self._cache:
            self._cache["hand"] = load_hand(self.resolve(self.hand))
        return self._cache["hand"]

    def load_skin(self):
        if "skin" not in self._cache:
            self._cache["skin"] = load_mesh(self.resolve(self.skin))
        return self._cache["skin"]

    def binding(self):
        if "binding" not in self._cache:
            self._cache["binding"] = bind_skin(
                self.load_hand(), self.load_skin(), eps=self.optimizer.eps)
        return self._cache["binding"]

    def to_json_dict(self):
        return {
            "version": SCENE_VERSION,
            "name": self.name,
            "seed": self.seed,
            "object": {
                "mesh": self.object_mesh,
                "pose": [[float(v) for v in row] for row in self.object_pose],
            },
            "hand": {"urdf": self.hand},
            "skin": {"mesh": self.skin},
            "patches": [p.to_json_dict() for p in self.patches],
            "optimizer": self.optimizer.to_json_dict(),
        }


def load_scene(path):
    """Parse and validate a scene file; all file references must resolve."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneError(f"scene file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON ({exc})") from None

    try:
        version = data["version"]
        if version != SCENE_VERSION:
            raise SceneError(
                f"{path}: scene schema version {version} is not supported "
                f"(expected {SCENE_VERSION})"
            )
        scene = Scene(
            object_mesh=data["object"]["mesh"],
            object_pose=data["object"].get("pose"),
            hand=data["hand"]["urdf"],
            skin=data["skin"]["mesh"],
            patches=[ScenePatch.from_json_dict(p) for p in data["patches"]],
            optimizer=OptimizerConfig.from_json_dict(
                data.get("optimizer", {})),
            seed=data.get("seed", 0),
            name=data.get("name", os.path.basename(path)),
            base_dir=os.path.dirname(os.path.abspath(path)),
        )
    except KeyError as exc:
        raise SceneError(f"{path}: missing scene field {exc}") from None
    scene.check_files()
    return scene


def save_scene(scene, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_json_dict(), fh, indent=2)
        fh.write("\n")
    return path


def run_transfer(scene):
    """Chart both surfaces and transfer every patch.

    Returns ``(correspondences, timings)`` where correspondences maps the
    patch label to its Correspondence and timings separates chart seconds
    from matching seconds (monotonic clock).
    """
    obj = scene.load_object()
    skin = scene.load_skin()
    t0 = time.monotonic()
    object_charts = LogmapSolver(obj, t_scale=scene.optimizer.t_scale)
    skin_charts = LogmapSolver(skin, t_scale=scene.optimizer.t_scale)
    charts = {}
    for patch in scene.patches:
        charts[patch.label] = (
            object_charts.chart(patch.root, patch.object_dir),
            skin_charts.chart(patch.skin_root, patch.skin_dir),
        )
    t1 = time.monotonic()
    correspondences = {}
    for patch in scene.patches:
        contact = ContactPatch(obj, patch.root, patch.boundary,
                               ib=patch.interior, label=patch.label)
        spec = TransferSpec(patch.root, patch.skin_root, patch.object_dir,
                            patch.skin_dir,
                            radius_multiplier=patch.radius_multiplier)
        object_chart, skin_chart = charts[patch.label]
        correspondences[patch.label] = transfer_patch(
            contact, spec, object_chart, skin_chart)
    t2 = time.monotonic()
    timings = {"chart_seconds": t1 - t0, "transfer_seconds": t2 - t1}
    return correspondences, timings


def save_correspondence(correspondences, path, timings=None, scene_name=""):
    data = {
        "version": CORRESPONDENCE_VERSION,
        "scene": scene_name,
        "patches": {label: corr.to_json_dict()
                    for label, corr in correspondences.items()},
    }
    if timings is not None:
        data["timings"] = dict(timings)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return path


def load_correspondence(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneError(f"correspondence file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON ({exc})") from None
    if data.get("version") != CORRESPONDENCE_VERSION:
        raise SceneError(f"{path}: unsupported correspondence version")
    return {label: Correspondence.from_json_dict(entry)
            for label, entry in data["patches"].items()}


def scene_pairs(scene, correspondences):
    """Reachable pairs in scene patch order, skipping absent labels."""
    pairs = []
    for patch in scene.patches:
        corr = correspondences.get(patch.label)
        if corr is not None:
            pairs.extend(corr.reachable_pairs())
    return pairs


def build_problem(scene, correspondences):
    """Assemble the pose objective for a scene and its correspondences."""
    pairs = scene_pairs(scene, correspondences)
    if not pairs:
        raise SceneError("no reachable correspondence pairs in the scene")
    obj = scene.load_object()
    pose = scene.object_pose
    object_ids = [a for a, _ in pairs]
    skin_ids = [b for _, b in pairs]
    points = obj.vertices[object_ids] @ pose[:3, :3].T + pose[:3, 3]
    normals = obj.vertex_normals[object_ids] @ pose[:3, :3].T
    cfg = scene.optimizer
    return PoseProblem(scene.load_hand(), scene.binding(), points, normals,
                       skin_ids, lambda_d=cfg.lambda_d,
                       lambda_n=cfg.lambda_n, lambda_p=cfg.lambda_p)


def make_session(scene, problem, backend=None):
    cfg = scene.optimizer
    return SolveSession(problem, backend=backend or cfg.backend,
                        iteration_cap=cfg.iteration_cap,
                        rel_tol=cfg.rel_tol, rel_window=cfg.rel_window,
                        step_tol=cfg.step_tol)


def solve_scene(scene, correspondences, backend=None, max_calls=None,
                value_threshold=None, progress=None):
    """Run the call loop for one backend; returns (session, result dict)."""
    cfg = scene.optimizer
    problem = build_problem(scene, correspondences)
    session = make_session(scene, problem, backend=backend)
    if max_calls is None:
        max_calls = cfg.max_calls
    if value_threshold is None:
        value_threshold = (np.inf if cfg.value_threshold is None
                           else cfg.value_threshold)
    t0 = time.monotonic()
    session.run_to_acceptance(max_calls, value_threshold, progress=progress)
    wall = time.monotonic() - t0
    theta = session.theta_star
    result = {
        "backend": session.backend,
        "calls": session.calls,
        "iterations": sum(r.iterations for r in session.history),
        "best_value": float(session.best_value),
        "value_threshold": (None if not np.isfinite(value_threshold)
                            else float(value_threshold)),
        "converged": bool(session.history[-1].converged),
        "theta_star": [float(x) for x in theta],
        "terms": {k: float(v)
                  for k, v in problem.term_breakdown(theta).items()},
        "mean_contact_distance": float(
            np.mean(problem.contact_distances(theta))),
        "history": [r.to_json_dict() for r in session.history],
        "solve_seconds": wall,
    }
    return session, result


def save_results(results, path, scene_name=""):
    """Write one or more backend result records into a single file."""
    data = {
        "version": RESULT_VERSION,
        "scene": scene_name,
        "results": list(results),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return path
