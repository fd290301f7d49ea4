"""Local WebSocket service exposing one scene session to a UI client.

The protocol is JSON text frames, one message per frame, each carrying a
``type`` and schema version ``v``. Requests: ``scene`` (snapshot fetch),
``pick`` (re-root a patch from a clicked vertex pair), ``transfer``,
``solve`` (one optimization call, optionally with a ``prior_override``
pose), ``pose`` (clamp + forward kinematics echo for slider edits) and
``history``. During a solve the service streams ``progress`` frames every
``PROGRESS_EVERY`` iterations. A malformed message produces one ``error``
reply and leaves the session untouched.

Frames are strict JSON so any client library can parse them: unbounded
joint limits and the best value of a call that failed before producing
one are sent as ``null`` rather than Python's ``Infinity`` literal.

The solver runs on the connection's handler thread; the session is shared
across connections behind a single lock, so concurrent requests serialize
rather than interleave.
"""

import json
import threading
import time

import numpy as np
from websockets.sync.server import serve as ws_serve

from .scene import SceneError, build_problem, make_session, run_transfer
from .solver import SolverError

PROTOCOL_VERSION = 1
PROGRESS_EVERY = 10


class ServiceError(ValueError):
    """Malformed or unserviceable client message."""


def _mesh_payload(mesh):
    return {
        "n_vertices": mesh.n_vertices,
        "n_faces": len(mesh.faces),
        "vertices": [[float(x) for x in v] for v in mesh.vertices],
        "faces": [[int(i) for i in f] for f in mesh.faces],
    }


def _matrix(m):
    return [[float(x) for x in row] for row in np.asarray(m)]


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _record_payload(record):
    data = record.to_json_dict()
    data["best_value"] = _finite_or_none(data["best_value"])
    return data


def _tangent_direction(mesh, root, toward):
    n = mesh.n_vertices
    if not (0 <= root < n and 0 <= toward < n):
        raise ServiceError(f"pick vertex out of range (mesh has {n})")
    vec = mesh.vertices[toward] - mesh.vertices[root]
    normal = mesh.vertex_normals[root]
    vec = vec - np.dot(vec, normal) * normal
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ServiceError(
            "picked direction vanishes in the root tangent plane")
    return vec / norm


class ServiceSession:
    """One scene plus its solver state behind a lock."""

    def __init__(self, scene, backend=None):
        self.scene = scene
        self.backend = backend or scene.optimizer.backend
        self.lock = threading.Lock()
        self.correspondences = None
        self.timings = None
        self.problem = None
        self.session = None
        self.results = []

    # ------------------------------------------------------------------
    # request handlers (lock held)

    def snapshot(self):
        scene = self.scene
        hand = scene.load_hand()
        rest = hand.forward_kinematics(hand.theta_rest)
        dof_names = ["root_tx", "root_ty", "root_tz",
                     "root_wx", "root_wy", "root_wz"]
        by_dof = {j.dof_index: j.name for j in hand.joints
                  if j.dof_index >= 0}
        dof_names += [by_dof[i] for i in range(6, hand.n_dofs)]
        return {
            "type": "scene",
            "name": scene.name,
            "seed": scene.seed,
            "backend": self.backend,
            "object": dict(_mesh_payload(scene.load_object()),
                           pose=_matrix(scene.object_pose)),
            "skin": _mesh_payload(scene.load_skin()),
            "hand": {
                "name": hand.name,
                "n_dofs": hand.n_dofs,
                "dof_names": dof_names,
                "theta_rest": [float(x) for x in hand.theta_rest],
                "theta_lower": [_finite_or_none(x) for x in hand.theta_lower],
                "theta_upper": [_finite_or_none(x) for x in hand.theta_upper],
                "links": [
                    {"name": link.name,
                     "rest_transform": _matrix(rest[i]),
                     **(_mesh_payload(link.mesh) if link.mesh is not None
                        else {"n_vertices": 0, "n_faces": 0,
                              "vertices": [], "faces": []})}
                    for i, link in enumerate(hand.links)
                ],
            },
            "patches": [p.to_json_dict() for p in scene.patches],
            "optimizer": scene.optimizer.to_json_dict(),
        }

    def pick(self, payload):
        label = payload.get("patch")
        patch = next((p for p in self.scene.patches if p.label == label),
                     None)
        if patch is None:
            known = [p.label for p in self.scene.patches]
            raise ServiceError(f"unknown patch {label!r}; scene has {known}")
        end = payload.get("end")
        if end not in ("object", "skin"):
            raise ServiceError("pick end must be 'object' or 'skin'")
        try:
            root = int(payload["root"])
            toward = int(payload["toward"])
        except (KeyError, TypeError, ValueError):
            raise ServiceError(
                "pick needs integer 'root' and 'toward' vertex ids") from None
        mesh = (self.scene.load_object() if end == "object"
                else self.scene.load_skin())
        direction = _tangent_direction(mesh, root, toward)
        if end == "object":
            patch.root = root
            patch.object_dir = [float(x) for x in direction]
        else:
            patch.skin_root = root
            patch.skin_dir = [float(x) for x in direction]
        # roots moved: stored pairs and the session objective are stale
        self.correspondences = None
        self.problem = None
        self.session = None
        self.results = []
        return {"type": "pick", "patch": label, "end": end, "root": root,
                "direction": [float(x) for x in direction]}

    def transfer(self):
        self.correspondences, self.timings = run_transfer(self.scene)
        self.problem = None
        self.session = None
        return {
            "type": "transfer",
            "patches": {label: corr.to_json_dict()
                        for label, corr in self.correspondences.items()},
            "timings": dict(self.timings),
        }

    def _ensure_session(self):
        if self.correspondences is None:
            self.correspondences, self.timings = run_transfer(self.scene)
        if self.session is None:
            self.problem = build_problem(self.scene, self.correspondences)
            self.session = make_session(self.scene, self.problem,
                                        backend=self.backend)

    def solve(self, payload, emit):
        self._ensure_session()
        n_dofs = self.scene.load_hand().n_dofs
        prior = payload.get("prior_override")
        if prior is not None:
            prior = np.asarray(prior, dtype=np.float64)
            if prior.shape != (n_dofs,):
                raise ServiceError(
                    f"prior_override needs {n_dofs} values, "
                    f"got {prior.shape}")
        cap = payload.get("iteration_cap")
        if cap is not None:
            cap = int(cap)
            if cap < 1:
                raise ServiceError("iteration_cap must be >= 1")

        call_index = len(self.session.history)
        seen = {"count": 0}

        def progress(iteration, value, theta):
            seen["count"] += 1
            if seen["count"] % PROGRESS_EVERY == 0:
                emit({"type": "progress", "call": call_index,
                      "iteration": int(iteration), "value": float(value),
                      "theta": [float(x) for x in theta]})

        t0 = time.monotonic()
        record = self.session.solve_call(prior_override=prior,
                                         progress=progress,
                                         iteration_cap=cap)
        wall = time.monotonic() - t0
        theta = self.session.theta_star
        result = {
            "type": "result",
            "call": record.call_index,
            "backend": self.session.backend,
            "best_value": float(self.session.best_value),
            "theta_star": [float(x) for x in theta],
            "terms": {k: float(v) for k, v
                      in self.problem.term_breakdown(theta).items()},
            "mean_contact_distance": float(
                np.mean(self.problem.contact_distances(theta))),
            "record": _record_payload(record),
            "solve_seconds": wall,
        }
        self.results.append(result)
        return result

    def pose(self, payload):
        hand = self.scene.load_hand()
        try:
            theta = np.asarray(payload["theta"], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise ServiceError("pose needs a 'theta' array") from None
        if theta.shape != (hand.n_dofs,):
            raise ServiceError(
                f"pose needs {hand.n_dofs} values, got {theta.shape}")
        theta = np.clip(theta, hand.theta_lower, hand.theta_upper)
        transforms = hand.forward_kinematics(theta)
        return {"type": "pose", "theta": [float(x) for x in theta],
                "links": [_matrix(t) for t in transforms]}

    def history(self):
        session = self.session
        return {
            "type": "history",
            "backend": self.backend,
            "calls": ([] if session is None
                      else [_record_payload(r) for r in session.history]),
            "best_value": (None if session is None
                           or not np.isfinite(session.best_value)
                           else float(session.best_value)),
            "theta_star": (None if session is None
                           or session.theta_star is None
                           else [float(x) for x in session.theta_star]),
            "results": list(self.results),
        }

    # ------------------------------------------------------------------

    def handle(self, payload, emit):
        """Dispatch one parsed message; returns the final reply dict."""
        if not isinstance(payload, dict):
            raise ServiceError("message must be a JSON object")
        version = payload.get("v", PROTOCOL_VERSION)
        if version != PROTOCOL_VERSION:
            raise ServiceError(
                f"unsupported protocol version {version!r} "
                f"(this service speaks {PROTOCOL_VERSION})")
        kind = payload.get("type")
        with self.lock:
            if kind == "scene":
                return self.snapshot()
            if kind == "pick":
                return self.pick(payload)
            if kind == "transfer":
                return self.transfer()
            if kind == "solve":
                return self.solve(payload, emit)
            if kind == "pose":
                return self.pose(payload)
            if kind == "history":
                return self.history()
        raise ServiceError(f"unknown message type {kind!r}")


def _connection_handler(session):
    def handler(ws):
        def emit(message):
            message["v"] = PROTOCOL_VERSION
            # allow_nan=False keeps the wire strict JSON; a frame that
            # still carries a non-finite float fails here and surfaces
            # as an error reply instead of an unparseable message
            ws.send(json.dumps(message, allow_nan=False))

        for raw in ws:
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                emit({"type": "error", "error": f"not valid JSON: {exc}",
                      "in_reply_to": None})
                continue
            kind = payload.get("type") if isinstance(payload, dict) else None
            try:
                emit(session.handle(payload, emit))
            except (ServiceError, SceneError, SolverError, ValueError) as exc:
                emit({"type": "error", "error": str(exc),
                      "in_reply_to": kind})
    return handler


def start_service(scene, host="127.0.0.1", port=0, backend=None):
    """Bind and start serving on a daemon thread.

    Returns ``(server, port, session)``; ``port`` is the actual bound port
    (useful with port 0). Stop with ``server.shutdown()``.
    """
    session = ServiceSession(scene, backend=backend)
    server = ws_serve(_connection_handler(session), host, port)
    bound = server.socket.getsockname()[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, bound, session


def serve(scene, host="127.0.0.1", port=8765, backend=None):
    """Serve one scene until interrupted (the CLI entry point)."""
    session = ServiceSession(scene, backend=backend)
    with ws_serve(_connection_handler(session), host, port) as server:
        actual = server.socket.getsockname()[1]
        print(f"serving scene {scene.name!r} on ws://{host}:{actual}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
