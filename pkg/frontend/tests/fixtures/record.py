"""Record the round-trip fixture the UI tests replay.

Runs a real service on a synthetic scene and captures one scripted
exchange: snapshot, a vertex pick, a pose override, one solve call with
streamed progress, and the history. The same scene is also solved
through the file interface so the fixture carries the result file the
streamed values must match bit for bit.

The pick targets the palm patch's stored root and its straight +y
neighbour, so the recomputed tangent equals the stored direction and
the scene state is unchanged; the override equals the rest pose, which
is the default prior for the first call. Both choices make the service
exchange and the file run the same deterministic computation, which is
what lets the tests demand exact equality.

Regenerate with:  python3 tests/fixtures/record.py
"""

import json
import pathlib
import tempfile

from websockets.sync.client import connect

from graspmap import load_scene, start_service
from graspmap.scene import run_transfer, save_results, solve_scene
from graspmap.synthetic import write_synthetic_scene

HERE = pathlib.Path(__file__).resolve().parent
BACKEND = "lbfgsb"
PICK_PATCH = "palm"
PICK_ROOT = 4
PICK_TOWARD = 7


def record():
    with tempfile.TemporaryDirectory() as tmp:
        info = write_synthetic_scene(tmp)

        scene = load_scene(info["scene"])
        corrs, _ = run_transfer(scene)
        _, result = solve_scene(scene, corrs, backend=BACKEND, max_calls=1)
        result_path = pathlib.Path(tmp) / "results.json"
        save_results([result], result_path, scene_name=scene.name)
        result_file = json.loads(result_path.read_text())

        server, port, _ = start_service(load_scene(info["scene"]),
                                        backend=BACKEND)
        try:
            exchange = run_script(port)
        finally:
            server.shutdown()

    check(exchange, result_file)
    fixture = {
        "note": ("scripted exchange against a local service on the "
                 "synthetic grasp scene; regenerate with record.py"),
        "backend": BACKEND,
        "exchange": exchange,
        "result_file": result_file,
    }
    out = HERE / "roundtrip.json"
    out.write_text(json.dumps(fixture, separators=(",", ":")) + "\n")
    print(f"wrote {out} ({out.stat().st_size} bytes, "
          f"{len(exchange)} exchange entries)")


def run_script(port):
    exchange = []

    with connect(f"ws://127.0.0.1:{port}", max_size=None) as ws:

        def rpc(request):
            exchange.append({"send": request})
            ws.send(json.dumps(request))
            while True:
                frame = json.loads(ws.recv())
                exchange.append({"recv": frame})
                if frame["type"] != "progress":
                    return frame

        snapshot = rpc({"v": 1, "type": "scene"})
        theta_rest = snapshot["hand"]["theta_rest"]

        rpc({"v": 1, "type": "pick", "patch": PICK_PATCH,
             "end": "skin", "root": PICK_ROOT, "toward": PICK_TOWARD})
        rpc({"v": 1, "type": "scene"})
        rpc({"v": 1, "type": "transfer"})
        rpc({"v": 1, "type": "pose", "theta": theta_rest})
        rpc({"v": 1, "type": "solve", "prior_override": theta_rest})
        rpc({"v": 1, "type": "history"})

    return exchange


def check(exchange, result_file):
    """Fail loudly at record time if the fixture would not round-trip."""
    frames = [e["recv"] for e in exchange if "recv" in e]
    by_type = {}
    for frame in frames:
        by_type.setdefault(frame["type"], []).append(frame)

    snapshot1, snapshot2 = by_type["scene"]
    palm1 = next(p for p in snapshot1["patches"]
                 if p["label"] == PICK_PATCH)
    palm2 = next(p for p in snapshot2["patches"]
                 if p["label"] == PICK_PATCH)
    assert palm1 == palm2, "pick was not idempotent"
    assert palm1["skin_root"] == PICK_ROOT

    pick = by_type["pick"][0]
    assert pick["root"] == PICK_ROOT
    assert pick["direction"] == palm1["skin_dir"], "direction changed"

    theta_rest = snapshot1["hand"]["theta_rest"]
    pose = by_type["pose"][0]
    assert pose["theta"] == theta_rest, "rest pose should clamp to itself"

    progress = by_type["progress"]
    assert progress, "no progress frames streamed"
    assert all(f["call"] == 0 for f in progress)

    result = by_type["result"][0]
    stored = result_file["results"][0]
    assert result["best_value"] == stored["best_value"], (
        result["best_value"], stored["best_value"])
    assert result["theta_star"] == stored["theta_star"]

    history = by_type["history"][0]
    assert history["calls"][0]["theta_prior"] == theta_rest
    assert history["results"][-1]["best_value"] == result["best_value"]
    assert history["best_value"] == stored["best_value"]


if __name__ == "__main__":
    record()
