"""Drive the WebSocket service the way an interactive viewer would.

Starts a service on an ephemeral port, fetches the scene snapshot,
re-roots a patch by picking a vertex, runs the transfer, then solves
while printing the progress stream. Every message is one JSON text
frame tagged with the protocol version.

Usage: python3 demos/service_roundtrip.py [scene_dir]
"""

import json
import sys
import tempfile

from websockets.sync.client import connect

from graspmap import load_scene, start_service
from graspmap.synthetic import write_synthetic_scene


def rpc(ws, message):
    """Send one request; return (progress frames, final reply)."""
    ws.send(json.dumps(message))
    progress = []
    while True:
        reply = json.loads(ws.recv(timeout=120))
        if reply["type"] == "progress":
            progress.append(reply)
            continue
        return progress, reply


def main():
    directory = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp()
    info = write_synthetic_scene(directory)
    scene = load_scene(info["scene"])
    server, port, _ = start_service(scene, backend="lbfgsb")
    print("service on ws://127.0.0.1:%d" % port)

    with connect("ws://127.0.0.1:%d" % port) as ws:
        _, snap = rpc(ws, {"v": 1, "type": "scene"})
        print("scene %r: %d object vertices, %d patches, %d DOFs"
              % (snap["name"], snap["object"]["n_vertices"],
                 len(snap["patches"]), snap["hand"]["n_dofs"]))

        # re-root the palm patch one vertex over, as a click would
        palm = next(p for p in snap["patches"] if p["label"] == "palm")
        _, picked = rpc(ws, {"v": 1, "type": "pick", "patch": "palm",
                             "end": "object", "root": palm["root"],
                             "toward": palm["root"] + 1})
        print("picked object vertex %d for patch %r"
              % (picked["root"], picked["patch"]))

        _, done = rpc(ws, {"v": 1, "type": "transfer"})
        for label, entry in done["patches"].items():
            print("  %s: %d pairs" % (label, len(entry["pairs"])))

        progress, result = rpc(ws, {"v": 1, "type": "solve"})
        print("solve: %d progress frames, final value %.6f, mean gap %.4f"
              % (len(progress), result["best_value"],
                 result["mean_contact_distance"]))

        _, hist = rpc(ws, {"v": 1, "type": "history"})
        print("history: %d call(s) on backend %s"
              % (len(hist["calls"]), hist["backend"]))

    server.shutdown()


if __name__ == "__main__":
    main()
