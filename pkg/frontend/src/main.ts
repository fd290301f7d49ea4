/**
 * Browser entry point: one render loop, one ordered event queue.
 *
 * Pointer and widget events enqueue thunks; the animation frame drains
 * the queue in arrival order, then repaints the 3D view and the plot.
 * Service replies also land on the queue, so every state change the
 * user can observe happens in a single serialized stream.
 */

import { ServiceClient, type WsLike } from "./client.js";
import {
  pickVertex, tangentToward, transformPoints, vertexNormals,
  type Face, type Vec3,
} from "./picking.js";
import { drawPlot } from "./plot.js";
import type { SceneFrame } from "./protocol.js";
import { ViewState, type PickMode } from "./viewState.js";
import { SceneViewer } from "./viewer.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("view");
const plotCanvas = byId<HTMLCanvasElement>("plot");
const statusLine = byId<HTMLElement>("status");
const valueLine = byId<HTMLElement>("value");
const thetaLine = byId<HTMLElement>("theta");
const sliderBox = byId<HTMLElement>("sliders");
const patchSelect = byId<HTMLSelectElement>("patch");
const urlInput = byId<HTMLInputElement>("url");

const state = new ViewState();
const viewer = new SceneViewer(canvas);
const queue: Array<() => void> = [];
let client: ServiceClient | null = null;
let solving = false;
let echoDirty = false;
let echoInFlight = false;
let plotDirty = false;

// posed copies of the pickable meshes, rebuilt per scene snapshot
let objectVerts: Vec3[] = [];
let objectNormals: Vec3[] = [];
let objectFaces: Face[] = [];
let skinVerts: Vec3[] = [];
let skinNormals: Vec3[] = [];
let skinFaces: Face[] = [];

function enqueue(fn: () => void): void {
  queue.push(fn);
}

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function fail(err: unknown): void {
  enqueue(() => setStatus(err instanceof Error ? err.message : String(err)));
}

function cacheSceneMeshes(frame: SceneFrame): void {
  objectVerts = transformPoints(frame.object.vertices, frame.object.pose);
  objectFaces = frame.object.faces;
  objectNormals = vertexNormals(objectVerts, objectFaces);
  skinVerts = frame.skin.vertices;
  skinFaces = frame.skin.faces;
  skinNormals = vertexNormals(skinVerts, skinFaces);
}

function buildSliders(frame: SceneFrame): void {
  sliderBox.replaceChildren();
  frame.hand.dof_names.forEach((name, i) => {
    const rest = frame.hand.theta_rest[i]!;
    // unbounded DOFs still need a finite slider span to be usable
    const lo = frame.hand.theta_lower[i] ?? rest - 0.5;
    const hi = frame.hand.theta_upper[i] ?? rest + 0.5;
    const row = document.createElement("label");
    row.className = "dof";
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = String((hi - lo) / 400 || 1e-3);
    slider.value = String(frame.hand.theta_rest[i]!);
    slider.addEventListener("input", () => {
      const raw = Number(slider.value);
      enqueue(() => {
        const { value, clamped } = state.setDof(i, raw);
        slider.value = String(value);
        row.classList.toggle("clamped", clamped);
        echoDirty = true;
      });
    });
    const text = document.createElement("span");
    text.textContent = name;
    row.append(text, slider);
    sliderBox.append(row);
  });
}

function refreshPatchSelect(frame: SceneFrame): void {
  patchSelect.replaceChildren();
  for (const patch of frame.patches) {
    const option = document.createElement("option");
    option.value = patch.label;
    option.textContent = patch.label;
    patchSelect.append(option);
  }
  if (state.activePatch) patchSelect.value = state.activePatch;
}

function showScene(frame: SceneFrame): void {
  state.loadScene(frame);
  viewer.loadScene(frame);
  cacheSceneMeshes(frame);
  buildSliders(frame);
  refreshPatchSelect(frame);
  for (const patch of frame.patches) {
    viewer.setMarker(`object:${patch.label}`,
      objectVerts[patch.root] ?? [0, 0, 0], 0xff7043);
    viewer.setMarker(`skin:${patch.label}`,
      skinVerts[patch.skin_root] ?? [0, 0, 0], 0x29b6f6);
  }
  setStatus(`scene ${frame.name}: ${frame.patches.length} patches, `
    + `${frame.hand.n_dofs} DOFs`);
}

function showTheta(): void {
  const theta = state.displayedTheta;
  thetaLine.textContent = theta
    ? theta.map((x) => x.toFixed(4)).join("  ")
    : "";
}

async function refreshScene(): Promise<void> {
  if (!client) return;
  const frame = await client.scene();
  enqueue(() => showScene(frame));
}

function connect(): void {
  const url = urlInput.value;
  client = new ServiceClient(
    () => new WebSocket(url) as unknown as WsLike,
    {
      onResync: (history) => enqueue(() => {
        state.applyHistory(history);
        plotDirty = true;
        setStatus("reconnected; history replayed");
      }),
    });
  client.connect()
    .then(() => refreshScene())
    .catch(fail);
}

function handlePickClick(ray: { origin: Vec3; direction: Vec3 }): void {
  const pending = state.pendingPick;
  const end = pending ? pending.end
    : state.mode === "object-root" ? "object" : "skin";
  const verts = end === "object" ? objectVerts : skinVerts;
  const faces = end === "object" ? objectFaces : skinFaces;
  const hit = pickVertex(ray.origin, ray.direction, verts, faces);
  if (!hit) return; // clicked past the mesh: no-op

  if (!pending) {
    state.pendingPick = { end, root: hit.vertex };
    state.mode = "tangent";
    viewer.setMarker("pending", verts[hit.vertex]!, 0xffee58);
    setStatus(`${end} root ${hit.vertex}; click a tangent vertex`);
    return;
  }

  const normals = end === "object" ? objectNormals : skinNormals;
  const preview = tangentToward(verts, normals, pending.root, hit.vertex);
  if (!preview) {
    setStatus("tangent click sits on the root normal; pick another vertex");
    return;
  }
  viewer.setArrow("pending-dir", verts[pending.root]!, preview, 0xffee58);
  const patch = state.activePatch;
  if (!patch || !client) return;
  state.pendingPick = null;
  state.mode = end === "object" ? "object-root" : "skin-root";
  client.pick(patch, end, pending.root, hit.vertex)
    .then((reply) => {
      enqueue(() => setStatus(
        `patch ${reply.patch} ${reply.end} root ${reply.root}, `
        + `direction ${reply.direction.map((x) => x.toFixed(3)).join(", ")}`));
      return refreshScene();
    })
    .catch(fail);
}

function runSolve(): void {
  if (!client || solving) return;
  solving = true;
  const override = state.takeOverride();
  setStatus(override ? "solving from edited pose" : "solving");
  client.solve(
    { priorOverride: override },
    (progress) => enqueue(() => {
      state.applyProgress(progress);
      plotDirty = true;
      valueLine.textContent = `call ${progress.call} `
        + `iter ${progress.iteration}: ${progress.value}`;
    }))
    .then((result) => enqueue(() => {
      solving = false;
      state.applyResult(result);
      plotDirty = true;
      echoDirty = true;
      valueLine.textContent = `best ${result.best_value}`;
      setStatus(`call ${result.call} done in `
        + `${result.solve_seconds.toFixed(2)} s, mean contact distance `
        + `${result.mean_contact_distance.toExponential(3)}`);
    }))
    .catch((err) => {
      solving = false;
      fail(err);
    });
}

function pumpPoseEcho(): void {
  if (!echoDirty || echoInFlight || solving || !client) return;
  const theta = state.pendingEdit() ?? state.displayedTheta;
  if (!theta) return;
  echoDirty = false;
  echoInFlight = true;
  client.pose(theta)
    .then((pose) => enqueue(() => {
      echoInFlight = false;
      state.applyPose(pose);
      viewer.applyPose(pose.links);
    }))
    .catch((err) => {
      echoInFlight = false;
      fail(err);
    });
}

function wireButtons(): void {
  byId<HTMLButtonElement>("connect").addEventListener("click",
    () => enqueue(connect));
  byId<HTMLButtonElement>("transfer").addEventListener("click", () => {
    if (!client) return;
    client.transfer()
      .then((frame) => enqueue(() => {
        const labels = Object.keys(frame.patches);
        const counts = labels.map(
          (l) => `${l}: ${frame.patches[l]!.pairs.length} pairs`);
        setStatus(`transfer done (${counts.join("; ")})`);
      }))
      .catch(fail);
  });
  byId<HTMLButtonElement>("solve").addEventListener("click",
    () => enqueue(runSolve));
  byId<HTMLButtonElement>("historyBtn").addEventListener("click", () => {
    if (!client) return;
    client.history()
      .then((frame) => enqueue(() => {
        state.applyHistory(frame);
        plotDirty = true;
        setStatus(`history: ${frame.calls.length} calls, best `
          + `${frame.best_value ?? "none"}`);
      }))
      .catch(fail);
  });
  for (const mode of ["object-root", "skin-root", "tangent",
    "pose-edit"] as PickMode[]) {
    byId<HTMLButtonElement>(`mode-${mode}`).addEventListener("click",
      () => enqueue(() => {
        state.mode = mode;
        state.pendingPick = null;
        setStatus(`mode: ${mode}`);
      }));
  }
  patchSelect.addEventListener("change", () => enqueue(() => {
    state.activePatch = patchSelect.value;
  }));
}

function wirePointer(): void {
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  let moved = false;

  canvas.addEventListener("pointerdown", (event) => {
    dragging = true;
    moved = false;
    lastX = event.clientX;
    lastY = event.clientY;
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    const dx = event.clientX - lastX;
    const dy = event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    if (Math.abs(dx) + Math.abs(dy) > 1) moved = true;
    enqueue(() => {
      if (state.mode === "pose-edit") {
        // screen-x drags the root along palm x, screen-y along palm y
        state.dragRoot([dx * 0.002, -dy * 0.002, 0]);
        echoDirty = true;
      } else {
        viewer.orbitBy(dx, dy);
      }
    });
  });
  canvas.addEventListener("pointerup", (event) => {
    dragging = false;
    if (moved || state.mode === "pose-edit") return;
    const ray = viewer.rayFromPointer(event.clientX, event.clientY);
    enqueue(() => handlePickClick(ray));
  });
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const factor = event.deltaY > 0 ? 1.1 : 0.9;
    enqueue(() => viewer.dolly(factor));
  });
}

function frame(): void {
  while (queue.length > 0) queue.shift()!();
  pumpPoseEcho();
  showTheta();
  if (plotDirty) {
    const ctx = plotCanvas.getContext("2d");
    if (ctx) drawPlot(ctx, state.plot, plotCanvas.width, plotCanvas.height);
    plotDirty = false;
  }
  viewer.render();
  requestAnimationFrame(frame);
}

wireButtons();
wirePointer();
requestAnimationFrame(frame);
setStatus("enter the service URL and connect");
