/**
 * Client-side session state. All authoritative data (scene geometry,
 * link transforms, solved poses) comes from service frames; this class
 * only tracks what the user is doing with it: the active pick mode,
 * selections, a pending pose edit, and the progress plot.
 */

import { PlotBuffer } from "./plot.js";
import type {
  HistoryFrame,
  PickEnd,
  PoseFrame,
  ProgressFrame,
  ResultFrame,
  SceneFrame,
} from "./protocol.js";

export type PickMode = "object-root" | "skin-root" | "tangent" | "pose-edit";

export interface PendingPick {
  end: PickEnd;
  root: number;
}

export interface EditResult {
  value: number;
  clamped: boolean;
}

export class ViewState {
  scene: SceneFrame | null = null;
  mode: PickMode = "object-root";
  activePatch: string | null = null;
  /** Root selection awaiting its tangent click. */
  pendingPick: PendingPick | null = null;
  readonly plot = new PlotBuffer();

  /** Link transforms as last echoed by the service (row-major 4x4s). */
  linkTransforms: number[][][] | null = null;
  /** The theta those transforms correspond to. */
  displayedTheta: number[] | null = null;

  private edit: number[] | null = null;
  private editTouched = false;

  loadScene(frame: SceneFrame): void {
    this.scene = frame;
    this.activePatch = frame.patches[0]?.label ?? null;
    this.linkTransforms = frame.hand.links.map((l) => l.rest_transform);
    this.displayedTheta = [...frame.hand.theta_rest];
    this.edit = null;
    this.editTouched = false;
  }

  private requireScene(): SceneFrame {
    if (!this.scene) throw new Error("no scene loaded");
    return this.scene;
  }

  /** Start (or continue) a pose edit from the displayed pose. */
  private editableTheta(): number[] {
    if (!this.edit) {
      const base = this.displayedTheta
        ?? this.requireScene().hand.theta_rest;
      this.edit = [...base];
    }
    return this.edit;
  }

  /**
   * Set one DOF; the stored value is clamped to the joint box and the
   * flag tells the caller to show the out-of-range cue.
   */
  setDof(index: number, value: number): EditResult {
    const hand = this.requireScene().hand;
    if (index < 0 || index >= hand.n_dofs) {
      throw new Error(`DOF index ${index} out of range`);
    }
    const lo = hand.theta_lower[index] ?? -Infinity;
    const hi = hand.theta_upper[index] ?? Infinity;
    const clamped = Math.min(Math.max(value, lo), hi);
    this.editableTheta()[index] = clamped;
    this.editTouched = true;
    return { value: clamped, clamped: clamped !== value };
  }

  /** Root drag: add a translation delta to the first three DOFs. */
  dragRoot(delta: [number, number, number]): void {
    const theta = this.editableTheta();
    for (let i = 0; i < 3; i++) {
      this.setDof(i, theta[i]! + delta[i]!);
    }
  }

  /** The pose to preview, or null when nothing was edited. */
  pendingEdit(): number[] | null {
    return this.editTouched && this.edit ? [...this.edit] : null;
  }

  /**
   * Prior override for the next solve call: the edited pose, or
   * undefined so the request omits the field and the service falls
   * back to the previous solution.
   */
  takeOverride(): number[] | undefined {
    const override = this.pendingEdit();
    this.edit = null;
    this.editTouched = false;
    return override ?? undefined;
  }

  /** Apply a service FK echo: the viewport's authoritative pose. */
  applyPose(frame: PoseFrame): void {
    this.linkTransforms = frame.links;
    this.displayedTheta = [...frame.theta];
  }

  applyProgress(frame: ProgressFrame): void {
    this.plot.appendProgress(frame);
    // theta snapshots stream faster than FK echoes can round-trip (the
    // session is busy solving), so only the numeric readout tracks them
    this.displayedTheta = [...frame.theta];
  }

  applyResult(frame: ResultFrame): void {
    this.plot.finalizeCall(frame);
    this.displayedTheta = [...frame.theta_star];
  }

  /** Rebuild plot and pose readout from history after a reconnect. */
  applyHistory(frame: HistoryFrame): void {
    this.plot.resync(frame.calls);
    if (frame.theta_star) this.displayedTheta = [...frame.theta_star];
  }
}
