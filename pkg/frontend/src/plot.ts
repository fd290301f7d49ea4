/**
 * Objective-vs-iteration plotting state.
 *
 * Streamed progress frames feed a live series for the call in flight;
 * when the result lands, the call's authoritative best-so-far trace
 * replaces it. The finished plot is therefore a pure function of the
 * session history, so a resync after a dropped connection reproduces
 * it exactly.
 */

import type {
  CallRecordPayload,
  ProgressFrame,
  ResultFrame,
} from "./protocol.js";

export interface PlotPoint {
  iteration: number;
  value: number;
}

export interface CallSeries {
  call: number;
  /** Monotone best-so-far trace from the call record. */
  best: PlotPoint[];
}

export class PlotBuffer {
  /** Finished calls, in order. */
  readonly calls: CallSeries[] = [];
  /** Raw sampled values for the call currently streaming. */
  live: PlotPoint[] = [];
  liveCall: number | null = null;

  appendProgress(frame: ProgressFrame): void {
    if (this.liveCall !== frame.call) {
      this.live = [];
      this.liveCall = frame.call;
    }
    this.live.push({ iteration: frame.iteration, value: frame.value });
  }

  /** Replace the live series with the finished call's exact trace. */
  finalizeCall(result: ResultFrame | { record: CallRecordPayload }): void {
    this.pushRecord(result.record);
    this.live = [];
    this.liveCall = null;
  }

  /** Rebuild the whole buffer from session history after a reconnect. */
  resync(records: CallRecordPayload[]): void {
    this.calls.length = 0;
    this.live = [];
    this.liveCall = null;
    for (const record of records) this.pushRecord(record);
  }

  private pushRecord(record: CallRecordPayload): void {
    this.calls.push({
      call: record.call,
      best: record.trace.map(([iteration, value]) => ({ iteration, value })),
    });
  }

  /** Last plotted best value, or null before any call finishes. */
  lastValue(): number | null {
    const series = this.calls[this.calls.length - 1];
    const point = series?.best[series.best.length - 1];
    return point ? point.value : null;
  }

  /** Concatenated best-so-far overlay across calls; never increases. */
  bestOverlay(): PlotPoint[] {
    const out: PlotPoint[] = [];
    let best = Infinity;
    let offset = 0;
    for (const series of this.calls) {
      for (const p of series.best) {
        best = Math.min(best, p.value);
        out.push({ iteration: offset + p.iteration, value: best });
      }
      const last = series.best[series.best.length - 1];
      offset += last ? last.iteration + 1 : 0;
    }
    return out;
  }
}

/** Render the buffer onto a 2D canvas; log-scales the value axis. */
export function drawPlot(
  ctx: CanvasRenderingContext2D, buffer: PlotBuffer,
  width: number, height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const overlay = buffer.bestOverlay();
  const points = overlay.concat(
    buffer.live.map((p, i) => ({
      iteration: (overlay[overlay.length - 1]?.iteration ?? 0) + i,
      value: p.value,
    })));
  if (points.length < 2) return;

  const xs = points.map((p) => p.iteration);
  const ys = points.map((p) => Math.log10(Math.max(p.value, 1e-16)));
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs, x0 + 1);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys, y0 + 1e-9);
  const px = (p: PlotPoint) =>
    ((p.iteration - x0) / (x1 - x0)) * (width - 10) + 5;
  const py = (v: number) =>
    height - 5 - ((Math.log10(Math.max(v, 1e-16)) - y0) / (y1 - y0))
    * (height - 10);

  ctx.strokeStyle = "#888";
  ctx.beginPath();
  buffer.live.forEach((p, i) => {
    const x = px({ iteration: (overlay[overlay.length - 1]?.iteration ?? 0) + i, value: p.value });
    if (i === 0) ctx.moveTo(x, py(p.value));
    else ctx.lineTo(x, py(p.value));
  });
  ctx.stroke();

  ctx.strokeStyle = "#2a7";
  ctx.beginPath();
  overlay.forEach((p, i) => {
    if (i === 0) ctx.moveTo(px(p), py(p.value));
    else ctx.lineTo(px(p), py(p.value));
  });
  ctx.stroke();
}
