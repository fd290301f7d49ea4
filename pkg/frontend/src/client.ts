/**
 * WebSocket client for a graspmap service session.
 *
 * The service answers strictly in order on one connection, so the
 * client keeps a FIFO of pending requests and feeds each incoming
 * frame to the head of the queue; progress frames stream to the
 * pending solve without completing it. A dropped connection rejects
 * what was in flight, reopens through the socket factory, and resyncs
 * the session history so plots and poses match the uninterrupted run.
 */

import {
  encodeRequest,
  parseFrame,
  type ErrorFrame,
  type HistoryFrame,
  type PickEnd,
  type PickFrame,
  type PoseFrame,
  type ProgressFrame,
  type Request,
  type ResultFrame,
  type SceneFrame,
  type ServerFrame,
  type SolveOptions,
  type TransferFrame,
} from "./protocol.js";

/** The slice of the WebSocket API the client uses; mocks implement it. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open", listener: () => void): void;
  addEventListener(type: "close", listener: () => void): void;
  addEventListener(type: "message", listener: (event: { data: unknown }) => void): void;
}

export type SocketFactory = () => WsLike;

export class ServiceError extends Error {
  constructor(message: string, readonly inReplyTo: string | null) {
    super(message);
    this.name = "ServiceError";
  }
}

interface Pending {
  request: Request;
  resolve: (frame: ServerFrame) => void;
  reject: (err: Error) => void;
  onProgress?: (frame: ProgressFrame) => void;
}

export interface ClientHooks {
  /** Every progress frame, regardless of which request streams it. */
  onProgress?: (frame: ProgressFrame) => void;
  /** History replayed after an automatic reconnect. */
  onResync?: (frame: HistoryFrame) => void;
  /** Frames that answer nothing we asked (should not happen). */
  onStray?: (frame: ServerFrame) => void;
}

export class ServiceClient {
  private socket: WsLike | null = null;
  private readonly queue: Pending[] = [];
  private inFlight: Pending | null = null;
  private closedByUs = false;

  constructor(
    private readonly factory: SocketFactory,
    private readonly hooks: ClientHooks = {},
  ) {}

  connect(): Promise<void> {
    this.closedByUs = false;
    return this.open();
  }

  private open(): Promise<void> {
    return new Promise((resolve) => {
      const socket = this.factory();
      this.socket = socket;
      socket.addEventListener("open", () => resolve());
      socket.addEventListener("message", (event) =>
        this.handleFrame(String(event.data)));
      socket.addEventListener("close", () => {
        if (socket === this.socket) this.handleClose();
      });
    });
  }

  close(): void {
    this.closedByUs = true;
    this.socket?.close();
    this.socket = null;
  }

  private handleClose(): void {
    this.socket = null;
    const dropped = this.inFlight;
    this.inFlight = null;
    dropped?.reject(new Error("connection closed"));
    for (const pending of this.queue.splice(0)) {
      pending.reject(new Error("connection closed"));
    }
    if (!this.closedByUs) {
      void this.resync();
    }
  }

  private async resync(): Promise<void> {
    await this.open();
    const history = await this.history();
    this.hooks.onResync?.(history);
  }

  private handleFrame(data: string): void {
    const frame = parseFrame(data);
    if (frame.type === "progress") {
      this.hooks.onProgress?.(frame);
      this.inFlight?.onProgress?.(frame);
      return;
    }
    const pending = this.inFlight;
    if (!pending) {
      this.hooks.onStray?.(frame);
      return;
    }
    this.inFlight = null;
    if (frame.type === "error") {
      pending.reject(new ServiceError(frame.error, frame.in_reply_to));
    } else {
      pending.resolve(frame);
    }
    this.pump();
  }

  private pump(): void {
    if (this.inFlight || !this.socket) return;
    const next = this.queue.shift();
    if (!next) return;
    this.inFlight = next;
    this.socket.send(encodeRequest(next.request));
  }

  private request(
    request: Request, onProgress?: (frame: ProgressFrame) => void,
  ): Promise<ServerFrame> {
    if (!this.socket) {
      return Promise.reject(new Error("not connected"));
    }
    return new Promise((resolve, reject) => {
      this.queue.push({ request, resolve, reject, onProgress });
      this.pump();
    });
  }

  private expect<T extends ServerFrame["type"]>(
    frame: ServerFrame, type: T,
  ): Extract<ServerFrame, { type: T }> {
    if (frame.type !== type) {
      throw new Error(`expected ${type} reply, got ${frame.type}`);
    }
    return frame as Extract<ServerFrame, { type: T }>;
  }

  async scene(): Promise<SceneFrame> {
    return this.expect(await this.request({ type: "scene" }), "scene");
  }

  async pick(
    patch: string, end: PickEnd, root: number, toward: number,
  ): Promise<PickFrame> {
    return this.expect(
      await this.request({ type: "pick", patch, end, root, toward }),
      "pick");
  }

  async transfer(): Promise<TransferFrame> {
    return this.expect(await this.request({ type: "transfer" }), "transfer");
  }

  async solve(
    options: SolveOptions = {},
    onProgress?: (frame: ProgressFrame) => void,
  ): Promise<ResultFrame> {
    const request: Request = { type: "solve" };
    if (options.priorOverride !== undefined) {
      request.prior_override = options.priorOverride;
    }
    if (options.iterationCap !== undefined) {
      request.iteration_cap = options.iterationCap;
    }
    return this.expect(await this.request(request, onProgress), "result");
  }

  async pose(theta: number[]): Promise<PoseFrame> {
    return this.expect(
      await this.request({ type: "pose", theta }), "pose");
  }

  async history(): Promise<HistoryFrame> {
    return this.expect(await this.request({ type: "history" }), "history");
  }
}

export type { ErrorFrame };
