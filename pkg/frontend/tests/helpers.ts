/**
 * Shared test scaffolding: the recorded service fixture, a minimal
 * WebSocket stand-in, and a replay harness that verifies the client
 * sends byte-identical requests to the recorded session.
 */

import { readFileSync } from "node:fs";

import type { WsLike } from "../src/client.js";

export interface ExchangeEntry {
  send?: Record<string, unknown>;
  recv?: Record<string, unknown>;
}

export interface StoredResult {
  backend: string;
  best_value: number;
  theta_star: number[];
  [key: string]: unknown;
}

export interface Fixture {
  note: string;
  backend: string;
  exchange: ExchangeEntry[];
  result_file: { version: number; scene: string; results: StoredResult[] };
}

export function loadFixture(): Fixture {
  const url = new URL("./fixtures/roundtrip.json", import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as Fixture;
}

export function recvFrames(fixture: Fixture): Record<string, unknown>[] {
  return fixture.exchange.flatMap((e) => (e.recv ? [e.recv] : []));
}

export function framesOfType<T = Record<string, unknown>>(
  fixture: Fixture, type: string,
): T[] {
  return recvFrames(fixture).filter((f) => f["type"] === type) as T[];
}

type MessageListener = (event: { data: unknown }) => void;

export class MockWebSocket implements WsLike {
  readonly sent: string[] = [];
  closed = false;
  private readonly listeners = {
    open: [] as Array<() => void>,
    close: [] as Array<() => void>,
    message: [] as MessageListener[],
  };

  constructor(
    private readonly onSend?: (data: string, socket: MockWebSocket) => void,
  ) {}

  send(data: string): void {
    this.sent.push(data);
    this.onSend?.(data, this);
  }

  close(): void {
    this.closed = true;
    this.emitClose();
  }

  addEventListener(type: "open", listener: () => void): void;
  addEventListener(type: "close", listener: () => void): void;
  addEventListener(type: "message", listener: MessageListener): void;
  addEventListener(
    type: "open" | "close" | "message", listener: unknown,
  ): void {
    (this.listeners[type] as unknown[]).push(listener);
  }

  open(): void {
    for (const fn of [...this.listeners.open]) fn();
  }

  deliver(frame: unknown): void {
    const data = typeof frame === "string" ? frame : JSON.stringify(frame);
    for (const fn of [...this.listeners.message]) fn({ data });
  }

  emitClose(): void {
    for (const fn of [...this.listeners.close]) fn();
  }

  /** Last sent message, parsed. */
  lastSent(): Record<string, unknown> {
    const raw = this.sent[this.sent.length - 1];
    if (raw === undefined) throw new Error("nothing sent");
    return JSON.parse(raw) as Record<string, unknown>;
  }
}

/**
 * Replays a recorded exchange: each client send must deep-equal the
 * recorded request, and every recorded reply up to the next request is
 * delivered in order. `done()` confirms the whole script was consumed.
 */
export class ReplayServer {
  private cursor = 0;

  constructor(
    private readonly exchange: ExchangeEntry[],
    private readonly check: (actual: unknown, expected: unknown) => void,
  ) {}

  attach(): MockWebSocket {
    const socket = new MockWebSocket((data, ws) => this.handle(data, ws));
    queueMicrotask(() => socket.open());
    return socket;
  }

  private handle(data: string, socket: MockWebSocket): void {
    const entry = this.exchange[this.cursor];
    if (!entry?.send) {
      throw new Error(`unexpected request at entry ${this.cursor}: ${data}`);
    }
    this.check(JSON.parse(data), entry.send);
    this.cursor += 1;
    while (this.cursor < this.exchange.length) {
      const next = this.exchange[this.cursor];
      if (!next?.recv) break;
      this.cursor += 1;
      socket.deliver(next.recv);
    }
  }

  done(): boolean {
    return this.cursor === this.exchange.length;
  }
}

/** Let queued microtasks and zero-delay timers run. */
export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
