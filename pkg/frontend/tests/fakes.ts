// Shared fakes: a manually stepped clock/scheduler, a recording view,
// and an in-memory study server speaking the same JSON protocol.

import { FlowTimers, FlowView } from "../src/flow.js";
import { FetchLike } from "../src/api.js";

interface ScheduledTimer {
  id: number;
  due: number;
  fn: () => void;
}

export class FakeClock implements FlowTimers {
  time = 0;
  private timers: ScheduledTimer[] = [];
  private nextId = 1;

  now(): number {
    return this.time;
  }

  setTimer(fn: () => void, ms: number): unknown {
    const handle = { id: this.nextId++, due: this.time + ms, fn };
    this.timers.push(handle);
    return handle.id;
  }

  clearTimer(handle: unknown): void {
    this.timers = this.timers.filter((t) => t.id !== handle);
  }

  /** Advance the clock, firing timers in due order. */
  advance(ms: number): void {
    const target = this.time + ms;
    for (;;) {
      const due = this.timers.filter((t) => t.due <= target)
        .sort((a, b) => a.due - b.due)[0];
      if (!due) break;
      this.timers = this.timers.filter((t) => t.id !== due.id);
      this.time = due.due;
      due.fn();
    }
    this.time = target;
  }
}

export interface ViewEvent {
  kind: "show" | "hide" | "complete";
  detail?: unknown;
}

export class RecordingView implements FlowView {
  events: ViewEvent[] = [];
  visible = false;
  completedWith: number | null = null;

  showPair(left: string, right: string, buttonOrder: string[]): void {
    this.visible = true;
    this.events.push({ kind: "show", detail: { left, right, buttonOrder } });
  }

  hidePair(): void {
    this.visible = false;
    this.events.push({ kind: "hide" });
  }

  showCompletion(submitted: number): void {
    this.completedWith = submitted;
    this.events.push({ kind: "complete", detail: submitted });
  }
}

export interface FakeServerOptions {
  trials?: number;
  displayMs?: number;
  failFirstPostAttempts?: number; // network-style failures before accepting
  duplicateAcks?: boolean;        // accept, then 409 every retry
}

export class FakeServer {
  posts: Array<{ index: number; choice: string; latency_ms: number }> = [];
  accepted = new Set<number>();
  trialGets: number[] = [];
  private failures = new Map<number, number>();

  constructor(private options: FakeServerOptions = {}) {}

  get trialCount(): number {
    return this.options.trials ?? 6;
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    if (url.endsWith("/api/session") && method === "POST") {
      return jsonResponse(200, {
        session_id: "fake-session",
        trial_count: this.trialCount,
        button_order: ["different", "identical"],
      });
    }
    const trialMatch = url.match(/\/api\/trial\/fake-session\/(\d+)$/);
    if (trialMatch && method === "GET") {
      const index = Number(trialMatch[1]);
      if (index >= this.trialCount) return jsonResponse(404, { detail: "range" });
      this.trialGets.push(index);
      return jsonResponse(200, {
        left_url: `/img/left-${index}`,
        right_url: `/img/right-${index}`,
        display_ms: this.options.displayMs ?? 5000,
      });
    }
    const postMatch = url.match(/\/api\/response\/fake-session\/(\d+)$/);
    if (postMatch && method === "POST") {
      const index = Number(postMatch[1]);
      const body = JSON.parse(String(init?.body));
      this.posts.push({ index, ...body });
      const remaining = this.failures.get(index) ??
        this.options.failFirstPostAttempts ?? 0;
      if (remaining > 0) {
        this.failures.set(index, remaining - 1);
        return jsonResponse(500, { detail: "flaky network" });
      }
      if (this.accepted.has(index)) {
        return jsonResponse(409, { detail: "duplicate" });
      }
      this.accepted.add(index);
      return jsonResponse(200, { accepted: true, count: this.accepted.size });
    }
    return jsonResponse(404, { detail: `no route for ${method} ${url}` });
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
