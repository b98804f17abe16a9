// The participant flow, independent of the DOM.
//
// Per trial: show the pair for exactly display_ms, then blank it; the
// participant may answer while it is still visible (their latency is
// recorded either way), and once they answer, the choice is submitted
// and the flow advances. Trials run strictly forward; a response that
// the server has already accepted (HTTP 409 on retry) is treated as
// submitted rather than as an error.

import { ApiError, Choice, StudyApi, TrialPayload } from "./api.js";

export type Phase = "idle" | "showing" | "awaiting_choice" | "submitting" | "done";

export interface FlowView {
  showPair(left: string, right: string, buttonOrder: string[]): void;
  hidePair(): void;
  showCompletion(submitted: number): void;
}

export interface FlowTimers {
  now(): number;
  setTimer(fn: () => void, ms: number): unknown;
  clearTimer(handle: unknown): void;
}

export interface FlowEvent {
  type: "shown" | "hidden" | "answered" | "submitted" | "retried";
  trial: number;
  at: number;
}

export interface FlowOptions {
  seed?: number;
  preload?: (url: string) => Promise<void>;
  maxSubmitAttempts?: number;
}

const realTimers: FlowTimers = {
  now: () => performance.now(),
  setTimer: (fn, ms) => setTimeout(fn, ms),
  clearTimer: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export class StudyFlow {
  phase: Phase = "idle";
  trialIndex = -1;
  submitted = 0;
  readonly events: FlowEvent[] = [];

  private sessionId = "";
  private trialCount = 0;
  private buttonOrder: string[] = [];
  private shownAt = 0;
  private hideHandle: unknown = null;
  private pendingChoice: ((choice: Choice) => void) | null = null;

  constructor(
    private api: StudyApi,
    private view: FlowView,
    private timers: FlowTimers = realTimers,
    private options: FlowOptions = {},
  ) {}

  /** Run the whole study; resolves with the number of submitted responses. */
  async run(): Promise<number> {
    const info = await this.api.createSession(this.options.seed);
    this.sessionId = info.session_id;
    this.trialCount = info.trial_count;
    this.buttonOrder = info.button_order;

    let next: TrialPayload | null = await this.api.getTrial(this.sessionId, 0);
    for (let index = 0; index < this.trialCount; index++) {
      const trial = next as TrialPayload;
      this.trialIndex = index;

      const preloading =
        index + 1 < this.trialCount
          ? this.api.getTrial(this.sessionId, index + 1)
          : null;

      const choice = await this.presentAndCollect(trial, index);
      await this.submit(index, choice);

      next = preloading === null ? null : await preloading;
      if (next !== null && this.options.preload) {
        // warm the next pair's images while the participant rests
        await Promise.all([
          this.options.preload(this.api.imageUrl(next.left_url)),
          this.options.preload(this.api.imageUrl(next.right_url)),
        ]);
      }
    }
    this.phase = "done";
    this.view.showCompletion(this.submitted);
    return this.submitted;
  }

  /** The participant's click, forwarded by the view. */
  answer(choice: Choice): void {
    if (this.pendingChoice === null) {
      return; // not accepting input right now
    }
    const resolve = this.pendingChoice;
    this.pendingChoice = null;
    resolve(choice);
  }

  private presentAndCollect(trial: TrialPayload, index: number): Promise<Choice> {
    this.phase = "showing";
    this.shownAt = this.timers.now();
    this.view.showPair(
      this.api.imageUrl(trial.left_url),
      this.api.imageUrl(trial.right_url),
      this.buttonOrder,
    );
    this.record("shown", index);

    this.hideHandle = this.timers.setTimer(() => {
      this.hideHandle = null;
      if (this.phase === "showing") {
        this.phase = "awaiting_choice";
        this.view.hidePair();
        this.record("hidden", index);
      }
    }, trial.display_ms);

    return new Promise<Choice>((resolve) => {
      this.pendingChoice = (choice: Choice) => {
        // answers during the display window are allowed; hide immediately
        if (this.hideHandle !== null) {
          this.timers.clearTimer(this.hideHandle);
          this.hideHandle = null;
        }
        if (this.phase === "showing") {
          this.view.hidePair();
          this.record("hidden", index);
        }
        this.phase = "submitting";
        this.record("answered", index);
        resolve(choice);
      };
    });
  }

  private async submit(index: number, choice: Choice): Promise<void> {
    const latency = this.timers.now() - this.shownAt;
    const attempts = this.options.maxSubmitAttempts ?? 3;
    for (let attempt = 1; ; attempt++) {
      try {
        await this.api.postResponse(this.sessionId, index, choice, latency);
        break;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          break; // already accepted: a retry after a lost ack
        }
        if (attempt >= attempts) {
          throw err;
        }
        this.record("retried", index);
      }
    }
    this.submitted += 1;
    this.record("submitted", index);
  }

  private record(type: FlowEvent["type"], trial: number): void {
    this.events.push({ type, trial, at: this.timers.now() });
  }
}
