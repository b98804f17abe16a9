import { describe, expect, it } from "vitest";

import { StudyApi } from "../src/api.js";
import { StudyFlow } from "../src/flow.js";
import { FakeClock, FakeServer, RecordingView } from "./fakes.js";

function makeFlow(server: FakeServer, clock: FakeClock, view: RecordingView) {
  const api = new StudyApi("http://study", server.fetch);
  return new StudyFlow(api, view, clock);
}

async function settle() {
  // let pending promise chains run between clock steps
  for (let i = 0; i < 20; i++) await Promise.resolve();
}

describe("study flow", () => {
  it("hides the pair exactly at display_ms when the participant waits", async () => {
    const server = new FakeServer({ trials: 2, displayMs: 5000 });
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = makeFlow(server, clock, view);

    const done = flow.run();
    await settle();
    expect(view.visible).toBe(true);

    clock.advance(4999);
    await settle();
    expect(view.visible).toBe(true);

    clock.advance(1);
    await settle();
    expect(view.visible).toBe(false);
    const shown = flow.events.find((e) => e.type === "shown" && e.trial === 0)!;
    const hidden = flow.events.find((e) => e.type === "hidden" && e.trial === 0)!;
    expect(hidden.at - shown.at).toBe(5000);

    // answer both trials to finish
    clock.advance(700);
    await settle();
    flow.answer("identical");
    await settle();
    clock.advance(5000);
    await settle();
    flow.answer("different");
    await settle();
    expect(await done).toBe(2);
    expect(view.completedWith).toBe(2);
  });

  it("allows answering during the display and records a short latency", async () => {
    const server = new FakeServer({ trials: 1, displayMs: 5000 });
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = makeFlow(server, clock, view);

    const done = flow.run();
    await settle();
    clock.advance(1200);
    await settle();
    expect(view.visible).toBe(true);
    flow.answer("different");
    await settle();
    expect(view.visible).toBe(false); // hidden immediately on answer
    await done;
    expect(server.posts).toHaveLength(1);
    expect(server.posts[0].latency_ms).toBe(1200);
    expect(server.posts[0].choice).toBe("different");
  });

  it("ignores clicks before a trial is on screen and double clicks", async () => {
    const server = new FakeServer({ trials: 1, displayMs: 100 });
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = makeFlow(server, clock, view);

    flow.answer("identical"); // before run(): dropped
    const done = flow.run();
    await settle();
    flow.answer("identical");
    flow.answer("different"); // second click while submitting: dropped
    await settle();
    await done;
    expect(server.posts).toHaveLength(1);
    expect(server.posts[0].choice).toBe("identical");
  });

  it("walks trials strictly forward and covers every index once", async () => {
    const server = new FakeServer({ trials: 5, displayMs: 50 });
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = makeFlow(server, clock, view);

    const done = flow.run();
    for (let i = 0; i < 5; i++) {
      await settle();
      clock.advance(60);
      await settle();
      flow.answer(i % 2 ? "identical" : "different");
      await settle();
    }
    await done;
    expect(server.posts.map((p) => p.index)).toEqual([0, 1, 2, 3, 4]);
    const sortedGets = [...server.trialGets];
    expect(sortedGets).toEqual([0, 1, 2, 3, 4]); // fetched in order, once each
  });

  it("retries failed submissions and tolerates duplicate rejection", async () => {
    const server = new FakeServer({ trials: 1, displayMs: 50, failFirstPostAttempts: 1 });
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = makeFlow(server, clock, view);

    const done = flow.run();
    await settle();
    flow.answer("identical");
    await settle();
    expect(await done).toBe(1);
    // two POSTs reached the server (one failed, one accepted), one response stored
    expect(server.posts).toHaveLength(2);
    expect(server.accepted.size).toBe(1);
    expect(flow.events.filter((e) => e.type === "retried")).toHaveLength(1);
  });

  it("treats a 409 on resubmission as success", async () => {
    const server = new FakeServer({ trials: 1, displayMs: 50 });
    // make the server accept the write but report a failure, forcing a retry
    let sabotaged = false;
    const innerFetch = server.fetch;
    const flakyFetch: typeof server.fetch = async (url, init) => {
      const res = await innerFetch(url, init);
      if (!sabotaged && init?.method === "POST" && url.includes("/api/response/")) {
        sabotaged = true;
        return new Response("{}", { status: 503 }); // ack lost in transit
      }
      return res;
    };
    const api = new StudyApi("http://study", flakyFetch);
    const clock = new FakeClock();
    const view = new RecordingView();
    const flow = new StudyFlow(api, view, clock);

    const done = flow.run();
    await settle();
    flow.answer("identical");
    await settle();
    expect(await done).toBe(1); // retry got 409, flow counts it as submitted
    expect(view.completedWith).toBe(1);
  });
});
