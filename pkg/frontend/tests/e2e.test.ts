// End-to-end against a live gateway: spawn the service, run the obstruction
// scenario, answer the alert from this client and check latency plus the
// snapshot+replay reconstruction guarantee.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/client.js";
import { cloneState, replay } from "../src/state.js";
import type { Snapshot, WireEvent } from "../src/types.js";
import { alertCardModel } from "../src/viewmodel.js";

const PORT = 18000 + Math.floor(Math.random() * 2000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
const client = new GatewayClient(BASE);

async function waitForGateway(timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/sessions`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("gateway did not come up");
}

beforeAll(async () => {
  server = spawn("prevent", ["serve", "--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForGateway();
}, 30000);

afterAll(() => {
  server?.kill("SIGTERM");
});

function collectEvents(
  sessionId: string,
  cursor: number,
  sink: WireEvent[],
  waiters: Map<string, (event: WireEvent) => void>,
): () => void {
  return client.streamEvents(sessionId, cursor, (event) => {
    sink.push(event);
    const waiter = waiters.get(event.kind);
    if (waiter) {
      waiters.delete(event.kind);
      waiter(event);
    }
  });
}

function waitFor(waiters: Map<string, (event: WireEvent) => void>, kind: string,
                 timeoutMs = 30000): Promise<WireEvent> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      waiters.delete(kind);
      reject(new Error(`timed out waiting for ${kind}`));
    }, timeoutMs);
    waiters.set(kind, (event) => {
      clearTimeout(timer);
      resolve(event);
    });
  });
}

describe("operator console against a live gateway (S5)", () => {
  it("renders the alert evidence, resumes within 500ms, and reconstructs state", async () => {
    const info = await client.createSession("S5", { mode: "skilled", speed: 40 });
    const events: WireEvent[] = [];
    const waiters = new Map<string, (event: WireEvent) => void>();
    const stop = collectEvents(info.session_id, 0, events, waiters);

    const alertPromise = waitFor(waiters, "alert_raised");
    await client.submitTask(info.session_id, {
      task_type: "LBR",
      task_name: "pickup_rack",
      location: "capping",
      robot_task_id: "rt-e2e",
    });

    // -- alert card carries the trigger's three modality values
    const alertEvent = await alertPromise;
    const card = alertCardModel(alertEvent.payload as never, "rt-e2e");
    expect(card.x1Line).toContain("x1 = 1");
    expect(card.x2Line).toMatch(/x2 = \d+ PPM/);
    expect(card.x3Line).toContain("obstruction");
    expect(card.snapshotLine).toContain("S5");

    // -- a late joiner's snapshot taken mid-wait
    const snapshot: Snapshot = await client.snapshot(info.session_id);
    expect(snapshot.state.pending_alerts.length).toBe(1);

    // -- continue click resolves into a resumed event within the budget
    const resumedPromise = waitFor(waiters, "resumed");
    const donePromise = waitFor(waiters, "task_done");
    const clicked = Date.now();
    await client.postConsent(info.session_id, "rt-e2e", "continue");
    await resumedPromise;
    const latencyMs = Date.now() - clicked;
    expect(latencyMs).toBeLessThan(500);

    await donePromise;
    stop();

    // -- snapshot + tail replay equals the uninterrupted fold
    const continuous = replay(events.map((e) => ({ ...e })));
    const lateJoin = replay(
      events.filter((e) => e.seq > snapshot.last_seq).map((e) => ({ ...e })),
      cloneState(snapshot.state),
    );
    expect(lateJoin).toEqual(continuous);

    // sanity on the stream itself: gapless and ordered
    const seqs = events.map((e) => e.seq);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    for (let i = 1; i < seqs.length; i += 1) {
      expect(seqs[i] - seqs[i - 1]).toBe(1);
    }

    const record = await client.record(info.session_id);
    expect(record.success).toBe(true);
  }, 60000);

  it("double continue yields a benign conflict, not a second resume", async () => {
    const info = await client.createSession("S5", { mode: "skilled", speed: 40 });
    const events: WireEvent[] = [];
    const waiters = new Map<string, (event: WireEvent) => void>();
    const stop = collectEvents(info.session_id, 0, events, waiters);
    const alertPromise = waitFor(waiters, "alert_raised");
    await client.submitTask(info.session_id, {
      task_type: "LBR",
      task_name: "pickup_rack",
      location: "capping",
      robot_task_id: "rt-dup",
    });
    await alertPromise;
    const donePromise = waitFor(waiters, "task_done");
    await client.postConsent(info.session_id, "rt-dup", "continue");
    await expect(
      client.postConsent(info.session_id, "rt-dup", "continue"),
    ).rejects.toMatchObject({ status: 409 });
    await donePromise;
    stop();
    expect(events.filter((e) => e.kind === "resumed").length).toBe(1);
  }, 60000);

  it("injected hazard shows up and halts a navigation run", async () => {
    const info = await client.createSession("T1_NH", { mode: "skilled", speed: 100 });
    const events: WireEvent[] = [];
    const waiters = new Map<string, (event: WireEvent) => void>();
    const stop = collectEvents(info.session_id, 0, events, waiters);
    const navPromise = waitFor(waiters, "navigation_started");
    await client.submitTask(info.session_id, {
      task_type: "NAV",
      task_name: "",
      location: "capping",
      robot_task_id: "rt-inj",
    });
    await navPromise;
    const snap = await client.snapshot(info.session_id);
    const haltPromise = waitFor(waiters, "alert_raised");
    await client.inject(info.session_id, {
      kind: "contaminated_glove",
      x: snap.state.robot.x + 15.0,
      y: 0,
      label: "contaminated_glove",
      chemical: null,
      containment: "spilled",
      unsafe: true,
      on_path: true,
      in_interaction_zone: false,
    });
    await haltPromise;
    const donePromise = waitFor(waiters, "task_done");
    await client.postConsent(info.session_id, "rt-inj", "continue");
    await donePromise;
    stop();
    const kinds = events.map((e) => e.kind);
    expect(kinds.indexOf("hazard_injected")).toBeGreaterThan(-1);
    expect(kinds.indexOf("hazard_injected")).toBeLessThan(kinds.indexOf("halted"));
  }, 90000);
});
