// Console wiring: one session, one event subscription, fire-and-confirm
// commands. All authoritative state transitions arrive through the stream.

import { GatewayClient, GatewayError } from "./client.js";
import { applyEvent, initialState } from "./state.js";
import type { ConsoleState, InjectForm, WireEvent } from "./types.js";
import { renderAlerts, renderHeader, renderMap, renderTicker, renderTimeline, timelineEntry } from "./render.js";
import { validateInjection } from "./viewmodel.js";
import type { TimelineEntry } from "./viewmodel.js";

const client = new GatewayClient("");

let state: ConsoleState = initialState();
let timeline: TimelineEntry[] = [];
let sessionId: string | null = null;
let stopStream: (() => void) | null = null;
let connection = "disconnected";
let notice: string | null = null;

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function draw(): void {
  renderHeader(byId("header"), state, connection);
  renderMap(byId<HTMLCanvasElement>("map"), state);
  renderTicker(byId("ticker"), state);
  renderAlerts(byId("alerts"), state, onConsent, notice);
  renderTimeline(byId("timeline"), timeline);
}

function onEvent(event: WireEvent): void {
  applyEvent(state, event);
  const entry = timelineEntry(event.kind, event.timestamp, event.payload);
  if (entry) timeline.push(entry);
  if (event.kind === "resumed" || event.kind === "task_failed") notice = null;
  draw();
}

async function attach(scenario: string, mode: string, speed: number): Promise<void> {
  stopStream?.();
  const info = await client.createSession(scenario, { mode, speed });
  sessionId = info.session_id;
  // late-join protocol: seed the reducer from the snapshot, then replay
  // the stream strictly after its cursor
  const snap = await client.snapshot(sessionId);
  state = snap.state;
  timeline = [];
  notice = null;
  stopStream = client.streamEvents(sessionId, snap.last_seq, onEvent, (status) => {
    connection = status;
    draw();
  });
  draw();
}

function onConsent(taskId: string, command: "continue" | "abort",
                   button: HTMLButtonElement): void {
  if (!sessionId) return;
  button.disabled = true; // pending-spinner only; the card resolves on events
  client.postConsent(sessionId, taskId, command).catch((error: unknown) => {
    button.disabled = false;
    notice = error instanceof GatewayError && error.status === 409
      ? "consent already handled"
      : `consent failed: ${String(error)}`;
    draw();
  });
}

function readInjectForm(): InjectForm {
  const chemical = byId<HTMLSelectElement>("inj-chemical").value;
  return {
    kind: byId<HTMLSelectElement>("inj-kind").value,
    x: Number(byId<HTMLInputElement>("inj-x").value),
    y: Number(byId<HTMLInputElement>("inj-y").value),
    label: byId<HTMLInputElement>("inj-label").value,
    chemical: chemical === "none" ? null : chemical,
    containment: byId<HTMLSelectElement>("inj-containment").value,
    unsafe: byId<HTMLInputElement>("inj-unsafe").checked,
    on_path: byId<HTMLInputElement>("inj-onpath").checked,
    in_interaction_zone: byId<HTMLInputElement>("inj-zone").checked,
  };
}

function wireControls(): void {
  byId<HTMLButtonElement>("connect").onclick = () => {
    const scenario = byId<HTMLInputElement>("scenario").value.trim() || "T1_NH";
    const mode = byId<HTMLSelectElement>("mode").value;
    const speed = Number(byId<HTMLInputElement>("speed").value) || 1.0;
    attach(scenario, mode, speed).catch((error) => {
      connection = "disconnected";
      notice = `session failed: ${String(error)}`;
      draw();
    });
  };

  byId<HTMLButtonElement>("start-task").onclick = () => {
    if (!sessionId) return;
    const taskType = byId<HTMLSelectElement>("task-type").value;
    const name = byId<HTMLInputElement>("task-name").value.trim();
    const location = byId<HTMLInputElement>("task-location").value.trim();
    client
      .submitTask(sessionId, {
        task_type: taskType,
        task_name: name,
        location,
        robot_task_id: `rt-${Date.now().toString(36)}`,
      })
      .catch((error) => {
        notice = `task rejected: ${String(error)}`;
        draw();
      });
  };

  byId<HTMLButtonElement>("inject").onclick = () => {
    if (!sessionId) return;
    const form = readInjectForm();
    const problem = validateInjection(form);
    const errorBox = byId("inject-error");
    if (problem) {
      errorBox.textContent = problem;
      return;
    }
    errorBox.textContent = "";
    client.inject(sessionId, form).catch((error) => {
      errorBox.textContent = `rejected by gateway: ${String(error)}`;
    });
  };
}

wireControls();
draw();
