// DOM rendering. Everything here reads the folded state and the pure view
// models; nothing mutates state except the pending-spinner flags on buttons.

import type { AlertPayload, ConsoleState } from "./types.js";
import { alertCardModel, phaseBadge, tickerModel, timelineEntry } from "./viewmodel.js";
import type { TimelineEntry } from "./viewmodel.js";

// fixed lab geometry (matches the simulator's default map)
const NODES: Record<string, [number, number]> = {
  dock: [0, 0],
  mid: [30, 0],
  capping: [59.55, 0],
  chemspeed: [63.55, 0],
};

export interface ConsentHandler {
  (taskId: string, command: "continue" | "abort", button: HTMLButtonElement): void;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderHeader(root: HTMLElement, state: ConsoleState,
                             connection: string): void {
  root.textContent = "";
  root.append(
    el("span", `badge phase-${state.phase}`, phaseBadge(state)),
    el("span", "clock", `t = ${state.clock.toFixed(1)} s`),
    el("span", `conn conn-${connection}`, connection),
  );
}

export function renderMap(canvas: HTMLCanvasElement, state: ConsoleState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const pad = 28;
  const worldWidth = 70;
  const sx = (x: number) => pad + (x / worldWidth) * (canvas.width - 2 * pad);
  const sy = (y: number) => canvas.height / 2 - y * 14;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#445";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(sx(0), sy(0));
  ctx.lineTo(sx(63.55), sy(0));
  ctx.stroke();

  for (const [name, [x, y]] of Object.entries(NODES)) {
    ctx.fillStyle = "#8af";
    ctx.beginPath();
    ctx.arc(sx(x), sy(y), 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#9ab";
    ctx.font = "11px sans-serif";
    ctx.fillText(name, sx(x) - 12, sy(y) + 18);
  }

  for (const hazard of state.hazards) {
    ctx.fillStyle = hazard.unsafe ? "#f66" : "#fc6";
    ctx.beginPath();
    ctx.arc(sx(hazard.x), sy(hazard.y), 5, 0, Math.PI * 2);
    ctx.fill();
  }
  for (const alert of state.pending_alerts) {
    ctx.strokeStyle = "#f66";
    ctx.beginPath();
    ctx.arc(sx(alert.snapshot.pose[0]), sy(alert.snapshot.pose[1]), 9, 0, Math.PI * 2);
    ctx.stroke();
  }

  const robot = state.robot;
  ctx.fillStyle = robot.motion === "halted" ? "#f90" : "#6f6";
  ctx.beginPath();
  ctx.arc(sx(robot.x), sy(robot.y), 6, 0, Math.PI * 2);
  ctx.fill();
  ctx.fillStyle = "#cde";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${robot.motion} / ${robot.arm}`, sx(robot.x) - 20, sy(robot.y) - 12);
}

export function renderTicker(root: HTMLElement, state: ConsoleState): void {
  const model = tickerModel(state);
  root.textContent = "";
  const strip = el("div", "voc-strip");
  const fill = el("div", `voc-fill${model.x2Ratio > 1 ? " voc-over" : ""}`);
  fill.style.width = `${Math.min(100, model.x2Ratio * 50)}%`;
  const threshold = el("div", "voc-threshold");
  threshold.style.left = "50%";
  threshold.title = "T_safe";
  strip.append(fill, threshold);
  root.append(
    el("div", "ticker-cell", `x1: ${model.x1}`),
    el("div", "ticker-cell", `x2: ${model.x2}`),
    strip,
    el("div", "ticker-cell", `x3: ${model.x3}`),
    el("div", "ticker-cell dim", `frame quality ${model.quality}`),
  );
}

export function renderAlerts(root: HTMLElement, state: ConsoleState,
                             onConsent: ConsentHandler, notice: string | null): void {
  root.textContent = "";
  if (notice) root.append(el("div", "notice", notice));
  if (state.pending_alerts.length === 0) {
    root.append(el("div", "dim", state.resolved_alerts > 0
      ? `no pending alerts (${state.resolved_alerts} resolved)`
      : "no pending alerts"));
    return;
  }
  const taskId = state.task?.robot_task_id ?? "";
  state.pending_alerts.forEach((alert: AlertPayload) => {
    const model = alertCardModel(alert, taskId);
    const card = el("div", "alert-card");
    card.append(el("h3", undefined, model.title));
    card.append(el("div", "alert-line", model.x1Line));
    card.append(el("div", `alert-line${model.overThreshold ? " over" : ""}`, model.x2Line));
    card.append(el("div", "alert-line", model.x3Line));
    card.append(el("div", "alert-line dim", model.snapshotLine));
    card.append(el("div", "alert-line dim", model.summary));
    const actions = el("div", "alert-actions");
    const cont = el("button", "btn-continue", "Continue");
    const abort = el("button", "btn-abort", "Abort");
    cont.onclick = () => onConsent(model.taskId, "continue", cont);
    abort.onclick = () => onConsent(model.taskId, "abort", abort);
    actions.append(cont, abort);
    card.append(actions);
    root.append(card);
  });
}

export function renderTimeline(root: HTMLElement, entries: TimelineEntry[]): void {
  root.textContent = "";
  for (const entry of entries.slice(-40)) {
    const row = el("div", `tl tl-${entry.tone}`);
    row.append(
      el("span", "tl-clock", entry.clock.toFixed(1)),
      el("span", "tl-text", entry.text),
    );
    root.append(row);
  }
  root.scrollTop = root.scrollHeight;
}

export { timelineEntry };
