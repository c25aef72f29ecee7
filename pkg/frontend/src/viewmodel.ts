// View models the DOM layer renders verbatim; kept pure for unit testing.

import type { AlertPayload, ConsoleState, InjectForm } from "./types.js";
import { T_SAFE_PPM } from "./types.js";

export interface AlertCardModel {
  title: string;
  x1Line: string;
  x2Line: string;
  x3Line: string;
  overThreshold: boolean;
  snapshotLine: string;
  summary: string;
  taskId: string;
}

export function alertCardModel(alert: AlertPayload, taskId: string): AlertCardModel {
  const label = alert.x3 ? alert.x3[0] : "unclassified";
  const score = alert.x3 ? ` (${(alert.x3[1] * 100).toFixed(0)}%)` : "";
  const x2 = alert.x2 ?? 0;
  return {
    title: `Robot halted: ${label.replace(/_/g, " ")}`,
    x1Line: `vision flag x1 = ${alert.x1 ?? "-"}`,
    x2Line: `VOC x2 = ${x2} PPM (threshold ${T_SAFE_PPM})`,
    x3Line: `classifier x3 = ${label}${score}`,
    overThreshold: x2 > T_SAFE_PPM,
    snapshotLine:
      `scene ${alert.snapshot.scenario_id} @ (${alert.snapshot.pose[0].toFixed(2)}, ` +
      `${alert.snapshot.pose[1].toFixed(2)}), tick ${alert.snapshot.tick}`,
    summary: alert.hazard_summary,
    taskId,
  };
}

export interface TickerModel {
  x1: string;
  x2: string;
  x2Value: number;
  x2Ratio: number; // for the threshold strip, 1.0 == T_safe
  x3: string;
  quality: string;
}

export function tickerModel(state: ConsoleState): TickerModel {
  const frame = state.last_frame;
  if (!frame) {
    return { x1: "-", x2: "-", x2Value: 0, x2Ratio: 0, x3: "-", quality: "-" };
  }
  return {
    x1: frame.x1 === 1 ? "HAZARD" : "clear",
    x2: `${frame.x2} PPM`,
    x2Value: frame.x2,
    x2Ratio: frame.x2 / T_SAFE_PPM,
    x3: frame.x3 ? `${frame.x3[0]} (${(frame.x3[1] * 100).toFixed(0)}%)` : "-",
    quality: frame.quality.toFixed(2),
  };
}

export interface TimelineEntry {
  clock: number;
  text: string;
  tone: "info" | "warn" | "ok" | "bad";
}

export function timelineEntry(kind: string, timestamp: number,
                              payload: Record<string, unknown>): TimelineEntry | null {
  const t = timestamp;
  switch (kind) {
    case "task_accepted": {
      const task = payload.task as { task_type?: string; location?: string } | undefined;
      return { clock: t, text: `task accepted: ${task?.task_type} -> ${task?.location}`, tone: "info" };
    }
    case "skill_started":
      return { clock: t, text: `skill started: ${payload.skill}`, tone: "info" };
    case "navigation_started":
      return { clock: t, text: `driving to ${payload.destination}`, tone: "info" };
    case "arm_at_check_pose":
      return { clock: t, text: `arm at check pose (${payload.station})`, tone: "info" };
    case "mid_voc_read":
      return { clock: t, text: `probe VOC read: ${payload.x2} PPM`, tone: "warn" };
    case "halted":
      return { clock: t, text: "robot halted on a trigger", tone: "warn" };
    case "alert_raised":
      return { clock: t, text: "operator alert raised", tone: "bad" };
    case "consent_received":
      return { clock: t, text: `consent: ${payload.command}`, tone: "ok" };
    case "resumed":
      return { clock: t, text: "task resumed", tone: "ok" };
    case "hazard_injected":
      return { clock: t, text: `hazard injected: ${payload.kind}`, tone: "warn" };
    case "task_done":
      return { clock: t, text: `task done in ${payload.duration}s`, tone: "ok" };
    case "task_failed":
      return { clock: t, text: `task failed (${payload.failure_mode})`, tone: "bad" };
    default:
      return null;
  }
}

const VOC_KINDS = new Set(["spillage", "vial", "uncapped_vial", "knocked_vial"]);
const CHEMICALS = new Set(["acetone", "ethanol", "isopropanol"]);

export function validateInjection(form: InjectForm): string | null {
  if (!form.kind) return "pick a hazard kind";
  if (!form.label) return "a ground-truth label is required";
  if (!Number.isFinite(form.x) || !Number.isFinite(form.y)) {
    return "position must be numeric";
  }
  if (VOC_KINDS.has(form.kind)) {
    if (!form.chemical) return `hazard kind '${form.kind}' needs a chemical`;
    if (!CHEMICALS.has(form.chemical)) return `unknown chemical '${form.chemical}'`;
  } else if (form.chemical) {
    return `hazard kind '${form.kind}' does not carry a chemical`;
  }
  return null;
}

export function phaseBadge(state: ConsoleState): string {
  switch (state.phase) {
    case "idle":
      return "idle";
    case "running":
      return state.active_skill ? `running ${state.active_skill}` : "running";
    case "done":
      return "completed";
    case "failed":
      return `failed: ${state.failure_mode ?? "unknown"}`;
  }
}
