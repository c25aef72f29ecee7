// Pure event-fold console state. This mirrors the gateway's own reducer:
// the rendered model is a function of (snapshot, event prefix) only, so a
// reconnecting client that replays from its cursor converges on exactly the
// state an uninterrupted client holds.

import type { AlertPayload, ConsoleState, HazardInfo, ModalityFrame, RobotPose, TaskInfo, WireEvent } from "./types.js";

export function initialState(): ConsoleState {
  return {
    task: null,
    phase: "idle",
    active_skill: null,
    robot: { x: 0.0, y: 0.0, motion: "idle", arm: "stowed" },
    clock: 0.0,
    last_frame: null,
    pending_alerts: [],
    resolved_alerts: 0,
    halts: 0,
    hazards: [],
    failure_mode: null,
  };
}

export function applyEvent(state: ConsoleState, event: WireEvent): ConsoleState {
  const payload = event.payload ?? {};
  state.clock = event.timestamp;
  switch (event.kind) {
    case "task_accepted":
      state.task = (payload.task as TaskInfo) ?? null;
      state.phase = "running";
      state.failure_mode = null;
      break;
    case "skill_started":
      state.active_skill = (payload.skill as string) ?? null;
      break;
    case "telemetry":
      if (payload.robot) state.robot = payload.robot as RobotPose;
      if (payload.frame !== null && payload.frame !== undefined) {
        state.last_frame = payload.frame as ModalityFrame;
      }
      break;
    case "halted":
      state.halts += 1;
      break;
    case "alert_raised":
      state.pending_alerts = [...state.pending_alerts, payload as unknown as AlertPayload];
      break;
    case "consent_received":
      if (state.pending_alerts.length > 0) {
        state.pending_alerts = state.pending_alerts.slice(1);
        state.resolved_alerts += 1;
      }
      break;
    case "hazard_injected":
      state.hazards = [...state.hazards, payload as unknown as HazardInfo];
      break;
    case "task_done":
      state.phase = "done";
      state.active_skill = null;
      break;
    case "task_failed":
      state.phase = "failed";
      state.active_skill = null;
      state.failure_mode = (payload.failure_mode as string) ?? null;
      break;
    default:
      break;
  }
  return state;
}

export function replay(events: WireEvent[], base?: ConsoleState): ConsoleState {
  const state = base ?? initialState();
  for (const event of events) applyEvent(state, event);
  return state;
}

export function cloneState(state: ConsoleState): ConsoleState {
  return JSON.parse(JSON.stringify(state)) as ConsoleState;
}
