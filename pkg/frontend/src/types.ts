// Wire types mirroring the gateway's JSON payloads.

export type EventKind =
  | "task_accepted"
  | "skill_started"
  | "navigation_started"
  | "arm_at_check_pose"
  | "mid_voc_read"
  | "halted"
  | "alert_raised"
  | "consent_received"
  | "resumed"
  | "task_done"
  | "task_failed"
  | "telemetry"
  | "hazard_injected";

export interface WireEvent {
  schema_version: number;
  seq: number;
  kind: EventKind;
  robot_task_id: string;
  tick: number;
  timestamp: number;
  payload: Record<string, unknown>;
}

export interface ModalityFrame {
  x1: number;
  x2: number;
  x3: [string, number] | null;
  quality: number;
  t: number;
}

export interface RobotPose {
  x: number;
  y: number;
  motion: string;
  arm: string;
}

export interface AlertPayload {
  x1: number | null;
  x2: number | null;
  x3: [string, number] | null;
  snapshot: { scenario_id: string; pose: [number, number]; tick: number };
  hazard_summary: string;
  timestamp: number;
}

export interface TaskInfo {
  task_type: string;
  task_name: string;
  location: string;
  robot_task_id: string;
}

export interface HazardInfo {
  kind: string;
  x: number;
  y: number;
  label: string;
  unsafe: boolean;
}

export interface ConsoleState {
  task: TaskInfo | null;
  phase: "idle" | "running" | "done" | "failed";
  active_skill: string | null;
  robot: RobotPose;
  clock: number;
  last_frame: ModalityFrame | null;
  pending_alerts: AlertPayload[];
  resolved_alerts: number;
  halts: number;
  hazards: HazardInfo[];
  failure_mode: string | null;
}

export interface Snapshot {
  session_id: string;
  scenario_id: string;
  mode: string;
  last_seq: number;
  busy: boolean;
  state: ConsoleState;
  record: Record<string, unknown> | null;
}

export interface SessionInfo {
  session_id: string;
  scenario_id: string;
  mode: string;
  busy: boolean;
  last_seq: number;
}

export interface InjectForm {
  kind: string;
  x: number;
  y: number;
  label: string;
  chemical: string | null;
  containment: string;
  unsafe: boolean;
  on_path: boolean;
  in_interaction_zone: boolean;
}

export const T_SAFE_PPM = 2.5;
