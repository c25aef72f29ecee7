"""Task protocol and session management around the two skills.

A session owns one world at a time. Tasks arrive as messages, run on a
worker thread (or inline for batch use), and publish a totally ordered,
gapless event stream that consoles can replay. Operator commands (consent,
hazard injection) funnel through the session's command queue and are applied
at tick boundaries, so wire and in-process consent share one code path.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import config
from .sensors import SensorSuite
from .skills import (
    AutoConsent,
    ConsentSource,
    QueueConsent,
    SkillOutcome,
    run_bare,
    run_skill,
)
from .world import HazardEntity, ScenarioSpec, TaskSpec, WorldState

SCHEMA_VERSION = 1

EVENT_KINDS = frozenset({
    "task_accepted",
    "skill_started",
    "navigation_started",
    "arm_at_check_pose",
    "mid_voc_read",
    "halted",
    "alert_raised",
    "consent_received",
    "resumed",
    "task_done",
    "task_failed",
    "telemetry",
    "hazard_injected",
})

VALID_TASK_TYPES = ("NAV", "LBR", "combined_task")


class OrchestratorError(Exception):
    pass


class InvalidTaskError(OrchestratorError):
    pass


class UnknownTaskError(OrchestratorError):
    pass


class NoPendingConsentError(OrchestratorError):
    pass


class UnknownSessionError(OrchestratorError):
    pass


@dataclass
class TaskMessage:
    task_type: str          # NAV | LBR | combined_task
    task_name: str
    location: str
    robot_task_id: str
    user_id: str = "operator"

    def validate(self, world: WorldState) -> None:
        if self.task_type not in VALID_TASK_TYPES:
            raise InvalidTaskError(f"unknown task type {self.task_type!r}")
        if self.task_type == "NAV":
            if self.location not in world.nodes:
                raise InvalidTaskError(f"NAV location {self.location!r} is not a graph node")
        else:
            if self.location not in world.stations:
                raise InvalidTaskError(f"{self.task_type} location {self.location!r} is not a station")
            if self.task_name not in config.MANIPULATION_S:
                raise InvalidTaskError(f"unknown manipulation {self.task_name!r}")


@dataclass
class WireEvent:
    seq: int
    kind: str
    robot_task_id: str
    tick: int
    timestamp: float
    payload: dict
    schema_version: int = SCHEMA_VERSION

    def as_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seq": self.seq,
            "kind": self.kind,
            "robot_task_id": self.robot_task_id,
            "tick": self.tick,
            "timestamp": round(self.timestamp, 3),
            "payload": self.payload,
        }


@dataclass
class RunRecord:
    task: TaskMessage
    scenario_id: str
    mode: str
    outcomes: dict[str, SkillOutcome] = field(default_factory=dict)
    total_duration: float = 0.0
    success: bool = False
    failure_mode: Optional[str] = None  # collision | unsafe_manipulation | abort

    def as_dict(self) -> dict:
        return {
            "task": {
                "task_type": self.task.task_type,
                "task_name": self.task.task_name,
                "location": self.task.location,
                "robot_task_id": self.task.robot_task_id,
                "user_id": self.task.user_id,
            },
            "scenario_id": self.scenario_id,
            "mode": self.mode,
            "total_duration": round(self.total_duration, 3),
            "success": self.success,
            "failure_mode": self.failure_mode,
            "skills": {
                name: {
                    "final_action": outcome.final_action.value,
                    "halts": outcome.halts,
                    "alerts": [a.as_dict() for a in outcome.alerts],
                    "consent_waits": [
                        {"start": round(w.start, 3),
                         "end": None if w.end is None else round(w.end, 3),
                         "granted": w.granted}
                        for w in outcome.consent_waits
                    ],
                    "duration": round(outcome.task_duration, 3),
                    "completed": outcome.completed,
                    "workflow_failure": outcome.workflow_failure,
                }
                for name, outcome in self.outcomes.items()
            },
        }


# ---------------------------------------------------------------------------
# Console-facing state reduction. The session folds every event it emits
# through this reducer, so a snapshot is by construction equal to replaying
# the event prefix. The browser console mirrors this logic.

def console_state_init() -> dict:
    return {
        "task": None,
        "phase": "idle",           # idle | running | done | failed
        "active_skill": None,
        "robot": {"x": 0.0, "y": 0.0, "motion": "idle", "arm": "stowed"},
        "clock": 0.0,
        "last_frame": None,
        "pending_alerts": [],
        "resolved_alerts": 0,
        "halts": 0,
        "hazards": [],
        "failure_mode": None,
    }


def console_state_apply(state: dict, event: dict) -> dict:
    kind = event["kind"]
    payload = event.get("payload", {})
    state["clock"] = event["timestamp"]
    if kind == "task_accepted":
        state["task"] = payload.get("task")
        state["phase"] = "running"
        state["failure_mode"] = None
    elif kind == "skill_started":
        state["active_skill"] = payload.get("skill")
    elif kind == "telemetry":
        state["robot"] = payload.get("robot", state["robot"])
        if payload.get("frame") is not None:
            state["last_frame"] = payload["frame"]
    elif kind == "halted":
        state["halts"] += 1
    elif kind == "alert_raised":
        state["pending_alerts"] = state["pending_alerts"] + [payload]
    elif kind == "consent_received":
        if state["pending_alerts"]:
            state["pending_alerts"] = state["pending_alerts"][1:]
            state["resolved_alerts"] += 1
    elif kind == "hazard_injected":
        state["hazards"] = state["hazards"] + [payload]
    elif kind == "task_done":
        state["phase"] = "done"
        state["active_skill"] = None
    elif kind == "task_failed":
        state["phase"] = "failed"
        state["active_skill"] = None
        state["failure_mode"] = payload.get("failure_mode")
    return state


# ---------------------------------------------------------------------------

class Session:
    """One world, one task at a time, one ordered event log."""

    _ids = itertools.count(1)

    def __init__(self, scenario: ScenarioSpec, mode: str = "skilled",
                 seed: Optional[int] = None, speed: float = 0.0,
                 deterministic_sensors: bool = True):
        if mode not in ("skilled", "nse"):
            raise OrchestratorError(f"unknown mode {mode!r}")
        self.session_id = f"session-{next(Session._ids)}"
        self.scenario = scenario
        self.mode = mode
        self.seed = scenario.seed if seed is None else seed
        self.speed = speed          # sim seconds per wall second; 0 = unpaced
        self.world = scenario.build_world()
        self.suite = (
            SensorSuite.deterministic(seed=self.seed)
            if deterministic_sensors
            else SensorSuite.stochastic(_task_key(scenario), self.seed)
        )
        self.events: list[WireEvent] = []
        self.console_state = console_state_init()
        self._snapshot: dict = {}
        self._seq = 0
        self._tick = 0
        self._lock = threading.Lock()
        self._new_event = threading.Condition(self._lock)
        self._commands: list[tuple[str, object]] = []
        self._consent = QueueConsent()
        self._pending_consent: Optional[str] = None
        self._thread: Optional[threading.Thread] = None
        self.record: Optional[RunRecord] = None
        self.current_task: Optional[TaskMessage] = None
        self._last_telemetry = 0.0
        self._publish_snapshot()
        # seed the stream with the starting pose so a late joiner's replay
        # and the live view agree from sequence one
        self._emit("telemetry", self._telemetry_payload())

    # -- events ---------------------------------------------------------------

    def _emit(self, kind: str, payload: dict, robot_task_id: Optional[str] = None) -> None:
        if kind not in EVENT_KINDS:
            raise OrchestratorError(f"refusing to emit unknown event kind {kind!r}")
        with self._new_event:
            self._seq += 1
            event = WireEvent(
                seq=self._seq,
                kind=kind,
                robot_task_id=robot_task_id
                or (self.current_task.robot_task_id if self.current_task else ""),
                tick=self._tick,
                timestamp=self.world.clock,
                payload=payload,
            )
            self.events.append(event)
            console_state_apply(self.console_state, event.as_dict())
            if kind == "alert_raised" and self.current_task is not None:
                self._pending_consent = self.current_task.robot_task_id
            if kind in ("consent_received", "task_done", "task_failed"):
                self._pending_consent = None
            self._publish_snapshot_locked()
            self._new_event.notify_all()

    def events_since(self, seq: int) -> list[WireEvent]:
        with self._lock:
            return [e for e in self.events if e.seq > seq]

    def wait_events(self, seq: int, timeout: float = 1.0) -> list[WireEvent]:
        deadline = time.monotonic() + timeout
        with self._new_event:
            while self._seq <= seq:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self._new_event.wait(remaining)
            return [e for e in self.events if e.seq > seq]

    # -- snapshot ---------------------------------------------------------------

    def _publish_snapshot(self) -> None:
        with self._lock:
            self._publish_snapshot_locked()

    def _publish_snapshot_locked(self) -> None:
        # the snapshot state is the fold of every emitted event, nothing
        # else, so snapshot plus tail replay equals a full replay exactly
        state = {k: (v.copy() if isinstance(v, (dict, list)) else v)
                 for k, v in self.console_state.items()}
        self._snapshot = {
            "session_id": self.session_id,
            "scenario_id": self.scenario.scenario_id,
            "mode": self.mode,
            "last_seq": self._seq,
            "busy": self._thread is not None and self._thread.is_alive(),
            "state": state,
            "record": self.record.as_dict() if self.record else None,
        }

    def snapshot(self) -> dict:
        with self._lock:
            snap = dict(self._snapshot)
            snap["busy"] = self.busy()
            return snap

    # -- commands ----------------------------------------------------------------

    def busy(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def deliver_consent(self, robot_task_id: str, command: str, user_id: str = "operator") -> dict:
        if command not in ("continue", "abort"):
            raise OrchestratorError(f"unknown consent command {command!r}")
        with self._lock:
            if self.current_task is None or robot_task_id != self.current_task.robot_task_id:
                raise UnknownTaskError(f"no task {robot_task_id!r} in this session")
            if self._pending_consent != robot_task_id:
                raise NoPendingConsentError("no consent is pending for this task")
            self._pending_consent = None
            self._consent.push(command)
        return {"accepted": True, "command": command, "user_id": user_id}

    def inject_hazard(self, hazard: HazardEntity) -> dict:
        with self._lock:
            self._commands.append(("inject", hazard))
        return {"accepted": True, "kind": hazard.kind}

    def _drain_commands(self) -> None:
        with self._lock:
            commands, self._commands = self._commands, []
        for kind, payload in commands:
            if kind == "inject":
                hazard: HazardEntity = payload
                hazard.appears_at = max(hazard.appears_at, self.world.clock)
                self.world.add_hazard(hazard)
                self._emit("hazard_injected", {
                    "kind": hazard.kind, "x": hazard.x, "y": hazard.y,
                    "label": hazard.label, "unsafe": hazard.unsafe_ground_truth,
                })

    # -- run loop ----------------------------------------------------------------

    def _telemetry_payload(self) -> dict:
        world = self.world
        frame = None
        live = world.last_frame
        if live is not None:
            frame = {
                "x1": live.x1, "x2": live.x2,
                "x3": list(live.x3) if live.x3 else None,
                "quality": round(live.quality, 3), "t": round(live.timestamp, 3),
            }
        return {
            "robot": {
                "x": round(world.robot.x, 3), "y": round(world.robot.y, 3),
                "motion": world.robot.motion_state, "arm": world.robot.arm_state,
            },
            "frame": frame,
            "clock": round(world.clock, 3),
        }

    def _on_tick(self, world: WorldState) -> None:
        self._tick += 1
        self._drain_commands()
        if world.clock - self._last_telemetry >= 1.0:
            self._last_telemetry = world.clock
            self._emit("telemetry", self._telemetry_payload())
        if self.speed > 0:
            time.sleep(config.TICK_DT / self.speed)

    def submit_task(self, msg: TaskMessage, wait: bool = True) -> Optional[RunRecord]:
        if self.busy():
            raise InvalidTaskError("session is busy with another task")
        msg.validate(self.world)
        with self._lock:
            self.current_task = msg
            self.record = None
        self._emit("task_accepted", {"task": {
            "task_type": msg.task_type, "task_name": msg.task_name,
            "location": msg.location, "robot_task_id": msg.robot_task_id,
        }})
        self._thread = threading.Thread(target=self._run_task, args=(msg,), daemon=True)
        self._thread.start()
        if wait:
            self._thread.join()
            return self.record
        return None

    def _consent_source(self) -> ConsentSource:
        return self._consent

    def _run_task(self, msg: TaskMessage) -> None:
        record = RunRecord(task=msg, scenario_id=self.scenario.scenario_id, mode=self.mode)
        world = self.world
        start = world.clock
        try:
            if msg.task_type == "NAV":
                legs: list[tuple[str, TaskSpec]] = [("cin", TaskSpec(kind="nav", location=msg.location))]
            elif msg.task_type == "LBR":
                legs = [("ibm", TaskSpec(kind="lbr", name=msg.task_name, location=msg.location))]
            else:
                station = world.station_for(msg.location)
                legs = [
                    ("cin", TaskSpec(kind="nav", location=station.node)),
                    ("ibm", TaskSpec(kind="lbr", name=msg.task_name, location=msg.location)),
                ]
            success = True
            for skill, task in legs:
                self._emit("skill_started", {"skill": skill if self.mode == "skilled" else "nse",
                                             "task_kind": task.kind})
                if self.mode == "skilled":
                    outcome = run_skill(
                        skill, task, world, self.suite, self._consent_source(),
                        scenario_id=self.scenario.scenario_id,
                        emit=self._wrap_emit(), on_tick=self._on_tick,
                    )
                    record.outcomes[skill] = outcome
                else:
                    outcome = run_bare(task, world, self.suite,
                                       emit=self._wrap_emit(), on_tick=self._on_tick)
                    record.outcomes[f"nse_{task.kind}"] = outcome
                if outcome.aborted:
                    success = False
                    record.failure_mode = "abort"
                    break
                if not outcome.completed:
                    success = False
                    record.failure_mode = world.workflow_failure or "abort"
                    break
            record.success = success
            record.total_duration = world.clock - start
        except Exception as exc:  # surface run crashes as failed tasks
            record.success = False
            record.failure_mode = record.failure_mode or "abort"
            record.total_duration = world.clock - start
            self._emit("task_failed", {"failure_mode": record.failure_mode, "error": str(exc)})
            with self._lock:
                self.record = record
            raise
        with self._lock:
            self.record = record
        self._emit("telemetry", self._telemetry_payload())
        if record.success:
            self._emit("task_done", {"duration": round(record.total_duration, 3)})
        else:
            self._emit("task_failed", {"failure_mode": record.failure_mode})

    def _wrap_emit(self) -> Callable[[str, dict], None]:
        def emit(kind: str, payload: dict) -> None:
            self._emit(kind, payload)
        return emit


def _task_key(scenario: ScenarioSpec) -> str:
    if scenario.task.kind == "nav":
        return "t1"
    return "t2" if scenario.task.location == "capping" else "t3"


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, scenario: ScenarioSpec, mode: str = "skilled",
               seed: Optional[int] = None, speed: float = 0.0) -> Session:
        session = Session(scenario, mode=mode, seed=seed, speed=speed)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSessionError(f"no session {session_id!r}") from None

    def list(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())


def submit_task(msg: TaskMessage, scenario: ScenarioSpec, mode: str = "skilled",
                consent: Optional[ConsentSource] = None,
                seed: Optional[int] = None) -> RunRecord:
    """Synchronous one-shot execution for batch callers."""
    session = Session(scenario, mode=mode, seed=seed)
    if consent is None and mode == "skilled":
        lo, hi = config.CONSENT_DELAY_RANGE_S[scenario.consent_class]
        consent = AutoConsent(delay_range=(lo, hi),
                              rng=np.random.default_rng(session.seed + 7))
    if consent is not None:
        session._consent_source = lambda: consent  # type: ignore[assignment]
    record = session.submit_task(msg, wait=True)
    assert record is not None
    return record


def status_stream(session: Session, from_seq: int = 0) -> Iterable[WireEvent]:
    """Events in causal order starting after from_seq."""
    return session.events_since(from_seq)
