"""The two safety skills: monitored navigation and inspect-before-manipulate.

Leaf behaviors close over a SkillRuntime that owns the world, the sensor
suite and the outcome record. Trigger handling is episodic: a trigger opens
an episode, the classifier runs once per episode, and the episode closes on
auto-resume or operator consent. Consenting to continue models the operator
clearing the offending hazard; an auto-resume acknowledges the benign
sources so they stop re-triggering the monitors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import config, dsl
from .bt import Blackboard, LeafRegistry, NodeStatus, tick
from .decision import Action, severity_max
from .sensors import (
    ModalityFrame,
    SensorSuite,
    ambient_channels,
    sample_classifier,
    sample_vision_binary,
    sample_voc,
    scene_truth_label,
    voc_contributors,
)
from .world import ScenarioSpec, StateViolationError, Station, TaskSpec, WorldState

CIN_LEAVES = (
    "StartToNode",
    "NoHazardDetected",
    "StopRobot",
    "HazardClassifiedSafe",
    "AlertUser",
    "GetConsentToContinue",
    "ResumeNavigation",
)
IBM_LEAVES = (
    "InitialVocOk",
    "CalibrationAndMoveCheck",
    "VisionBinaryClear",
    "HazardClassifiedSafe",
    "MidVocMonitor",
    "AlertUser",
    "GetConsentToContinue",
    "ExecuteManipulation",
)


class SkillError(Exception):
    pass


@dataclass
class AlertPayload:
    x1: Optional[int]
    x2: Optional[int]
    x3: Optional[tuple[str, float]]
    scenario_id: str
    pose: tuple[float, float]
    tick_index: int
    hazard_summary: str
    timestamp: float

    def as_dict(self) -> dict:
        return {
            "x1": self.x1,
            "x2": self.x2,
            "x3": list(self.x3) if self.x3 else None,
            "snapshot": {
                "scenario_id": self.scenario_id,
                "pose": [round(self.pose[0], 3), round(self.pose[1], 3)],
                "tick": self.tick_index,
            },
            "hazard_summary": self.hazard_summary,
            "timestamp": round(self.timestamp, 3),
        }


@dataclass
class ConsentWait:
    start: float
    end: Optional[float] = None
    granted: bool = False


@dataclass
class SkillOutcome:
    skill: str
    actions: list[Action] = field(default_factory=list)
    halts: int = 0
    alerts: list[AlertPayload] = field(default_factory=list)
    consent_waits: list[ConsentWait] = field(default_factory=list)
    task_duration: float = 0.0
    completed: bool = False
    workflow_failure: bool = False
    aborted: bool = False

    @property
    def final_action(self) -> Action:
        action = Action.PROCEED
        for a in self.actions:
            action = severity_max(action, a)
        return action

    def record_action(self, action: Action) -> None:
        self.actions.append(action)


class ConsentSource:
    """Answers pending consent requests. poll returns 'continue', 'abort'
    or None while the operator has not answered yet."""

    def poll(self, now: float, waited: float) -> Optional[str]:
        raise NotImplementedError


class NoConsent(ConsentSource):
    def poll(self, now: float, waited: float) -> Optional[str]:
        return None


class AutoConsent(ConsentSource):
    """Grants continue after a fixed or sampled delay per request."""

    def __init__(self, delay: float = 0.0,
                 delay_range: Optional[tuple[float, float]] = None,
                 rng: Optional[np.random.Generator] = None):
        self.delay = delay
        self.delay_range = delay_range
        self.rng = rng or np.random.default_rng(0)
        self._pending_delay: Optional[float] = None

    def next_delay(self) -> float:
        if self.delay_range is not None:
            lo, hi = self.delay_range
            return float(self.rng.uniform(lo, hi))
        return self.delay

    def poll(self, now: float, waited: float) -> Optional[str]:
        if self._pending_delay is None:
            self._pending_delay = self.next_delay()
        if waited >= self._pending_delay:
            self._pending_delay = None
            return "continue"
        return None


class QueueConsent(ConsentSource):
    """Externally fed source; the orchestrator pushes operator commands."""

    def __init__(self):
        self._commands: list[str] = []
        self.waiting = False

    def push(self, command: str) -> None:
        self._commands.append(command)

    def poll(self, now: float, waited: float) -> Optional[str]:
        if self._commands:
            return self._commands.pop(0)
        return None


@dataclass
class _Episode:
    kind: str                       # nav | initial | vision
    frame: ModalityFrame
    pose: tuple[float, float]
    contributors: set[int]
    summary: str
    label: Optional[tuple[str, float]] = None
    mid_voc: Optional[int] = None
    halted: bool = False
    alerted: bool = False
    consent_started: Optional[float] = None
    consent_done: bool = False


def build_cin_tree() -> dsl.TreeDocument:
    return dsl.parse(config.data_path("trees", "cin.bt").read_text(encoding="utf-8"))


def build_ibm_tree() -> dsl.TreeDocument:
    return dsl.parse(config.data_path("trees", "ibm.bt").read_text(encoding="utf-8"))


def stub_registry(names=CIN_LEAVES + IBM_LEAVES) -> LeafRegistry:
    """Registry whose leaves only succeed; enough for tree validation."""
    registry = LeafRegistry()
    for name in dict.fromkeys(names):
        registry.register(name, lambda bb, params: NodeStatus.SUCCESS)
    return registry


class SkillRuntime:
    """Binds the leaf behaviors of one skill run to a world and sensors."""

    def __init__(self, skill: str, task: TaskSpec, world: WorldState, suite: SensorSuite,
                 consent: Optional[ConsentSource] = None, scenario_id: str = "",
                 emit: Optional[Callable[[str, dict], None]] = None):
        if skill not in ("cin", "ibm"):
            raise SkillError(f"unknown skill {skill!r}")
        self.skill = skill
        self.task = task
        self.world = world
        self.suite = suite
        self.consent = consent or NoConsent()
        self.scenario_id = scenario_id
        self.emit = emit or (lambda kind, payload: None)
        self.outcome = SkillOutcome(skill=skill)
        self.episode: Optional[_Episode] = None
        self.acked: set[int] = set()
        self.bb = Blackboard()
        self._dwell_quota = config.CIN_MONITOR_PERIOD_S
        self._initial_done = False
        self._vision_clear = False

    # -- helpers ---------------------------------------------------------------

    def station(self) -> Station:
        return self.world.station_for(self.task.location)

    def _summarize(self, hazards) -> str:
        if not hazards:
            return "no named source"
        return "; ".join(f"{h.kind} at ({h.x:.2f}, {h.y:.2f})" for h in hazards)

    def _open_episode(self, kind: str, frame: ModalityFrame, pose, hazards) -> None:
        self.episode = _Episode(
            kind=kind,
            frame=frame,
            pose=pose,
            contributors={h.hazard_id for h in hazards},
            summary=self._summarize(hazards),
        )
        self.outcome.halts += 1
        self.emit("halted", {"kind": kind, "x1": frame.x1, "x2": frame.x2})

    def _close_episode(self) -> None:
        self.episode = None

    def _sample_nav_frame(self) -> ModalityFrame:
        world, suite = self.world, self.suite
        pose = world.robot.position
        x1, quality = sample_vision_binary(world, pose, suite.nav_vision, suite.rng, exclude=self.acked)
        if quality < suite.nav_vision.min_quality:
            x1, quality = sample_vision_binary(world, pose, suite.nav_vision, suite.rng, exclude=self.acked)
        x2 = sample_voc(world, pose, suite.olfactory, suite.rng, exclude=self.acked)
        frame = ModalityFrame(
            x1=x1, x2=x2, quality=quality, timestamp=world.clock,
            extra_channels=ambient_channels(suite.olfactory, suite.rng),
        )
        self.bb.set("frame", frame)
        world.last_frame = frame
        return frame

    def _classify(self, pose) -> tuple[str, float]:
        self.world.dwell(config.CLASSIFY_DWELL_S)
        label, score = sample_classifier(
            self.world, pose, self.suite.classifier, self.suite.labels, self.suite.rng,
            truth_label=scene_truth_label(self.world, pose, exclude=self.acked),
        )
        return label, score

    # -- shared leaves -----------------------------------------------------------

    def leaf_hazard_classified_safe(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is None:
            return NodeStatus.SUCCESS
        if ep.label is None:
            ep.label = self._classify(ep.pose)
            ep.frame.x3 = ep.label
            if ep.label[0] in self.suite.labels.safe:
                self.outcome.record_action(Action.HALT_AUTO_RESUME)
        if ep.label[0] in self.suite.labels.safe:
            return NodeStatus.SUCCESS
        return NodeStatus.FAILURE

    def leaf_alert_user(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is None:
            return NodeStatus.SUCCESS
        if not ep.alerted:
            self.world.dwell(config.ALERT_DWELL_S)
            x2 = ep.mid_voc if ep.mid_voc is not None else ep.frame.x2
            alert = AlertPayload(
                x1=ep.frame.x1,
                x2=x2,
                x3=ep.label,
                scenario_id=self.scenario_id,
                pose=ep.pose,
                tick_index=self.bb.tick_index,
                hazard_summary=ep.summary,
                timestamp=self.world.clock,
            )
            self.outcome.alerts.append(alert)
            self.outcome.record_action(Action.HALT_AWAIT_CONSENT)
            ep.alerted = True
            self.emit("alert_raised", alert.as_dict())
        return NodeStatus.SUCCESS

    def leaf_get_consent(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is None:
            return NodeStatus.SUCCESS
        now = self.world.clock
        if ep.consent_started is None:
            ep.consent_started = now
            self.outcome.consent_waits.append(ConsentWait(start=now))
        waited = now - ep.consent_started
        answer = self.consent.poll(now, waited)
        if answer is None:
            if waited >= config.ABORT_TIMEOUT_S:
                self.outcome.aborted = True
                self.outcome.consent_waits[-1].end = now
                return NodeStatus.FAILURE
            return NodeStatus.RUNNING
        wait = self.outcome.consent_waits[-1]
        wait.end = now
        if answer == "abort":
            self.outcome.aborted = True
            self.emit("consent_received", {"command": "abort"})
            return NodeStatus.FAILURE
        wait.granted = True
        ep.consent_done = True
        cleared = self.world.clear_unsafe_hazards()
        self.emit("consent_received", {"command": "continue", "cleared": len(cleared)})
        if self.skill == "ibm":
            # no dedicated resume leaf on this path; the pipeline continues
            self.acked |= ep.contributors
            self._close_episode()
            self.emit("resumed", {})
        return NodeStatus.SUCCESS

    # -- navigation leaves ---------------------------------------------------------

    def leaf_start_to_node(self, bb, params) -> NodeStatus:
        world = self.world
        if not bb.get("nav_started"):
            world.begin_navigation(self.task.location)
            bb.set("nav_started", True)
            self.emit("navigation_started", {"destination": self.task.location})
        if world.at_destination(self.task.location):
            return NodeStatus.SUCCESS
        return NodeStatus.RUNNING

    def leaf_no_hazard_detected(self, bb, params) -> NodeStatus:
        if self.episode is not None:
            return NodeStatus.FAILURE
        world, suite = self.world, self.suite
        # periodic full-pipeline sync pause while the base is driving
        if world.robot.moving_time >= self._dwell_quota:
            world.dwell(config.CIN_MONITOR_DWELL_S)
            self._dwell_quota += config.CIN_MONITOR_PERIOD_S
        frame = self._sample_nav_frame()
        if frame.x1 == 1 or frame.x2 > suite.t_safe:
            pose = world.robot.position
            seen = [
                h for h in world.hazards_ahead()
                if h.hazard_id not in self.acked
            ] + [
                h for h in voc_contributors(world, pose, suite.olfactory)
                if h.hazard_id not in self.acked
            ]
            self._open_episode("nav", frame, pose, seen)
            return NodeStatus.FAILURE
        return NodeStatus.SUCCESS

    def leaf_stop_robot(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is not None and not ep.halted:
            if self.world.robot.motion_state == "navigating":
                self.world.halt_robot()
                self.world.dwell(config.STOP_LATENCY_S)
            ep.halted = True
        return NodeStatus.SUCCESS

    def leaf_resume_navigation(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is not None:
            self.acked |= ep.contributors
            self.world.acknowledge_hazards(ep.contributors)
            self._close_episode()
        if self.world.robot.motion_state == "halted":
            self.world.resume_robot()
            self.world.dwell(config.RESUME_DWELL_S)
            self.emit("resumed", {})
        return NodeStatus.SUCCESS

    # -- manipulation leaves ----------------------------------------------------------

    def leaf_initial_voc_ok(self, bb, params) -> NodeStatus:
        if self.episode is not None and self.episode.kind == "initial":
            return NodeStatus.FAILURE
        if self._initial_done:
            return NodeStatus.SUCCESS
        world, suite = self.world, self.suite
        world.dwell(config.INITIAL_VOC_READ_S)
        pose = world.robot.position
        x2 = sample_voc(world, pose, suite.olfactory, suite.rng, exclude=self.acked)
        frame = ModalityFrame(
            x1=0, x2=x2, quality=1.0, timestamp=world.clock,
            extra_channels=ambient_channels(suite.olfactory, suite.rng),
        )
        self.bb.set("frame", frame)
        world.last_frame = frame
        self._initial_done = True
        if x2 < suite.t_safe:
            return NodeStatus.SUCCESS
        contributors = [
            h for h in voc_contributors(world, pose, suite.olfactory)
            if h.hazard_id not in self.acked
        ]
        self._open_episode("initial", frame, pose, contributors)
        return NodeStatus.FAILURE

    def leaf_calibration_and_move_check(self, bb, params) -> NodeStatus:
        station = self.station()
        self.world.arm_move_to_check_pose(station)
        self.world.dwell(config.MOVE_TO_CHECK_S[station.station_id])
        self.emit("arm_at_check_pose", {"station": station.station_id})
        return NodeStatus.SUCCESS

    def leaf_vision_binary_clear(self, bb, params) -> NodeStatus:
        if self.episode is not None and self.episode.kind == "vision":
            return NodeStatus.FAILURE
        if self._vision_clear:
            return NodeStatus.SUCCESS
        world, suite = self.world, self.suite
        station = self.station()
        world.dwell(config.BINARY_INSPECT_S)
        pose = station.grasp_frame
        x1, quality = sample_vision_binary(world, pose, suite.check_vision, suite.rng, exclude=self.acked)
        if quality < suite.check_vision.min_quality:
            x1, quality = sample_vision_binary(world, pose, suite.check_vision, suite.rng, exclude=self.acked)
        x2 = self.bb.get("frame").x2 if self.bb.get("frame") else 0
        frame = ModalityFrame(x1=x1, x2=x2, quality=quality, timestamp=world.clock)
        self.bb.set("frame", frame)
        world.last_frame = frame
        if x1 == 0:
            self._vision_clear = True
            return NodeStatus.SUCCESS
        seen = [
            h for h in world.hazards_in_radius(pose, suite.check_vision.check_radius)
            if h.hazard_id not in self.acked
        ]
        self._open_episode("vision", frame, pose, seen)
        return NodeStatus.FAILURE

    def leaf_mid_voc_monitor(self, bb, params) -> NodeStatus:
        ep = self.episode
        if ep is None or ep.mid_voc is not None:
            return NodeStatus.SUCCESS
        ep.mid_voc = mid_olfactory_sensing(self.world, self.station(), self.suite)
        self.emit("mid_voc_read", {"x2": ep.mid_voc})
        return NodeStatus.SUCCESS

    def leaf_execute_manipulation(self, bb, params) -> NodeStatus:
        station = self.station()
        self.world.dwell(config.MANIPULATION_S[self.task.name])
        ok = self.world.execute_manipulation(station, self.task.name)
        if not ok:
            self.outcome.workflow_failure = True
            return NodeStatus.FAILURE
        return NodeStatus.SUCCESS

    # -- registry ------------------------------------------------------------------

    def registry(self) -> LeafRegistry:
        registry = LeafRegistry()
        registry.register("StartToNode", self.leaf_start_to_node)
        registry.register("NoHazardDetected", self.leaf_no_hazard_detected)
        registry.register("StopRobot", self.leaf_stop_robot)
        registry.register("HazardClassifiedSafe", self.leaf_hazard_classified_safe)
        registry.register("AlertUser", self.leaf_alert_user)
        registry.register("GetConsentToContinue", self.leaf_get_consent)
        registry.register("ResumeNavigation", self.leaf_resume_navigation)
        registry.register("InitialVocOk", self.leaf_initial_voc_ok)
        registry.register("CalibrationAndMoveCheck", self.leaf_calibration_and_move_check)
        registry.register("VisionBinaryClear", self.leaf_vision_binary_clear)
        registry.register("MidVocMonitor", self.leaf_mid_voc_monitor)
        registry.register("ExecuteManipulation", self.leaf_execute_manipulation)
        return registry


def mid_olfactory_sensing(world: WorldState, station: Station, suite: SensorSuite) -> int:
    """Deck pickup, probe positioning and a VOC read at the grasp frame."""
    if world.robot.arm_state != "at_check_pose":
        raise StateViolationError("mid olfactory sensing requires the arm at the check pose")
    world.dwell(config.MID_VOC_OPS_S[station.station_id])
    return sample_voc(world, station.probe_pose, suite.olfactory, suite.rng)


def run_skill(skill: str, task: TaskSpec, world: WorldState, suite: SensorSuite,
              consent: Optional[ConsentSource] = None, *, scenario_id: str = "",
              emit: Optional[Callable[[str, dict], None]] = None,
              dt: float = config.TICK_DT,
              start_jitter: bool = True,
              on_tick: Optional[Callable[[WorldState], None]] = None,
              collect: Optional[dict] = None) -> SkillOutcome:
    """Tick a skill tree against the stepping world until it resolves."""
    runtime = SkillRuntime(skill, task, world, suite, consent, scenario_id, emit)
    doc = build_cin_tree() if skill == "cin" else build_ibm_tree()
    registry = runtime.registry()
    bb = runtime.bb
    start_clock = world.clock
    if start_jitter and config.START_JITTER_MAX_S > 0:
        world.dwell(float(suite.rng.uniform(0.0, config.START_JITTER_MAX_S)))
    status = NodeStatus.RUNNING
    hard_cap = start_clock + 4 * config.ABORT_TIMEOUT_S + 3600.0
    while True:
        bb.now = world.clock
        status = tick(doc.root, bb, registry)
        if status is not NodeStatus.RUNNING:
            break
        world.step(dt)
        if on_tick is not None:
            on_tick(world)
        if world.clock > hard_cap:
            runtime.outcome.aborted = True
            break
    outcome = runtime.outcome
    outcome.task_duration = world.clock - start_clock
    outcome.completed = status is NodeStatus.SUCCESS and not outcome.aborted
    if collect is not None:
        collect["traces"] = bb.traces
        collect["blackboard"] = bb
    return outcome


def run_bare(task: TaskSpec, world: WorldState, suite: SensorSuite, *,
             dt: float = config.TICK_DT, start_jitter: bool = True,
             emit: Optional[Callable[[str, dict], None]] = None,
             on_tick: Optional[Callable[[WorldState], None]] = None) -> SkillOutcome:
    """Unmonitored execution: drive or manipulate with no safety skill."""
    outcome = SkillOutcome(skill="nse")
    send = emit or (lambda kind, payload: None)
    start_clock = world.clock
    if start_jitter and config.START_JITTER_MAX_S > 0:
        world.dwell(float(suite.rng.uniform(0.0, config.START_JITTER_MAX_S)))
    if task.kind == "nav":
        world.begin_navigation(task.location)
        send("navigation_started", {"destination": task.location})
        hard_cap = world.clock + 3600.0
        while not world.at_destination(task.location):
            world.step(dt)
            if on_tick is not None:
                on_tick(world)
            hit = world.collision_check()
            if hit is not None:
                world.workflow_failure = "collision"
                outcome.workflow_failure = True
                break
            if world.clock > hard_cap:
                outcome.aborted = True
                break
        outcome.completed = not outcome.workflow_failure and not outcome.aborted
    elif task.kind == "lbr":
        station = world.station_for(task.location)
        world.dwell(config.MANIPULATION_S[task.name])
        ok = world.execute_manipulation(station, task.name)
        outcome.workflow_failure = not ok
        outcome.completed = ok
    else:
        raise SkillError(f"bare execution does not handle task kind {task.kind!r}")
    outcome.task_duration = world.clock - start_clock
    return outcome


def run_scenario(spec: ScenarioSpec, mode: str = "skilled",
                 consent: Optional[ConsentSource] = None,
                 suite: Optional[SensorSuite] = None, *,
                 emit: Optional[Callable[[str, dict], None]] = None,
                 on_tick: Optional[Callable[[WorldState], None]] = None,
                 collect: Optional[dict] = None) -> SkillOutcome:
    """Load a scenario's world and execute its task once."""
    world = spec.build_world()
    suite = suite or SensorSuite.deterministic(seed=spec.seed)
    if collect is not None:
        collect["world"] = world
    if mode == "nse":
        return run_bare(spec.task, world, suite, emit=emit, on_tick=on_tick)
    if mode != "skilled":
        raise SkillError(f"unknown mode {mode!r}")
    if consent is None:
        lo, hi = config.CONSENT_DELAY_RANGE_S[spec.consent_class]
        consent = AutoConsent(delay_range=(lo, hi), rng=np.random.default_rng(spec.seed + 7))
    return run_skill(
        spec.skill, spec.task, world, suite, consent,
        scenario_id=spec.scenario_id, emit=emit, on_tick=on_tick, collect=collect,
    )
