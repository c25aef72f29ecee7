"""Discrete-time simulated laboratory.

A WorldState owns the clock, a small navigation graph, the robot base and
arm, stations, and the hazard entities a scenario injects. Sensors query it
for ground truth; they never mutate it. All randomness is confined to
sensor sampling, so (scenario, seed) fully determines the trajectory.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field
from typing import Optional

from . import config
from .decision import Action


class WorldError(Exception):
    pass


class UnreachableNodeError(WorldError):
    pass


class StateViolationError(WorldError):
    pass


class ScenarioLoadError(WorldError):
    pass


@dataclass
class HazardEntity:
    kind: str
    x: float
    y: float
    label: str
    chemical: Optional[str] = None
    containment: str = "spilled"
    emission_scale: float = 1.0
    visible: bool = True
    appears_at: float = 0.0
    on_path: bool = False
    in_interaction_zone: bool = False
    unsafe_ground_truth: bool = False
    # runtime flags
    active: bool = False
    cleared: bool = False
    acknowledged: bool = False
    hazard_id: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def emits_voc(self) -> bool:
        return self.chemical is not None and self.active and not self.cleared


@dataclass
class Station:
    station_id: str
    node: str
    position: tuple[float, float]
    check_pose: tuple[float, float]
    grasp_frame: tuple[float, float]
    probe_pose: tuple[float, float]
    rack_slots: int = 0


@dataclass
class RobotState:
    x: float = 0.0
    y: float = 0.0
    heading: tuple[float, float] = (1.0, 0.0)
    speed: float = config.BASE_SPEED_MPS
    arm_state: str = "stowed"        # stowed | at_check_pose | manipulating
    motion_state: str = "idle"       # idle | navigating | halted
    destination: Optional[str] = None
    path_points: list[tuple[float, float]] = field(default_factory=list)
    path_index: int = 0
    distance_travelled: float = 0.0
    moving_time: float = 0.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# ---------------------------------------------------------------------------
# Maps

def lab_map() -> tuple[dict[str, tuple[float, float]], list[tuple[str, str]]]:
    nodes = {
        "dock": (0.0, 0.0),
        "mid": (30.0, 0.0),
        "capping": (59.55, 0.0),
        "chemspeed": (63.55, 0.0),
        "annex": (0.0, 30.0),  # intentionally disconnected
    }
    edges = [("dock", "mid"), ("mid", "capping"), ("capping", "chemspeed")]
    return nodes, edges


def lab_stations() -> dict[str, Station]:
    return {
        "capping": Station(
            station_id="capping",
            node="capping",
            position=(59.55, 0.0),
            check_pose=(59.55, 0.9),
            grasp_frame=(59.55, 2.0),
            probe_pose=(59.55, 1.75),
            rack_slots=8,
        ),
        "chemspeed": Station(
            station_id="chemspeed",
            node="chemspeed",
            position=(63.55, 0.0),
            check_pose=(63.55, 0.9),
            grasp_frame=(63.55, 2.0),
            probe_pose=(63.55, 1.75),
            rack_slots=3,
        ),
    }


MAPS = {"lab": (lab_map, lab_stations)}


class WorldState:
    def __init__(self, map_name: str = "lab"):
        if map_name not in MAPS:
            raise ScenarioLoadError(f"unknown map {map_name!r}")
        build_map, build_stations = MAPS[map_name]
        self.map_name = map_name
        self.nodes, self.edges = build_map()
        self.stations = build_stations()
        self.robot = RobotState()
        self.clock = 0.0
        self.hazards: list[HazardEntity] = []
        self.workflow_failure: Optional[str] = None
        self.manipulation_log: list[str] = []
        self.last_frame = None  # latest ModalityFrame, published for telemetry
        self._next_hazard_id = 1

    # -- hazards -------------------------------------------------------------

    def add_hazard(self, hazard: HazardEntity) -> HazardEntity:
        hazard.hazard_id = self._next_hazard_id
        self._next_hazard_id += 1
        if hazard.appears_at <= self.clock:
            hazard.active = True
        self.hazards.append(hazard)
        return hazard

    def active_hazards(self) -> list[HazardEntity]:
        return [h for h in self.hazards if h.active and not h.cleared]

    def clear_unsafe_hazards(self) -> list[HazardEntity]:
        """Operator remediation: consenting to continue removes the hazards
        that forced the halt."""
        cleared = []
        for h in self.active_hazards():
            if h.unsafe_ground_truth:
                h.cleared = True
                cleared.append(h)
        return cleared

    def acknowledge_hazards(self, hazard_ids: set[int]) -> None:
        for h in self.hazards:
            if h.hazard_id in hazard_ids:
                h.acknowledged = True

    def _materialize(self) -> None:
        for h in self.hazards:
            if not h.active and h.appears_at <= self.clock:
                h.active = True

    # -- time ----------------------------------------------------------------

    def step(self, dt: float) -> None:
        if dt <= 0:
            raise WorldError("step size must be positive")
        self.clock += dt
        self._materialize()
        if self.robot.motion_state == "navigating":
            self._advance_robot(dt)

    def dwell(self, seconds: float) -> None:
        """Advance the clock without base motion (sensor reads, arm moves)."""
        if seconds < 0:
            raise WorldError("dwell must be non-negative")
        self.clock += seconds
        self._materialize()

    def _advance_robot(self, dt: float) -> None:
        robot = self.robot
        remaining = robot.speed * dt
        robot.moving_time += dt
        while remaining > 1e-12 and robot.path_index < len(robot.path_points):
            target = robot.path_points[robot.path_index]
            gap = _dist(robot.position, target)
            if gap <= remaining:
                robot.x, robot.y = target
                robot.distance_travelled += gap
                remaining -= gap
                robot.path_index += 1
            else:
                frac = remaining / gap
                robot.heading = ((target[0] - robot.x) / gap, (target[1] - robot.y) / gap)
                robot.x += (target[0] - robot.x) * frac
                robot.y += (target[1] - robot.y) * frac
                robot.distance_travelled += remaining
                remaining = 0.0
        if robot.path_index >= len(robot.path_points):
            robot.motion_state = "idle"
            robot.destination = None

    # -- navigation ----------------------------------------------------------

    def shortest_path(self, start: str, goal: str) -> list[str]:
        if start not in self.nodes or goal not in self.nodes:
            raise UnreachableNodeError(f"unknown node {start!r} or {goal!r}")
        adjacency: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            length = _dist(self.nodes[a], self.nodes[b])
            adjacency[a].append((b, length))
            adjacency[b].append((a, length))
        best: dict[str, float] = {start: 0.0}
        prev: dict[str, str] = {}
        queue = [(0.0, start)]
        while queue:
            cost, node = heapq.heappop(queue)
            if node == goal:
                break
            if cost > best.get(node, math.inf):
                continue
            for nxt, length in adjacency[node]:
                new_cost = cost + length
                if new_cost < best.get(nxt, math.inf):
                    best[nxt] = new_cost
                    prev[nxt] = node
                    heapq.heappush(queue, (new_cost, nxt))
        if goal not in best:
            raise UnreachableNodeError(f"no route from {start!r} to {goal!r}")
        path = [goal]
        while path[-1] != start:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def nearest_node(self) -> str:
        return min(self.nodes, key=lambda n: _dist(self.nodes[n], self.robot.position))

    def begin_navigation(self, dest_node: str) -> None:
        start = self.nearest_node()
        path = self.shortest_path(start, dest_node)
        points = [self.nodes[n] for n in path]
        robot = self.robot
        if _dist(robot.position, points[0]) > 1e-9:
            points.insert(0, robot.position)
        robot.path_points = points[1:] if len(points) > 1 else []
        robot.path_index = 0
        robot.destination = dest_node
        if not robot.path_points:
            robot.motion_state = "idle"
            robot.destination = None
            return
        first = robot.path_points[0]
        gap = _dist(robot.position, first)
        if gap > 1e-9:
            robot.heading = ((first[0] - robot.x) / gap, (first[1] - robot.y) / gap)
        robot.motion_state = "navigating"

    def halt_robot(self) -> None:
        if self.robot.motion_state != "navigating":
            raise StateViolationError("halt requested while not navigating")
        self.robot.motion_state = "halted"

    def resume_robot(self) -> None:
        if self.robot.motion_state != "halted":
            raise StateViolationError("resume requested while not halted")
        self.robot.motion_state = "navigating"

    def at_destination(self, dest_node: str) -> bool:
        return (
            self.robot.motion_state == "idle"
            and _dist(self.robot.position, self.nodes[dest_node]) < 1e-6
        )

    # -- ground truth queries --------------------------------------------------

    def hazards_ahead(self, reach: float = config.NAV_VISION_AHEAD_M,
                      halfwidth: float = config.NAV_VISION_HALFWIDTH_M,
                      include_hidden: bool = False) -> list[HazardEntity]:
        robot = self.robot
        hx, hy = robot.heading
        out = []
        for h in self.active_hazards():
            if not include_hidden and not h.visible:
                continue
            dx, dy = h.x - robot.x, h.y - robot.y
            forward = dx * hx + dy * hy
            lateral = abs(-dx * hy + dy * hx)
            if 0.0 < forward <= reach and lateral <= halfwidth:
                out.append(h)
        return out

    def hazards_in_radius(self, center: tuple[float, float], radius: float,
                          include_hidden: bool = False) -> list[HazardEntity]:
        return [
            h for h in self.active_hazards()
            if (include_hidden or h.visible) and _dist(h.position, center) <= radius
        ]

    def hazards_in_interaction_zone(self) -> list[HazardEntity]:
        return [h for h in self.active_hazards() if h.in_interaction_zone]

    def ground_truth_query(self, region: str, radius: float = 1.0,
                           center: Optional[tuple[float, float]] = None) -> list[HazardEntity]:
        if region == "ahead_0.7m":
            return self.hazards_ahead()
        if region == "interaction_zone":
            return self.hazards_in_interaction_zone()
        if region == "radius":
            return self.hazards_in_radius(center or self.robot.position, radius, include_hidden=True)
        raise WorldError(f"unknown region {region!r}")

    # -- arm -------------------------------------------------------------------

    def station_for(self, station_id: str) -> Station:
        try:
            return self.stations[station_id]
        except KeyError:
            raise ScenarioLoadError(f"unknown station {station_id!r}") from None

    def rack_view(self, station: Station) -> list[str]:
        """Slot states derived from the live hazards; farthest slot catches
        the anomaly, matching where subtle failures hide."""
        slots = ["capped_vial"] * station.rack_slots
        slot_state = {
            "uncapped_vial": "uncapped_vial",
            "knocked_vial": "knocked",
            "missing_vial": "missing",
        }
        for h in self.active_hazards():
            state = slot_state.get(h.kind)
            if state and h.in_interaction_zone and _dist(h.position, station.grasp_frame) <= 1.0:
                slots[station.rack_slots - 1] = state
        return slots

    def tray_view(self, station: Station) -> str:
        for h in self.active_hazards():
            if not h.in_interaction_zone or _dist(h.position, station.grasp_frame) > 1.0:
                continue
            if h.kind == "broken_glass":
                return "broken_glass"
            if h.kind == "spillage":
                return "spillage"
        return "clean"

    def require_parked(self, station: Station) -> None:
        if self.robot.motion_state != "idle":
            raise StateViolationError("arm command while base is moving")
        if _dist(self.robot.position, station.position) > 0.5:
            raise StateViolationError(f"robot is not parked at station {station.station_id!r}")

    def arm_move_to_check_pose(self, station: Station) -> None:
        self.require_parked(station)
        self.robot.arm_state = "at_check_pose"

    def execute_manipulation(self, station: Station, task_name: str) -> bool:
        self.require_parked(station)
        self.robot.arm_state = "manipulating"
        blockers = [h for h in self.hazards_in_interaction_zone() if h.unsafe_ground_truth]
        self.robot.arm_state = "stowed"
        self.manipulation_log.append(task_name)
        if blockers:
            self.workflow_failure = "unsafe_manipulation"
            return False
        return True

    def collision_check(self) -> Optional[HazardEntity]:
        """Contact with an unmonitored on-path hazard; used by bare navigation."""
        for h in self.active_hazards():
            if h.on_path and h.unsafe_ground_truth:
                if _dist(h.position, self.robot.position) <= config.COLLISION_RADIUS_M:
                    return h
        return None


# ---------------------------------------------------------------------------
# Scenario files

_ACTIONS = {
    "proceed": Action.PROCEED,
    "halt_auto_resume": Action.HALT_AUTO_RESUME,
    "halt_await_consent": Action.HALT_AWAIT_CONSENT,
}

_BOOL = {"true": True, "yes": True, "false": False, "no": False}


@dataclass
class TaskSpec:
    kind: str              # nav | lbr | combined
    location: str          # destination node or station id
    name: str = ""         # manipulation name for lbr/combined


@dataclass
class ObservabilityScript:
    """Which modality can observe the scenario's hazard, for the
    deterministic modality-combination study."""
    vision: bool = False
    voc: bool = False            # smellable while driving (navigation scenarios)
    voc_initial: bool = False    # smellable from the station approach pose
    voc_mid: bool = False        # smellable at the probe pose
    vlm: bool = False            # visible to the scene classifier
    vlm_label: str = "no_problem_detected"
    sudden: bool = False         # defeats slow monitors


@dataclass
class ScenarioSpec:
    scenario_id: str
    skill: str               # cin | ibm
    task: TaskSpec
    seed: int
    expected_action: Action
    nominal_label: str
    map_name: str = "lab"
    robot_start: str = "dock"
    consent_class: str = "default"
    hazards: list[HazardEntity] = field(default_factory=list)
    script: Optional[ObservabilityScript] = None
    source_path: Optional[str] = None

    def build_world(self) -> WorldState:
        world = WorldState(self.map_name)
        if self.robot_start in world.nodes:
            world.robot.x, world.robot.y = world.nodes[self.robot_start]
        elif self.robot_start in world.stations:
            world.robot.x, world.robot.y = world.stations[self.robot_start].position
        else:
            raise ScenarioLoadError(f"unknown robot start {self.robot_start!r}")
        for h in self.hazards:
            clone = HazardEntity(**{
                k: getattr(h, k)
                for k in ("kind", "x", "y", "label", "chemical", "containment",
                          "emission_scale", "visible", "appears_at", "on_path",
                          "in_interaction_zone", "unsafe_ground_truth")
            })
            world.add_hazard(clone)
        return world


def _parse_kv_fields(rest: str, line_no: int) -> dict[str, str]:
    fields = {}
    for chunk in rest.split():
        if "=" not in chunk:
            raise ScenarioLoadError(f"line {line_no}: expected key=value, got {chunk!r}")
        key, _, value = chunk.partition("=")
        fields[key] = value
    return fields


def _hazard_from_fields(fields: dict[str, str], line_no: int, appears_at: float = 0.0) -> HazardEntity:
    try:
        kind = fields.pop("kind")
        x = float(fields.pop("x"))
        y = float(fields.pop("y"))
        label = fields.pop("label")
    except KeyError as exc:
        raise ScenarioLoadError(f"line {line_no}: hazard missing field {exc}") from None
    chemical = fields.pop("chemical", None)
    if chemical is not None and chemical not in config.CHEMICALS:
        raise ScenarioLoadError(f"line {line_no}: unknown chemical {chemical!r}")
    hazard = HazardEntity(
        kind=kind,
        x=x,
        y=y,
        label=label,
        chemical=chemical,
        containment=fields.pop("containment", "spilled"),
        emission_scale=float(fields.pop("scale", "1.0")),
        visible=_BOOL[fields.pop("visible", "true")],
        on_path=_BOOL[fields.pop("on_path", "false")],
        in_interaction_zone=_BOOL[fields.pop("zone", "false")],
        unsafe_ground_truth=_BOOL[fields.pop("unsafe", "false")],
        appears_at=appears_at,
    )
    if hazard.containment not in config.CONTAINMENT_FACTOR:
        raise ScenarioLoadError(f"line {line_no}: unknown containment {hazard.containment!r}")
    if fields:
        raise ScenarioLoadError(f"line {line_no}: unknown hazard fields {sorted(fields)}")
    return hazard


def parse_scenario(text: str, source_path: Optional[str] = None) -> ScenarioSpec:
    lines = text.splitlines()
    header_seen = False
    values: dict[str, str] = {}
    task: Optional[TaskSpec] = None
    hazards: list[HazardEntity] = []
    script: Optional[ObservabilityScript] = None

    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if not re.fullmatch(r"scenario\s+1", line):
                raise ScenarioLoadError(f"line {line_no}: expected version header 'scenario 1'")
            header_seen = True
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "task":
            parts = rest.split()
            if parts[0] == "nav" and len(parts) == 2:
                task = TaskSpec(kind="nav", location=parts[1])
            elif parts[0] == "lbr" and len(parts) == 3:
                task = TaskSpec(kind="lbr", name=parts[1], location=parts[2])
            elif parts[0] == "combined" and len(parts) == 3:
                task = TaskSpec(kind="combined", name=parts[2], location=parts[1])
            else:
                raise ScenarioLoadError(f"line {line_no}: bad task line {rest!r}")
        elif keyword == "hazard":
            hazards.append(_hazard_from_fields(_parse_kv_fields(rest, line_no), line_no))
        elif keyword == "inject":
            fields = _parse_kv_fields(rest, line_no)
            try:
                at = float(fields.pop("t"))
            except KeyError:
                raise ScenarioLoadError(f"line {line_no}: inject needs t=<seconds>") from None
            hazards.append(_hazard_from_fields(fields, line_no, appears_at=at))
        elif keyword == "script":
            fields = _parse_kv_fields(rest, line_no)
            script = ObservabilityScript(
                vision=_BOOL[fields.pop("vision", "no")],
                voc=_BOOL[fields.pop("voc", "no")],
                voc_initial=_BOOL[fields.pop("voc_initial", "no")],
                voc_mid=_BOOL[fields.pop("voc_mid", "no")],
                vlm=_BOOL[fields.pop("vlm", "no")],
                vlm_label=fields.pop("vlm_label", "no_problem_detected"),
                sudden=_BOOL[fields.pop("sudden", "no")],
            )
            if fields:
                raise ScenarioLoadError(f"line {line_no}: unknown script fields {sorted(fields)}")
        else:
            values[keyword] = rest

    if not header_seen:
        raise ScenarioLoadError("missing 'scenario 1' header")
    for required in ("id", "skill", "seed", "expected_action", "nominal_label"):
        if required not in values:
            raise ScenarioLoadError(f"scenario missing {required!r} line")
    if task is None:
        raise ScenarioLoadError("scenario missing task line")
    if values["expected_action"] not in _ACTIONS:
        raise ScenarioLoadError(f"unknown expected_action {values['expected_action']!r}")
    if values["skill"] not in ("cin", "ibm"):
        raise ScenarioLoadError(f"unknown skill {values['skill']!r}")

    spec = ScenarioSpec(
        scenario_id=values["id"],
        skill=values["skill"],
        task=task,
        seed=int(values["seed"]),
        expected_action=_ACTIONS[values["expected_action"]],
        nominal_label=values["nominal_label"],
        map_name=values.get("map", "lab"),
        robot_start=values.get("robot_start", "dock"),
        consent_class=values.get("consent_class", "default"),
        hazards=hazards,
        script=script,
        source_path=source_path,
    )
    _check_consistency(spec)
    return spec


def _check_consistency(spec: ScenarioSpec) -> None:
    any_unsafe = any(h.unsafe_ground_truth for h in spec.hazards)
    if any_unsafe and spec.expected_action is not Action.HALT_AWAIT_CONSENT:
        raise ScenarioLoadError(
            f"{spec.scenario_id}: unsafe hazard present but expected_action is "
            f"{spec.expected_action.value}"
        )
    if not any_unsafe and spec.expected_action is Action.HALT_AWAIT_CONSENT:
        raise ScenarioLoadError(
            f"{spec.scenario_id}: consent expected with no unsafe hazard"
        )


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source_path=str(path))


def load_shipped_scenario(scenario_id: str) -> ScenarioSpec:
    path = config.data_path("scenarios", f"{scenario_id.lower()}.scn")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ScenarioLoadError(f"no shipped scenario {scenario_id!r}") from None
    return parse_scenario(text, source_path=str(path))


def shipped_scenario_ids() -> list[str]:
    folder = config.data_path("scenarios")
    return sorted(p.name[:-4].upper() for p in folder.iterdir() if p.name.endswith(".scn"))
