"""Tick-driven behavior tree engine.

Composites: sequence, fallback (selector) and parallel. Leaves are action or
condition behaviors resolved by name through a registry at tick time, so the
same tree structure can run against simulation, scripted stubs or tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional


class NodeStatus(Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"


class NodeKind(Enum):
    SEQUENCE = "sequence"
    FALLBACK = "fallback"
    PARALLEL = "parallel"
    ACTION = "action"
    CONDITION = "condition"


COMPOSITE_KINDS = (NodeKind.SEQUENCE, NodeKind.FALLBACK, NodeKind.PARALLEL)
LEAF_KINDS = (NodeKind.ACTION, NodeKind.CONDITION)


class BtError(Exception):
    """Base error for engine failures."""


class MalformedTreeError(BtError):
    pass


class UnboundLeafError(BtError):
    pass


class DuplicateLeafError(BtError):
    pass


@dataclass(eq=False)
class TreeNode:
    kind: NodeKind
    children: list["TreeNode"] = field(default_factory=list)
    leaf_name: str = ""
    params: dict[str, str] = field(default_factory=dict)

    # runtime slots, owned by the engine
    _mem_index: int = field(default=0, repr=False, compare=False)
    _path: str = field(default="", repr=False, compare=False)

    @property
    def memory(self) -> bool:
        return self.params.get("memory") == "true"

    @property
    def success_threshold(self) -> Optional[int]:
        """Parallel success requirement; None means all children."""
        raw = self.params.get("success", "all")
        if raw == "all":
            return None
        return int(raw)

    def walk(self) -> Iterator["TreeNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def structurally_equal(self, other: "TreeNode") -> bool:
        if self.kind != other.kind:
            return False
        if self.leaf_name != other.leaf_name or self.params != other.params:
            return False
        if len(self.children) != len(other.children):
            return False
        return all(a.structurally_equal(b) for a, b in zip(self.children, other.children))


# Leaf behaviors receive the blackboard and the node's params.
LeafBehavior = Callable[["Blackboard", dict], NodeStatus]


class LeafRegistry:
    def __init__(self) -> None:
        self._behaviors: dict[str, LeafBehavior] = {}

    def register(self, name: str, behavior: LeafBehavior) -> None:
        if name in self._behaviors:
            raise DuplicateLeafError(f"leaf {name!r} already registered")
        self._behaviors[name] = behavior

    def resolve(self, name: str) -> LeafBehavior:
        try:
            return self._behaviors[name]
        except KeyError:
            raise UnboundLeafError(f"leaf {name!r} not registered") from None

    def __contains__(self, name: str) -> bool:
        return name in self._behaviors

    def names(self) -> list[str]:
        return sorted(self._behaviors)


def register_leaf(registry: LeafRegistry, name: str, behavior: LeafBehavior) -> None:
    registry.register(name, behavior)


@dataclass
class TraceEntry:
    path: str
    status: NodeStatus


@dataclass
class TickTrace:
    tick_index: int
    timestamp: float
    entries: list[TraceEntry] = field(default_factory=list)

    def to_lines(self) -> list[str]:
        return [
            '{"tick": %d, "t": %.3f, "path": "%s", "status": "%s"}'
            % (self.tick_index, self.timestamp, e.path, e.status.value)
            for e in self.entries
        ]


class Blackboard:
    """Shared key/value store for a single tree instance.

    Writes are visible to later visits on the same tick and to all later
    ticks. The tick counter is bumped exactly once per engine tick.
    """

    def __init__(self) -> None:
        self.data: dict = {}
        self.tick_index: int = 0
        self.now: float = 0.0
        self.traces: list[TickTrace] = []

    def get(self, key, default=None):
        return self.data.get(key, default)

    def set(self, key, value) -> None:
        self.data[key] = value

    def __contains__(self, key) -> bool:
        return key in self.data


def validate_structure(root: TreeNode) -> None:
    """Raise MalformedTreeError on any structural invariant violation."""
    seen: set[int] = set()

    def check(node: TreeNode) -> None:
        if id(node) in seen:
            raise MalformedTreeError("tree contains a shared or cyclic node")
        seen.add(id(node))
        if node.kind in COMPOSITE_KINDS:
            if not node.children:
                raise MalformedTreeError(f"{node.kind.value} node has no children")
            if node.leaf_name:
                raise MalformedTreeError("composite node carries a leaf name")
            if node.kind is NodeKind.PARALLEL:
                threshold = node.params.get("success", "all")
                if threshold != "all":
                    try:
                        value = int(threshold)
                    except ValueError:
                        raise MalformedTreeError(
                            f"parallel success threshold {threshold!r} is not an integer or 'all'"
                        ) from None
                    if value <= 0:
                        raise MalformedTreeError("parallel success threshold must be positive")
        else:
            if node.children:
                raise MalformedTreeError(f"{node.kind.value} leaf has children")
            if not node.leaf_name:
                raise MalformedTreeError("leaf node without a name")
        for child in node.children:
            check(child)

    check(root)
    _assign_paths(root)


def _assign_paths(root: TreeNode) -> None:
    def walk(node: TreeNode, path: str) -> None:
        node._path = path
        for i, child in enumerate(node.children):
            label = child.kind.value
            if child.leaf_name:
                label = f"{label}:{child.leaf_name}"
            walk(child, f"{path}/{i}:{label}")

    label = root.kind.value
    if root.leaf_name:
        label = f"{label}:{root.leaf_name}"
    walk(root, f"/{label}")


def tick(root: TreeNode, bb: Blackboard, registry: LeafRegistry) -> NodeStatus:
    """Run one tick from the root and append a TickTrace to the blackboard."""
    if not root._path:
        validate_structure(root)
    bb.tick_index += 1
    trace = TickTrace(tick_index=bb.tick_index, timestamp=bb.now)
    status = _tick_node(root, bb, registry, trace)
    bb.traces.append(trace)
    return status


def _tick_node(node: TreeNode, bb: Blackboard, registry: LeafRegistry, trace: TickTrace) -> NodeStatus:
    if node.kind is NodeKind.SEQUENCE:
        status = _tick_sequence(node, bb, registry, trace)
    elif node.kind is NodeKind.FALLBACK:
        status = _tick_fallback(node, bb, registry, trace)
    elif node.kind is NodeKind.PARALLEL:
        status = _tick_parallel(node, bb, registry, trace)
    else:
        status = _tick_leaf(node, bb, registry)
    trace.entries.append(TraceEntry(path=node._path, status=status))
    return status


def _tick_leaf(node: TreeNode, bb: Blackboard, registry: LeafRegistry) -> NodeStatus:
    behavior = registry.resolve(node.leaf_name)
    status = behavior(bb, node.params)
    if not isinstance(status, NodeStatus):
        raise MalformedTreeError(f"leaf {node.leaf_name!r} returned {status!r}")
    if node.kind is NodeKind.CONDITION and status is NodeStatus.RUNNING:
        raise MalformedTreeError(f"condition {node.leaf_name!r} returned Running")
    return status


def _tick_sequence(node: TreeNode, bb: Blackboard, registry: LeafRegistry, trace: TickTrace) -> NodeStatus:
    start = node._mem_index if node.memory else 0
    for i in range(start, len(node.children)):
        status = _tick_node(node.children[i], bb, registry, trace)
        if status is NodeStatus.FAILURE:
            node._mem_index = 0
            return NodeStatus.FAILURE
        if status is NodeStatus.RUNNING:
            if node.memory:
                node._mem_index = i
            return NodeStatus.RUNNING
        if node.memory:
            node._mem_index = i + 1
    node._mem_index = 0
    return NodeStatus.SUCCESS


def _tick_fallback(node: TreeNode, bb: Blackboard, registry: LeafRegistry, trace: TickTrace) -> NodeStatus:
    start = node._mem_index if node.memory else 0
    for i in range(start, len(node.children)):
        status = _tick_node(node.children[i], bb, registry, trace)
        if status is NodeStatus.SUCCESS:
            node._mem_index = 0
            return NodeStatus.SUCCESS
        if status is NodeStatus.RUNNING:
            if node.memory:
                node._mem_index = i
            return NodeStatus.RUNNING
        if node.memory:
            node._mem_index = i + 1
    node._mem_index = 0
    return NodeStatus.FAILURE


def _tick_parallel(node: TreeNode, bb: Blackboard, registry: LeafRegistry, trace: TickTrace) -> NodeStatus:
    # All children run every tick; result is evaluated afterwards so siblings
    # of a failing child still saw this tick before teardown.
    statuses = [_tick_node(child, bb, registry, trace) for child in node.children]
    if any(s is NodeStatus.FAILURE for s in statuses):
        return NodeStatus.FAILURE
    needed = node.success_threshold
    if needed is None:
        needed = len(node.children)
    if sum(1 for s in statuses if s is NodeStatus.SUCCESS) >= needed:
        return NodeStatus.SUCCESS
    return NodeStatus.RUNNING


def reset(root: TreeNode) -> None:
    """Clear per-node memory so the next tick behaves like the first."""
    for node in root.walk():
        node._mem_index = 0


def trace_log_lines(traces: list[TickTrace]) -> list[str]:
    lines: list[str] = []
    for t in traces:
        lines.extend(t.to_lines())
    return lines
