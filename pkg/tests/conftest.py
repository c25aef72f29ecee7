import numpy as np
import pytest

from prevent.bt import LeafRegistry, NodeKind, NodeStatus, TreeNode

STATUSES = [NodeStatus.SUCCESS, NodeStatus.FAILURE, NodeStatus.RUNNING]


def random_tree(rng: np.random.Generator, max_depth: int = 4, max_fanout: int = 4,
                _counter=None, _depth: int = 0) -> TreeNode:
    """Random valid tree with uniquely named leaves."""
    if _counter is None:
        _counter = [0]
    make_leaf = _depth >= max_depth or (_depth > 0 and rng.random() < 0.4)
    if make_leaf:
        kind = NodeKind.CONDITION if rng.random() < 0.4 else NodeKind.ACTION
        name = f"L{_counter[0]}"
        _counter[0] += 1
        return TreeNode(kind=kind, leaf_name=name)
    kind = [NodeKind.SEQUENCE, NodeKind.FALLBACK, NodeKind.PARALLEL][int(rng.integers(3))]
    fanout = int(rng.integers(1, max_fanout + 1))
    children = [
        random_tree(rng, max_depth, max_fanout, _counter, _depth + 1)
        for _ in range(fanout)
    ]
    params = {}
    if kind is NodeKind.PARALLEL:
        if rng.random() < 0.5:
            params["success"] = str(int(rng.integers(1, fanout + 1)))
    elif rng.random() < 0.5:
        params["memory"] = "true" if rng.random() < 0.5 else "false"
    return TreeNode(kind=kind, children=children, params=params)


def random_script(rng: np.random.Generator, root: TreeNode, ticks: int = 5):
    """Per-leaf, per-tick scripted statuses; conditions never run."""
    table = {}
    for node in root.walk():
        if node.leaf_name:
            allowed = STATUSES[:2] if node.kind is NodeKind.CONDITION else STATUSES
            for k in range(1, ticks + 1):
                table[(node.leaf_name, k)] = allowed[int(rng.integers(len(allowed)))]

    def script(name: str, tick_index: int) -> NodeStatus:
        return table[(name, tick_index)]

    return script


def scripted_registry(root: TreeNode, script) -> LeafRegistry:
    registry = LeafRegistry()
    for node in root.walk():
        if node.leaf_name:
            registry.register(
                node.leaf_name,
                lambda bb, params, name=node.leaf_name: script(name, bb.tick_index),
            )
    return registry


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
