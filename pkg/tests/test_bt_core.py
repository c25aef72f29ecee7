import pytest

from prevent.bt import (
    Blackboard,
    DuplicateLeafError,
    LeafRegistry,
    MalformedTreeError,
    NodeKind,
    NodeStatus,
    TreeNode,
    UnboundLeafError,
    reset,
    tick,
    trace_log_lines,
    validate_structure,
)

from .conftest import random_script, random_tree, scripted_registry
from .oracles import TreeOracle

S, F, R = NodeStatus.SUCCESS, NodeStatus.FAILURE, NodeStatus.RUNNING


def leaf(name, kind=NodeKind.ACTION):
    return TreeNode(kind=kind, leaf_name=name)


def fixed_registry(**statuses):
    registry = LeafRegistry()
    for name, status in statuses.items():
        registry.register(name, lambda bb, params, s=status: s)
    return registry


def run_tick(root, registry, bb=None):
    return tick(root, bb or Blackboard(), registry)


def index_path(engine_path: str) -> str:
    parts = engine_path.strip("/").split("/")
    return ".".join(["r"] + [p.split(":", 1)[0] for p in parts[1:]])


class TestCompositeSemantics:
    def test_fallback_all_failures_fails(self):
        root = TreeNode(NodeKind.FALLBACK, children=[leaf("a"), leaf("b")])
        assert run_tick(root, fixed_registry(a=F, b=F)) is F

    def test_fallback_stops_at_first_success(self):
        root = TreeNode(NodeKind.FALLBACK, children=[leaf("a"), leaf("b")])
        bb = Blackboard()
        assert tick(root, bb, fixed_registry(a=S, b=F)) is S
        visited = [e.path for e in bb.traces[0].entries]
        assert not any(":action:b" in p for p in visited)

    def test_sequence_success_then_running(self):
        root = TreeNode(NodeKind.SEQUENCE, children=[leaf("a"), leaf("b")])
        assert run_tick(root, fixed_registry(a=S, b=R)) is R

    def test_sequence_stops_at_first_failure(self):
        root = TreeNode(NodeKind.SEQUENCE, children=[leaf("a"), leaf("b"), leaf("c")])
        bb = Blackboard()
        assert tick(root, bb, fixed_registry(a=S, b=F, c=S)) is F
        visited = [e.path for e in bb.traces[0].entries]
        assert not any(":action:c" in p for p in visited)

    def test_parallel_threshold_all(self):
        root = TreeNode(NodeKind.PARALLEL, children=[leaf("a"), leaf("b"), leaf("c")])
        assert run_tick(root, fixed_registry(a=S, b=R, c=S)) is R
        assert run_tick(root, fixed_registry(a=S, b=S, c=S)) is S

    def test_parallel_any_failure_fails(self):
        root = TreeNode(NodeKind.PARALLEL, children=[leaf("a"), leaf("b")])
        assert run_tick(root, fixed_registry(a=S, b=F)) is F

    def test_parallel_numeric_threshold(self):
        root = TreeNode(
            NodeKind.PARALLEL, children=[leaf("a"), leaf("b"), leaf("c")],
            params={"success": "2"},
        )
        assert run_tick(root, fixed_registry(a=S, b=S, c=R)) is S
        assert run_tick(root, fixed_registry(a=S, b=R, c=R)) is R

    def test_parallel_ticks_every_child(self):
        root = TreeNode(NodeKind.PARALLEL, children=[leaf("a"), leaf("b"), leaf("c")])
        bb = Blackboard()
        tick(root, bb, fixed_registry(a=F, b=S, c=R))
        leaves = [p for p, in ((e.path,) for e in bb.traces[0].entries) if ":action:" in p]
        assert len(leaves) == 3


class TestMemory:
    def make_memory_sequence(self):
        return TreeNode(
            NodeKind.SEQUENCE, children=[leaf("a"), leaf("b"), leaf("c")],
            params={"memory": "true"},
        )

    def test_memory_sequence_resumes_at_running_child(self):
        root = self.make_memory_sequence()
        bb = Blackboard()
        counts = {"a": 0, "b": 0, "c": 0}
        registry = LeafRegistry()

        def behavior(name, result_by_tick):
            def run(bb, params):
                counts[name] += 1
                return result_by_tick.get(bb.tick_index, S)
            return run

        registry.register("a", behavior("a", {}))
        registry.register("b", behavior("b", {1: R, 2: R}))
        registry.register("c", behavior("c", {}))
        assert tick(root, bb, registry) is R
        assert tick(root, bb, registry) is R
        assert tick(root, bb, registry) is S
        assert counts == {"a": 1, "b": 3, "c": 1}

    def test_reset_restarts_memory_sequence(self):
        root = self.make_memory_sequence()
        bb = Blackboard()
        registry = fixed_registry(a=S, b=R, c=S)
        tick(root, bb, registry)
        reset(root)
        first_child = root.children[0]
        bb2 = Blackboard()
        assert tick(root, bb2, fixed_registry(a=F, b=S, c=S)) is F
        assert first_child._mem_index == 0

    def test_reset_equals_fresh_tree(self, rng):
        for _ in range(50):
            tree_a = random_tree(rng)
            script = random_script(rng, tree_a, ticks=6)
            registry = scripted_registry(tree_a, script)
            bb = Blackboard()
            for _ in range(3):
                tick(tree_a, bb, registry)
            reset(tree_a)
            replay = Blackboard()
            statuses_after_reset = [tick(tree_a, replay, registry) for _ in range(3)]
            reset(tree_a)
            fresh_bb = Blackboard()
            fresh_statuses = [tick(tree_a, fresh_bb, registry) for _ in range(3)]
            assert statuses_after_reset == fresh_statuses

    def test_reset_single_leaf_noop(self):
        node = leaf("a")
        reset(node)
        assert run_tick(node, fixed_registry(a=S)) is S


class TestRegistry:
    def test_registered_leaf_executes(self):
        called = []
        registry = LeafRegistry()
        registry.register("StopRobot", lambda bb, params: (called.append(1), S)[1])
        root = leaf("StopRobot")
        assert run_tick(root, registry) is S
        assert called

    def test_unbound_leaf_raises(self):
        root = leaf("Nope")
        with pytest.raises(UnboundLeafError):
            run_tick(root, LeafRegistry())

    def test_duplicate_registration_raises(self):
        registry = LeafRegistry()
        registry.register("x", lambda bb, params: S)
        with pytest.raises(DuplicateLeafError):
            registry.register("x", lambda bb, params: S)


class TestStructureValidation:
    def test_empty_composite_rejected(self):
        with pytest.raises(MalformedTreeError):
            validate_structure(TreeNode(NodeKind.SEQUENCE, children=[]))

    def test_leaf_with_children_rejected(self):
        bad = TreeNode(NodeKind.ACTION, leaf_name="a", children=[leaf("b")])
        with pytest.raises(MalformedTreeError):
            validate_structure(bad)

    def test_shared_node_rejected(self):
        shared = leaf("a")
        root = TreeNode(NodeKind.SEQUENCE, children=[shared, shared])
        with pytest.raises(MalformedTreeError):
            validate_structure(root)

    def test_bad_parallel_threshold_rejected(self):
        bad = TreeNode(NodeKind.PARALLEL, children=[leaf("a")], params={"success": "0"})
        with pytest.raises(MalformedTreeError):
            validate_structure(bad)

    def test_condition_returning_running_rejected(self):
        root = leaf("c", kind=NodeKind.CONDITION)
        with pytest.raises(MalformedTreeError):
            run_tick(root, fixed_registry(c=R))


class TestBlackboard:
    def test_tick_counter_increments_by_one(self):
        root = leaf("a")
        registry = fixed_registry(a=S)
        bb = Blackboard()
        for expected in (1, 2, 3):
            tick(root, bb, registry)
            assert bb.tick_index == expected

    def test_writes_visible_same_tick(self):
        registry = LeafRegistry()
        registry.register("w", lambda bb, params: (bb.set("k", 41), S)[1])
        seen = []
        registry.register("r", lambda bb, params: (seen.append(bb.get("k")), S)[1])
        root = TreeNode(NodeKind.SEQUENCE, children=[leaf("w"), leaf("r")])
        run_tick(root, registry)
        assert seen == [41]


class TestOracleEquivalence:
    def test_random_trees_match_oracle_over_multiple_ticks(self, rng):
        for _ in range(300):
            tree = random_tree(rng)
            script = random_script(rng, tree, ticks=5)
            registry = scripted_registry(tree, script)
            oracle = TreeOracle(tree, script)
            bb = Blackboard()
            for _ in range(5):
                engine_status = tick(tree, bb, registry)
                oracle_status, oracle_visits = oracle.tick()
                assert engine_status is oracle_status
                engine_visits = [
                    (index_path(e.path), e.status) for e in bb.traces[-1].entries
                ]
                assert engine_visits == oracle_visits
            reset(tree)
            oracle.reset()

    def test_determinism_identical_traces(self, rng):
        tree = random_tree(rng)
        script = random_script(rng, tree, ticks=4)
        runs = []
        for _ in range(2):
            reset(tree)
            bb = Blackboard()
            registry = scripted_registry(tree, script)
            for _ in range(4):
                tick(tree, bb, registry)
            runs.append(trace_log_lines(bb.traces))
        assert runs[0] == runs[1]

    def test_trace_serialization_shape(self):
        root = TreeNode(NodeKind.SEQUENCE, children=[leaf("a")])
        bb = Blackboard()
        bb.now = 1.25
        tick(root, bb, fixed_registry(a=S))
        lines = trace_log_lines(bb.traces)
        assert len(lines) == 2
        assert '"tick": 1' in lines[0] and '"status": "success"' in lines[0]
