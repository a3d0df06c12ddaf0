import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diligent.core import BacktrackTo, Done, EngineConfig, NodeCreate, ParameterError, Step, StepKind, parse_tree, serialize_tree
from diligent.engine import (
    PolicyContractError,
    Result,
    build_tree,
    clopper_pearson,
    legal_events,
    simulate_success_lemma,
    synthetic_policy,
    undershoot_policy_variant,
    write_transcript,
)


def _run(policy, config, seed):
    return build_tree(policy, Step((1,), StepKind.ROOT), config, rng=np.random.default_rng(seed))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["tmax", "early"]))
def test_trees_respect_budgets(seed, mode):
    config = EngineConfig.create(0.5, 0.1, 5)
    out = _run(synthetic_policy(0.5, config.epsilon, config.epsilon, 4, mode), config, seed)
    tree = out.tree
    assert out.backtrack_leaves == len(tree.backtrack_leaves) <= config.leaf_budget
    for e in tree.nodes:
        kids = [c for c in tree.entries if c.parent == e.label and c.kind in ("node", "done")]
        assert len(kids) <= config.B
        assert tree.depth(e.label) < config.T_max
    if out.solved:
        assert out.chain.is_complete and len(out.chain) == 4
        assert all(s.payload == (1,) for s in out.chain)
    assert parse_tree(serialize_tree(tree)) == tree


def test_perfect_policy_never_backtracks():
    config = EngineConfig.create(1.0, 0.1, 6)
    out = _run(synthetic_policy(1.0, 0.0, 0.0, 5), config, 0)
    assert out.solved and out.backtrack_leaves == 0 and out.nodes_created == 3


def test_illegal_event_is_a_contract_error():
    config = EngineConfig.create(0.5, 0.1, 5)
    with pytest.raises(PolicyContractError):
        _run(lambda view: BacktrackTo(0), config, 0)


def test_stuck_root_is_exhausted():
    config = EngineConfig.create(0.5, 0.1, 5)
    out = _run(lambda view: NodeCreate((0,)) if view.legal.create else BacktrackTo(view.labels[-2]), config, 0)
    assert out.result is Result.EXHAUSTED


def test_checker_rejects_done_and_forces_backtrack():
    config = EngineConfig.create(0.5, 0.1, 5)
    calls = []

    def policy(view):
        calls.append(view.failed)
        if view.failed:
            return BacktrackTo(view.labels[-2])
        return Done((1,)) if view.attempts == 0 else Done((2,))

    out = build_tree(policy, Step((1,), StepKind.ROOT), config,
                     checker=lambda steps: steps[-1].payload == (2,) if steps[-1].kind is StepKind.SOLUTION else None)
    assert out.solved and out.chain[-1].payload == (2,)
    assert True in calls
    assert out.tree[1].kind == "node"


def test_floor_abandons():
    config = EngineConfig.create(0.5, 0.1, 5)
    prefix = [Step((1,), StepKind.ROOT), Step((1,)), Step((1,))]

    def policy(view):
        if len(view.steps) == 3:
            return NodeCreate((0,))
        return BacktrackTo(view.labels[0])

    out = build_tree(policy, prefix, config, floor=1)
    assert out.result is Result.ABANDONED


def test_legal_events_on_finished_tree():
    config = EngineConfig.create(0.5, 0.1, 5)
    tree = parse_tree("N 0 - 01\nN 1 0 01\nN 2 1 00\n")
    legal = legal_events(tree, 2, config)
    assert legal.create and legal.targets == (0, 1)
    assert legal.allows(BacktrackTo(1)) and not legal.allows(BacktrackTo(2))
    assert legal_events(tree, 2, config, failed=True).backtrack_only


def test_undershoot_targets_between_beta_and_current():
    config = EngineConfig.create(0.5, 0.1, 8)
    base = synthetic_policy(0.5, 0.0, 0.0, 7)
    pol = undershoot_policy_variant(base, 0.9)
    for seed in range(30):
        out = _run(pol, config, seed)
        assert out.backtrack_leaves <= config.leaf_budget
    with pytest.raises(ParameterError):
        undershoot_policy_variant(base, 1.0)


def test_clopper_pearson_edges():
    assert clopper_pearson(0, 10)[0] == 0.0
    assert clopper_pearson(10, 10)[1] == 1.0
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi


def test_lemma_small_run_is_deterministic_across_workers():
    config = EngineConfig.create(0.5, 0.1, 5)
    a = simulate_success_lemma(config, 300, seed=4, workers=1)
    b = simulate_success_lemma(config, 300, seed=4, workers=2)
    assert a == b
    assert a.max_backtrack_leaves <= config.lemma_leaf_bound


def test_transcript_mentions_every_event():
    config = EngineConfig.create(0.5, 0.1, 5)
    out = _run(synthetic_policy(0.5, 0.2, 0.2, 4), config, 3)
    text = write_transcript(out, 3)
    assert text.count("\n") >= len(out.tree)
