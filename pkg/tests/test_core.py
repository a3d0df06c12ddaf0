import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diligent.core import (
    AncestorError,
    EngineConfig,
    LabelOrderError,
    MalformedLineError,
    ParameterError,
    ReasoningChain,
    SearchTree,
    Step,
    StepKind,
    TreeEntry,
    derive_constants,
    parse_tree,
    serialize_tree,
)


def test_constants_reference_point():
    eps, B = derive_constants(0.5, 0.1, 5)
    assert eps == pytest.approx(0.005)
    assert B == 8
    cfg = EngineConfig.create(0.5, 0.1, 5)
    assert cfg.lemma_leaf_bound == 28


@pytest.mark.parametrize("gamma,delta,T", [(0, .1, 5), (1.5, .1, 5), (.5, 0, 5), (.5, .5, 5), (.5, .1, 1), (.5, .1, 2.5)])
def test_constants_reject_bad_parameters(gamma, delta, T):
    with pytest.raises(ParameterError):
        derive_constants(gamma, delta, T)


@pytest.mark.parametrize("gamma,delta,T,eps,B", [
    (0.5, 0.1, 10, 0.0025, 10),
    (1.0, 0.25, 2, 0.0625, 3),
    (1.0, 0.49, 2, 0.1225, 2),
])
def test_constants_examples(gamma, delta, T, eps, B):
    assert derive_constants(gamma, delta, T) == (pytest.approx(eps), B)


def test_gamma_one_still_backtracks_once():
    eps, B = derive_constants(1.0, 0.1, 10)
    assert B == math.ceil(math.log(100))
    assert eps > 0


def test_engine_config_rejects_inconsistent_constants():
    with pytest.raises(ParameterError):
        EngineConfig(0.5, 0.1, 5, 0.01, 8, 10)
    with pytest.raises(ParameterError):
        EngineConfig.create(0.5, 0.1, 5, leaf_budget=0)


def test_chain_invariants():
    c = ReasoningChain.from_payloads((1, -1), [(1,), (-1,)], complete=True)
    assert c.is_complete and len(c) == 3
    assert c.prefix(2).steps == c.steps[:2]
    with pytest.raises(ParameterError):
        ReasoningChain((Step((1,)),))
    with pytest.raises(ParameterError):
        ReasoningChain((Step((1,), StepKind.ROOT), Step((1,), StepKind.SOLUTION), Step((1,))))
    with pytest.raises(ParameterError):
        Step((300,))


# -- random trees


@st.composite
def trees(draw, max_events=40):
    """Event sequences that a depth-first search could have produced."""
    entries = [TreeEntry(0, None, "node", tuple(draw(st.lists(st.integers(-128, 127), max_size=4))))]
    path = [0]
    for _ in range(draw(st.integers(0, max_events))):
        label = len(entries)
        choice = draw(st.integers(0, 3))
        if choice == 3 and len(path) > 1:
            target = path[draw(st.integers(0, len(path) - 2))]
            entries.append(TreeEntry(label, path[-1], "backtrack", target=target))
            del path[path.index(target) + 1:]
        else:
            payload = tuple(draw(st.lists(st.integers(-128, 127), max_size=3)))
            entries.append(TreeEntry(label, path[-1], "node", payload))
            path.append(label)
    if draw(st.booleans()):
        entries.append(TreeEntry(len(entries), path[-1], "done", (7, -7)))
    return SearchTree(tuple(entries))


@settings(max_examples=1000, deadline=None)
@given(trees())
def test_tree_round_trip(tree):
    text = serialize_tree(tree)
    assert parse_tree(text) == tree
    assert serialize_tree(parse_tree(text)) == text


@given(trees())
def test_tree_paths_reach_root(tree):
    for e in tree.entries:
        p = tree.path(e.label)
        assert p[0] == 0 and p[-1] == e.label
        assert tree.depth(e.label) == len(p) - 1


def test_parse_rejects_bad_logs():
    with pytest.raises(LabelOrderError):
        parse_tree("N 0 - 01\nN 2 0 01\n")
    with pytest.raises(AncestorError):
        parse_tree("N 0 - 01\nN 1 0 01\nN 2 0 01\nB 3 1\n")
    with pytest.raises(MalformedLineError):
        parse_tree("N 0 - 01\nX 1 0\n")
    with pytest.raises(MalformedLineError):
        parse_tree("N 0 - zz\n")
    with pytest.raises(LabelOrderError):
        parse_tree("N 0 - 01\nN 1 0 01\nD 2 01\nD 3 01\n")


def test_tree_accessors():
    tree = parse_tree("N 0 - 01\nN 1 0 02\nB 2 0\nN 3 0 03\nD 4 04\n")
    assert [e.label for e in tree.backtrack_leaves] == [2]
    assert tree.done_leaf.label == 4
    chain = tree.chain(4)
    assert chain.is_complete and [s.payload for s in chain] == [(1,), (3,), (4,)]


def test_thirteen_node_tree_with_two_backtracks():
    E = TreeEntry
    entries = [E(0, None, "node", (1,)), E(1, 0, "node", (1,)), E(2, 1, "node", (2,)),
               E(3, 2, "node", (3,)), E(4, 3, "node", (4,)), E(5, 4, "backtrack", target=0),
               E(6, 0, "node", (6,)), E(7, 6, "node", (7,)), E(8, 7, "backtrack", target=6),
               E(9, 6, "node", (9,)), E(10, 9, "node", (10,)), E(11, 10, "node", (11,)),
               E(12, 11, "done", (12,))]
    tree = SearchTree(tuple(entries))
    text = serialize_tree(tree)
    assert parse_tree(text) == tree
    assert serialize_tree(parse_tree(text)) == text
