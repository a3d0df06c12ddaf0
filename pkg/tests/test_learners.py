import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diligent.core import BacktrackTo, Done, NodeCreate, ParameterError, Step, StepKind
from diligent.learners import (
    BacktrackClassifier,
    CheckpointMismatchError,
    FeatureMap,
    StepGenerator,
    TrainingExample,
    estimate_gamma,
    load_checkpoint,
    predict_backtrack,
    save_checkpoint,
    sgd_train,
)
from diligent.problems import Task


def _chain(root, rest):
    return [Step(tuple(root), StepKind.ROOT)] + [Step((v,)) for v in rest]


def _reference_phi(root, rest, context_len):
    # context: root then the last symbol of every step, zero padded
    ctx = (list(root) + list(rest) + [0] * context_len)[:context_len]
    last = rest[-1] if rest else 1
    return np.array([1, last] + [v * last for v in ctx], dtype=float)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), min_size=3, max_size=3),
       st.lists(st.sampled_from([-1, 1]), max_size=6))
def test_anchored_features_match_reference(root, rest):
    fm = FeatureMap(8, mode="anchored")
    steps = _chain(root, rest)
    assert np.array_equal(fm(steps), _reference_phi(root, rest, 8))
    full = fm.full_symbols(steps)
    rows = fm.prefix_rows(full, 3, len(steps))
    for c in range(1, len(steps) + 1):
        assert np.array_equal(rows[c - 1], fm(steps[:c]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), min_size=6, max_size=6),
       st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=6))
def test_windowed_features_see_only_own_component(root, rest):
    # two components of 3 root symbols; step 4 opens the second
    fm = FeatureMap(6, window=(3, (0, 3)))
    steps = _chain(root, rest)
    c = len(steps)
    k = 0 if c <= 3 else 1
    ctx = root[3 * k:3 * k + 3] + rest[3 * k:c - 1]
    expected = _reference_phi(ctx, [], 6)
    expected[1:] *= rest[-1]
    assert np.array_equal(fm(steps), expected)
    rows = fm.prefix_rows(fm.full_symbols(steps), 6, c)
    assert np.array_equal(rows[-1], fm(steps))


def test_full_mode_size_and_cap():
    fm = FeatureMap(4, degree=2, mode="full")
    assert fm.size == 1 + 5 + 10
    with pytest.raises(ParameterError):
        FeatureMap(100, degree=3, mode="full", cap=1000)
    with pytest.raises(ParameterError):
        FeatureMap(4, mode="weird")


def _drift_gen():
    task = Task("drift", 6)
    T_max = task.golden_length + 2
    fm = FeatureMap(task.root_len + T_max)
    return task, StepGenerator(fm, task.n_slots, T_max, candidates=task.candidates)


def test_generator_learns_local_steps():
    task, gen = _drift_gen()
    exs = []
    for inst in task.instances(range(200)):
        g = inst.golden_path().chain.steps
        for k in range(2, len(g)):
            ev = Done(g[k].payload) if g[k].kind is StepKind.SOLUTION else NodeCreate(g[k].payload)
            exs.append(TrainingExample(tuple(g[:k]), ev))
    losses = []
    sgd_train(gen, exs, 10 * len(exs), 0.1, losses=losses)
    assert np.mean(losses[-200:]) < np.mean(losses[:200])
    inst = task.instance(9999)
    g = inst.golden_path().chain.steps
    for k in range(2, len(g)):
        p = gen.distribution(g[:k])
        assert p[gen.slot_of(g[:k], g[k])] > 0.9


def test_generator_respects_mask():
    task, gen = _drift_gen()
    g = task.instance(0).golden_path().chain.steps
    p = gen.distribution(g[:2], done=False)
    cands = task.candidates(g[:2])
    assert all(p[i] == 0 for i, c in enumerate(cands) if c.kind is StepKind.SOLUTION)
    with pytest.raises(ParameterError):
        gen.distribution(g[:2], create=False, done=False)


def test_classifier_learns_fixed_offset():
    task = Task("drift", 6)
    T_max = task.golden_length + 2
    fm = FeatureMap(task.root_len + T_max)
    clf = BacktrackClassifier(fm, T_max, (0,), n_slots=task.n_slots, candidates=task.candidates)
    rng = np.random.default_rng(0)
    exs = []
    for inst in task.instances(range(50)):
        g = list(inst.golden_path().chain.steps[:-1])
        k = int(rng.integers(1, len(g)))
        bad = g[:k] + [Step((-g[k].last,))]
        exs.append(TrainingExample(tuple(bad), BacktrackTo(k - 1)))
    sgd_train(clf, exs, 3000, 0.1)
    hits = [predict_backtrack(clf, ex.context) == ex.response.target for ex in exs]
    assert np.mean(hits) > 0.9
    assert np.isclose(clf.distribution(exs[0].context).sum(), 1.0)


def test_checkpoint_round_trip(tmp_path):
    task, gen = _drift_gen()
    clf = BacktrackClassifier(gen.features, gen.max_depth, (0,), n_slots=task.n_slots,
                              candidates=task.candidates)
    gen.W[:] = np.random.default_rng(1).standard_normal(gen.W.shape)
    path = tmp_path / "m.npz"
    save_checkpoint(path, gen, clf, {"a": 1})
    _, gen2 = _drift_gen()
    clf2 = BacktrackClassifier(gen.features, gen.max_depth, (0,), n_slots=task.n_slots)
    load_checkpoint(path, gen2, clf2, {"a": 1})
    assert np.array_equal(gen.W, gen2.W)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, gen2, clf2, {"a": 2})
    fm = FeatureMap(gen.features.context_len + 1)
    other = StepGenerator(fm, task.n_slots, gen.max_depth)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, other, BacktrackClassifier(fm, gen.max_depth, (0,), n_slots=task.n_slots))


def test_estimate_gamma_exact_and_sampled():
    task, gen = _drift_gen()
    ctx = [task.instance(s).golden_path().chain.steps[:2] for s in range(5)]
    oracle = lambda c, s: s.payload == (1,)
    ex = estimate_gamma(gen, ctx, oracle, exact=True)
    assert np.allclose(ex.per_context, 0.5)
    sm = estimate_gamma(gen, ctx, oracle, 400, rng=np.random.default_rng(0))
    assert np.all(np.abs(sm.per_context - 0.5) < 0.15)
    with pytest.raises(ParameterError):
        estimate_gamma(gen, ctx, oracle, 10)


def test_sgd_rejects_bad_rate():
    task, gen = _drift_gen()
    with pytest.raises(ParameterError):
        sgd_train(gen, [], 1, 0.0)
