"""Reverse-curriculum training of the diligent learner.

Stage t teaches the models to finish a golden path from t steps before
its end. Each stage adds a node (or done) example per path, fine-tunes,
then explores: B sampled candidates for the new step are each handed to
the current engine, which may only search below the candidate. Solved
subtrees yield node/done examples along their success path plus
backtrack examples from every failed leaf to that path; subtrees that
fail outright teach a backtrack to the step just above the candidate.

Failure detection comes from the family validator (outcome at Done and
at the end of each boosted component), the same gate the engine uses at
inference. Learned backtracking decides where to resume.
"""

from __future__ import annotations

import csv
import io
import time
import warnings
from functools import partial
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import BacktrackTo, Done, EngineConfig, NodeCreate, ParameterError, Step, StepKind
from .engine import DecisionView, Result, build_tree, clopper_pearson
from .learners import (
    BacktrackClassifier,
    FeatureMap,
    StepGenerator,
    TrainingExample,
    sgd_train,
)
from .parallel import map_trials
from .problems import Task

__all__ = [
    "StageRegressionError",
    "ConfigurationError",
    "TrainConfig",
    "StageMetrics",
    "CurriculumState",
    "LearnedPolicy",
    "make_models",
    "build_f1",
    "inductive_step",
    "train_full",
    "evaluate",
    "EvalResult",
    "stage_report_csv",
]


class StageRegressionError(RuntimeError):
    """A stage's held-out solve rate is below the advance threshold."""

    def __init__(self, message, metrics=None):
        super().__init__(message)
        self.metrics = metrics


class ConfigurationError(ParameterError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.5
    delta: float = 0.1
    learning_rate: float = 0.1
    epochs: float = 10.0           # SGD passes over each stage's new examples
    replay: float = 1.0            # replayed old examples per new one
    explore_paths: int | None = None
    heldout: int = 200
    on_regression: str = "raise"   # or "warn"
    feature_mode: str = "anchored"
    local_context: bool = True     # component-local features on boosted tasks
    deduplicate: bool = True       # harvested examples form sets
    seed: int = 0

    def __post_init__(self):
        if self.on_regression not in ("raise", "warn"):
            raise ConfigurationError(f"on_regression must be raise or warn, not {self.on_regression!r}")
        if self.learning_rate <= 0 or self.epochs <= 0 or self.replay < 0:
            raise ConfigurationError("learning_rate and epochs must be positive, replay >= 0")
        if self.heldout < 0 or (self.explore_paths is not None and self.explore_paths < 1):
            raise ConfigurationError("heldout >= 0 and explore_paths >= 1 required")

    def engine_config(self, T_max: int) -> EngineConfig:
        return EngineConfig.create(self.gamma, self.delta, T_max, seed=self.seed)


@dataclass
class StageMetrics:
    t: int
    node_examples: int
    done_examples: int
    backtrack_examples: int
    heldout_solve: float
    heldout_upper: float
    threshold: float
    mean_leaves: float
    max_leaves: int
    wall_time: float


@dataclass
class GenData:
    depth: list = field(default_factory=list)
    slot: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    kind: list = field(default_factory=list)   # "node" or "done"
    seen: set = field(default_factory=set)

    def __len__(self):
        return len(self.depth)


@dataclass
class BackData:
    examples: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    seen: set = field(default_factory=set)

    def __len__(self):
        return len(self.examples)


@dataclass
class CurriculumState:
    task: Task
    config: TrainConfig
    engine: EngineConfig
    generator: StepGenerator
    classifier: BacktrackClassifier
    t: int = 0
    gen_data: GenData = field(default_factory=GenData)
    back_data: BackData = field(default_factory=BackData)
    history: list = field(default_factory=list)
    leaf_usage: list = field(default_factory=list)

    @property
    def datasets(self) -> dict:
        return {"node": self.gen_data.kind.count("node"),
                "done": self.gen_data.kind.count("done"),
                "backtrack": len(self.back_data)}


class LearnedPolicy:
    """Generator for new steps, classifier when only a backtrack is legal."""

    def __init__(self, generator: StepGenerator, classifier: BacktrackClassifier):
        self.generator = generator
        self.classifier = classifier

    def __call__(self, view: DecisionView):
        legal = view.legal
        if legal.backtrack_only:
            return BacktrackTo(view.labels[self.classifier.predict(view.steps)])
        step = self.generator.sample(view.steps, view.rng, create=legal.create, done=legal.done)
        if step.kind is StepKind.SOLUTION:
            return Done(step.payload)
        return NodeCreate(step.payload)


def make_models(task: Task, config: TrainConfig, T_max: int):
    window = task.window if config.local_context else None
    size = task.window_len if window else task.root_len + T_max
    fm = FeatureMap(size, 2, config.feature_mode, window=window)
    gen = StepGenerator(fm, task.n_slots, T_max, candidates=task.candidates)
    clf = BacktrackClassifier(fm, T_max, starts=task.component_starts,
                              n_slots=task.n_slots, candidates=task.candidates)
    return gen, clf


def _event(step: Step):
    return Done(step.payload) if step.kind is StepKind.SOLUTION else NodeCreate(step.payload)


def _add_gen(state: CurriculumState, context, step: Step) -> None:
    gen = state.generator
    d = state.gen_data
    key = (tuple(context), step)
    if state.config.deduplicate and key in d.seen:
        return
    d.seen.add(key)
    d.depth.append(min(len(context), gen.max_depth))
    d.slot.append(gen.slot_of(context, step))
    d.phi.append(gen.features(context).astype(np.int8))
    d.kind.append("done" if step.kind is StepKind.SOLUTION else "node")


def _add_back(state: CurriculumState, context, target: int) -> None:
    context = tuple(context)
    key = (context, target)
    if state.config.deduplicate and key in state.back_data.seen:
        return
    state.back_data.seen.add(key)
    state.back_data.examples.append(TrainingExample(context, BacktrackTo(target)))
    state.back_data.phi.append(state.classifier.encode(context))


def _sft(state: CurriculumState, gen_from: int, back_from: int, seed) -> None:
    """Fine-tune on examples added since the given offsets plus replay."""
    cfg = state.config
    rng = np.random.default_rng(seed)
    gd = state.gen_data
    new = np.arange(gen_from, len(gd))
    if len(new):
        old = np.arange(0, gen_from)
        replay = rng.choice(old, size=int(cfg.replay * len(new)), replace=True) if len(old) else old
        idx = np.concatenate([new, replay])
        enc = (np.array(gd.depth)[idx], np.array(gd.slot)[idx],
               np.array([gd.phi[i] for i in idx], dtype=float))
        steps = int(cfg.epochs * len(idx))
        sgd_train(state.generator, None, steps, cfg.learning_rate, int(rng.integers(2**63)),
                  encoded=enc)
    bd = state.back_data
    newb = np.arange(back_from, len(bd))
    if len(newb):
        oldb = np.arange(0, back_from)
        replay = rng.choice(oldb, size=int(cfg.replay * len(newb)), replace=True) if len(oldb) else oldb
        idx = np.concatenate([newb, replay])
        exs = [bd.examples[i] for i in idx]
        phis = [bd.phi[i] for i in idx]
        sgd_train(state.classifier, exs, int(cfg.epochs * len(idx)), cfg.learning_rate,
                  int(rng.integers(2**63)), encoded=phis)


def _checker(instance):
    return instance.checkpoint


def _common_prefix(a, b) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def _explore_candidate(state: CurriculumState, instance, context, cand: Step, t: int, rng,
                       golden: Step | None = None):
    """Run f_t below one candidate; returns (leaves used, solved).

    A candidate equal to the golden step is known to be right, so if its
    subtree still fails the fault lies with f_t and no backtrack-above
    examples are harvested from it.
    """
    k = len(context)
    steps0 = tuple(context) + (cand,)
    policy = LearnedPolicy(state.generator, state.classifier)
    if cand.kind is StepKind.SOLUTION:
        ok = instance.checkpoint(steps0)
        if ok:
            _add_gen(state, context, cand)
        else:
            _add_back(state, tuple(context) + (Step(cand.payload),), k - 1)
        return 0, bool(ok)
    if instance.checkpoint(steps0) is False:
        _add_back(state, steps0, k - 1)
        return 0, False
    budget = (state.engine.B - 1) * t + 1
    out = build_tree(policy, steps0, state.engine, checker=_checker(instance), floor=k,
                     rng=rng, leaf_budget=budget)
    tree = out.tree
    if out.result is Result.SOLVED:
        chain = out.chain.steps
        for j in range(k, len(chain)):
            _add_gen(state, chain[:j], chain[j])
        for leaf in tree.backtrack_leaves:
            # match by content: after an overshoot the search rebuilds
            # identical steps as fresh nodes
            failed_steps = tree.chain(leaf.parent).steps
            deepest = _common_prefix(failed_steps, chain) - 1
            _add_back(state, failed_steps, min(deepest, len(failed_steps) - 2))
        return out.backtrack_leaves, True
    if golden is not None and cand == golden:
        return out.backtrack_leaves, False
    failed = [leaf.parent for leaf in tree.backtrack_leaves]
    if not failed:
        _add_back(state, steps0, k - 1)
    for lab in failed:
        _add_back(state, tree.chain(lab).steps, k - 1)
    return out.backtrack_leaves, False


def _golden(paths_or_instances):
    out = []
    for inst in paths_or_instances:
        out.append((inst, inst.golden_path().chain.steps))
    return out


def _heldout_eval(state: CurriculumState, heldout, t: int, seed) -> tuple[float, float, int]:
    """f_t from co-length-t prefixes (search may not go above the prefix)."""
    solved = 0
    total = 0
    policy = LearnedPolicy(state.generator, state.classifier)
    for i, (inst, g) in enumerate(heldout):
        k = len(g) - t
        if k < 1:
            continue
        rng = np.random.default_rng([seed, 7919, t, i])
        out = build_tree(policy, g[:k], state.engine, checker=_checker(inst), floor=k - 1,
                         rng=rng, leaf_budget=(state.engine.B - 1) * t + 1)
        total += 1
        solved += out.solved and inst.outcome(out.chain)
    if total == 0:
        return 1.0, 1.0, 0
    _, hi = clopper_pearson(solved, total)
    return solved / total, hi, total


def _finish_stage(state, t, t0, leaves, heldout, seed):
    rate, hi, _ = _heldout_eval(state, heldout, t, seed)
    thr = 1 - state.config.delta / state.engine.T_max
    m = StageMetrics(t, state.datasets["node"], state.datasets["done"], state.datasets["backtrack"],
                     rate, hi, thr, float(np.mean(leaves)) if leaves else 0.0,
                     int(max(leaves)) if leaves else 0, time.perf_counter() - t0)
    state.history.append(m)
    state.leaf_usage.append(leaves)
    state.t = t
    if hi < thr:
        msg = (f"stage t={t}: held-out solve rate {rate:.4f} "
               f"(99% upper {hi:.4f}) below {thr:.4f}")
        if state.config.on_regression == "raise":
            raise StageRegressionError(msg, m)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return state


def _setup(task: Task, config: TrainConfig) -> CurriculumState:
    T_max = task.golden_length + 2
    engine = config.engine_config(T_max)
    gen, clf = make_models(task, config, T_max)
    return CurriculumState(task, config, engine, gen, clf)


def build_f1(golden: Sequence, config: TrainConfig, task: Task, heldout: Sequence = ()) -> CurriculumState:
    """Stage 1: learn the final step, then explore B candidates for it."""
    t0 = time.perf_counter()
    if any(not hasattr(i, "checkpoint") for i in golden):
        raise ConfigurationError("a validator is required for every training instance")
    paths = _golden(golden)
    if any(len(g) < 2 for _, g in paths):
        raise ParameterError("golden paths need at least two steps")
    state = _setup(task, config)
    for _, g in paths:
        _add_gen(state, g[:-1], g[-1])
    _sft(state, 0, 0, [config.seed, 1, 0])
    g0, b0 = len(state.gen_data), len(state.back_data)
    leaves = []
    chosen = paths if config.explore_paths is None else paths[:config.explore_paths]
    for pi, (inst, g) in enumerate(chosen):
        rng = np.random.default_rng([config.seed, 1, pi])
        for _ in range(state.engine.B):
            cand = state.generator.sample(g[:-1], rng)
            _explore_candidate(state, inst, g[:-1], cand, 1, rng)
        leaves.append(0)
    _sft(state, g0, b0, [config.seed, 1, 1])
    return _finish_stage(state, 1, t0, leaves, _golden(heldout), config.seed)


def inductive_step(state: CurriculumState, golden: Sequence, heldout: Sequence = ()) -> CurriculumState:
    """Advance from f_t to f_{t+1}."""
    t0 = time.perf_counter()
    t = state.t
    cfg = state.config
    paths = [(i, g) for i, g in _golden(golden) if len(g) > t + 1]
    g0, b0 = len(state.gen_data), len(state.back_data)
    for _, g in paths:
        k = len(g) - t - 1
        _add_gen(state, g[:k], g[k])
    _sft(state, g0, b0, [cfg.seed, t + 1, 0])
    g1, b1 = len(state.gen_data), len(state.back_data)
    leaves = []
    chosen = paths if cfg.explore_paths is None else paths[:cfg.explore_paths]
    for pi, (inst, g) in enumerate(chosen):
        k = len(g) - t - 1
        rng = np.random.default_rng([cfg.seed, t + 1, pi])
        used = 0
        for _ in range(state.engine.B):
            cand = state.generator.sample(g[:k], rng)
            n, _ = _explore_candidate(state, inst, g[:k], cand, t, rng, golden=g[k])
            used += n
        leaves.append(used)
    _sft(state, g1, b1, [cfg.seed, t + 1, 1])
    return _finish_stage(state, t + 1, t0, leaves, _golden(heldout), cfg.seed)


@dataclass(frozen=True)
class EvalResult:
    trials: int
    solved: int
    solve_rate: float
    lower99: float
    mean_nodes: float
    mean_backtracks: float
    rows: tuple = ()


def _eval_trial(generator, classifier, engine, seed, item):
    i, inst = item
    policy = LearnedPolicy(generator, classifier)
    rng = np.random.default_rng([seed, 104729, i])
    out = build_tree(policy, inst.root, engine, checker=_checker(inst), rng=rng)
    ok = bool(out.solved and inst.outcome(out.chain))
    return (inst.seed, ok, len(out.tree.nodes), out.backtrack_leaves)


def evaluate(state: CurriculumState, instances: Sequence, seed: int = 0, workers: int = 1) -> EvalResult:
    """Full search from bare problem statements. Trial i draws from the
    stream (seed, i) whatever the worker count."""
    fn = partial(_eval_trial, state.generator, state.classifier, state.engine, seed)
    rows = map_trials(fn, list(enumerate(instances)), workers)
    solved = sum(r[1] for r in rows)
    lo, _ = clopper_pearson(solved, len(rows))
    return EvalResult(len(rows), solved, solved / len(rows), lo,
                      float(np.mean([r[2] for r in rows])), float(np.mean([r[3] for r in rows])),
                      tuple(rows))


def train_full(task: Task, golden: Sequence, config: TrainConfig, heldout: Sequence = (),
               log=None) -> CurriculumState:
    """build_f1, then inductive steps until the curriculum covers the
    longest golden path."""
    if not golden:
        raise ParameterError("need at least one golden path")
    if not heldout:
        heldout = task.instances(range(10**9, 10**9 + config.heldout))
    longest = max(i.golden_length for i in golden)
    state = build_f1(golden, config, task, heldout)
    if log:
        log(state.history[-1])
    while state.t + 1 <= longest - 1:
        state = inductive_step(state, golden, heldout)
        if log:
            log(state.history[-1])
    return state


def stage_report_csv(state: CurriculumState, wall_time: bool = True) -> str:
    buf = io.StringIO()
    names = list(StageMetrics.__dataclass_fields__)
    if not wall_time:
        names.remove("wall_time")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for m in state.history:
        row = asdict(m)
        w.writerow([f"{row[k]:.6g}" if isinstance(row[k], float) else row[k] for k in names])
    return buf.getvalue()
