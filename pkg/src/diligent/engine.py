"""Depth-first search-tree construction under grammar constraints.

A policy is any callable taking a :class:`DecisionView` and returning a
tree event. The engine only offers legal events: new nodes and done
leaves below T_max (and while the node has attempts left), backtracks to
proper ancestors of the current node. Anything else is a contract
violation.

Validator checkpoints are optional. When a checker is supplied, a Done
whose outcome is wrong is kept as an ordinary node and the search must
backtrack from it; nodes that close a failed component are treated the
same way.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from functools import partial
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import stats

from .core import (
    BacktrackTo,
    Done,
    EngineConfig,
    NodeCreate,
    ParameterError,
    ReasoningChain,
    SearchTree,
    Step,
    StepKind,
    TreeEntry,
    TreeEvent,
    serialize_tree,
)
from .parallel import map_trials, trial_rng

__all__ = [
    "PolicyContractError",
    "Result",
    "LegalEvents",
    "DecisionView",
    "Policy",
    "TreeOutcome",
    "legal_events",
    "build_tree",
    "SyntheticPolicy",
    "synthetic_policy",
    "UndershootPolicy",
    "undershoot_policy_variant",
    "LemmaStats",
    "simulate_success_lemma",
    "clopper_pearson",
    "write_transcript",
]


class PolicyContractError(RuntimeError):
    """The policy emitted an event outside the legal set."""


class Result(enum.Enum):
    SOLVED = "solved"
    EXHAUSTED = "exhausted"
    # the policy asked to backtrack above the floor of a sub-search
    ABANDONED = "abandoned"


@dataclass(frozen=True)
class LegalEvents:
    create: bool
    done: bool
    targets: tuple[int, ...]

    def allows(self, event: TreeEvent) -> bool:
        if isinstance(event, NodeCreate):
            return self.create
        if isinstance(event, Done):
            return self.done
        if isinstance(event, BacktrackTo):
            return event.target in self.targets
        return False

    @property
    def backtrack_only(self) -> bool:
        return not (self.create or self.done)


class DecisionView:
    """What a policy sees: the root-to-node path, never the whole tree."""

    __slots__ = ("steps", "labels", "legal", "failed", "attempts", "rng")

    def __init__(self, steps, labels, legal, failed, attempts, rng):
        self.steps: tuple[Step, ...] = steps
        self.labels: tuple[int, ...] = labels
        self.legal: LegalEvents = legal
        self.failed: bool = failed
        self.attempts: int = attempts
        self.rng: np.random.Generator = rng

    @property
    def depth(self) -> int:
        """Chain length of the current path (the root alone has depth 1)."""
        return len(self.steps)

    @property
    def current(self) -> int:
        return self.labels[-1]

    def chain(self) -> ReasoningChain:
        return ReasoningChain(self.steps)


class Policy(Protocol):
    def __call__(self, view: DecisionView) -> TreeEvent: ...


@dataclass(frozen=True)
class TreeOutcome:
    tree: SearchTree
    result: Result
    chain: ReasoningChain | None
    backtrack_leaves: int
    done_leaves: int
    nodes_created: int
    reason: str = ""

    @property
    def solved(self) -> bool:
        return self.result is Result.SOLVED


def legal_events(tree: SearchTree, current: int, config: EngineConfig, *,
                 failed: bool = False) -> LegalEvents:
    """Legal events at ``current`` for a finished or partial tree."""
    path = tree.path(current)
    attempts = sum(1 for e in tree.entries
                   if e.parent == current and e.kind in ("node", "done"))
    return _legal(len(path), attempts, tuple(path[:-1]), config, failed)


def _legal(depth, attempts, targets, config, failed) -> LegalEvents:
    grow = not failed and depth < config.T_max and attempts < config.B
    return LegalEvents(grow, grow, targets)


def build_tree(policy: Policy, root, config: EngineConfig, *,
               checker: Callable[[Sequence[Step]], bool | None] | None = None,
               floor: int = 0,
               rng: np.random.Generator | None = None,
               leaf_budget: int | None = None) -> TreeOutcome:
    """Grow one search tree depth-first until Done, budget, or a stuck node.

    ``root`` is a Root step or a prefix of steps (root first); the prefix
    becomes nodes 0..len-1 and search starts below the last one. A
    backtrack to a node shallower than ``floor`` ends the build with
    ABANDONED. A node that used its B attempts and is still current ends
    the build (the attempt cap of the success lemma).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if leaf_budget is None:
        leaf_budget = config.leaf_budget
    prefix = (root,) if isinstance(root, Step) else tuple(root)
    if not prefix or prefix[0].kind is not StepKind.ROOT:
        raise ParameterError("build_tree needs a Root step first")

    entries: list[TreeEntry] = []
    attempts: list[int] = []
    depth_of: list[int] = []
    for i, s in enumerate(prefix):
        entries.append(TreeEntry(i, i - 1 if i else None, "node", s.payload))
        attempts.append(0)
        depth_of.append(i)
    labels = list(range(len(prefix)))
    steps = list(prefix)
    failed = False
    leaves = 0
    created = 0
    begin = getattr(policy, "begin_tree", None)
    if begin is not None:
        begin()

    def finish(result, reason, chain=None):
        return TreeOutcome(SearchTree(tuple(entries)), result, chain, leaves,
                           1 if result is Result.SOLVED else 0, created, reason)

    while True:
        cur = labels[-1]
        legal = _legal(len(steps), attempts[cur], tuple(labels[:-1]), config, failed)
        if legal.backtrack_only:
            if not legal.targets:
                return finish(Result.EXHAUSTED, "stuck-at-root")
            if not failed and len(steps) < config.T_max:
                return finish(Result.EXHAUSTED, "attempts")
        event = policy(DecisionView(tuple(steps), tuple(labels), legal, failed,
                                    attempts[cur], rng))
        if not legal.allows(event):
            raise PolicyContractError(f"illegal event {event!r} at node {cur}")
        label = len(entries)
        if isinstance(event, BacktrackTo):
            entries.append(TreeEntry(label, cur, "backtrack", target=event.target))
            attempts.append(0)
            depth_of.append(-1)
            leaves += 1
            k = depth_of[event.target]
            del labels[k + 1:]
            del steps[k + 1:]
            failed = False
            if k < floor:
                return finish(Result.ABANDONED, "floor")
            if leaves >= leaf_budget:
                return finish(Result.EXHAUSTED, "leaf-budget")
            continue
        attempts[cur] += 1
        if isinstance(event, Done):
            step = Step(event.payload, StepKind.SOLUTION)
            if checker is None or checker(steps + [step]):
                entries.append(TreeEntry(label, cur, "done", step.payload))
                return finish(Result.SOLVED, "done", ReasoningChain(tuple(steps) + (step,)))
            # rejected answer: keep it as a node and force a backtrack
            step = Step(event.payload)
            failed = True
        else:
            step = Step(event.payload)
            failed = False
        entries.append(TreeEntry(label, cur, "node", step.payload))
        attempts.append(0)
        depth_of.append(len(steps))
        labels.append(label)
        steps.append(step)
        created += 1
        if checker is not None and not failed and checker(steps) is False:
            failed = True


# ---------------------------------------------------------------- synthetic policy

GOOD, BAD = (1,), (0,)


class SyntheticPolicy:
    """Oracle-driven policy on an abstract task of fixed golden length.

    Correct steps carry payload (1,), wrong ones the hidden marker (0,).
    Each correct node is gamma-correct with probability 1 - eps_gen
    (decided once per node); otherwise it only proposes wrong children.
    Incorrect chains either run on to T_max ("tmax") or backtrack at once
    ("early"); the backtrack goes to beta with probability 1 - eps_back and
    to a uniformly chosen shallower ancestor otherwise.
    """

    def __init__(self, gamma: float, eps_gen: float, eps_back: float,
                 golden_length: int, mode: str = "tmax"):
        if not 0 < gamma <= 1 or not 0 <= eps_gen <= 1 or not 0 <= eps_back <= 1:
            raise ParameterError("gamma in (0,1], eps_gen and eps_back in [0,1]")
        if golden_length < 2:
            raise ParameterError("golden_length must be at least 2")
        if mode not in ("tmax", "early"):
            raise ParameterError(f"unknown backtrack mode {mode!r}")
        self.gamma = gamma
        self.eps_gen = eps_gen
        self.eps_back = eps_back
        self.golden_length = golden_length
        self.mode = mode
        self._good: dict[int, bool] = {}

    def begin_tree(self):
        self._good = {}

    @staticmethod
    def beta_index(view: DecisionView) -> int:
        """Path index of the deepest node whose chain is still correct."""
        for i, s in enumerate(view.steps[1:], start=1):
            if s.payload != GOOD:
                return i - 1
        return len(view.steps) - 1

    def root(self) -> Step:
        return Step(GOOD, StepKind.ROOT)

    def __call__(self, view: DecisionView) -> TreeEvent:
        rng = view.rng
        b = self.beta_index(view)
        correct = b == len(view.steps) - 1
        legal = view.legal
        if correct and legal.create:
            cur = view.current
            good = self._good.get(cur)
            if good is None:
                good = self.eps_gen == 0 or rng.random() >= self.eps_gen
                self._good[cur] = good
            if good and (self.gamma >= 1 or rng.random() < self.gamma):
                if len(view.steps) == self.golden_length - 1:
                    return Done(GOOD)
                return NodeCreate(GOOD)
            return NodeCreate(BAD)
        if correct:
            # forced back from a correct node; nothing better than the parent
            return BacktrackTo(view.labels[-2])
        if legal.create and self.mode == "tmax" and view.attempts == 0:
            return NodeCreate(BAD)
        return BacktrackTo(self._target(view, b, rng))

    def _target(self, view: DecisionView, b: int, rng) -> int:
        if self.eps_back > 0 and b > 0 and rng.random() < self.eps_back:
            return view.labels[int(rng.integers(0, b))]
        return view.labels[b]


def synthetic_policy(gamma: float, eps_gen: float, eps_back: float,
                     golden_length: int, mode: str = "tmax") -> SyntheticPolicy:
    return SyntheticPolicy(gamma, eps_gen, eps_back, golden_length, mode)


class UndershootPolicy:
    """Replace some backtracks by undershoots: a target strictly below beta
    but above the current node. Overshoot is never added."""

    def __init__(self, base, prob: float, beta_fn=None):
        if not 0 <= prob < 1:
            raise ParameterError("undershoot probability must lie in [0, 1)")
        self.base = base
        self.prob = prob
        self.beta_fn = beta_fn if beta_fn is not None else base.beta_index

    def begin_tree(self):
        begin = getattr(self.base, "begin_tree", None)
        if begin is not None:
            begin()

    def __call__(self, view: DecisionView) -> TreeEvent:
        event = self.base(view)
        if not isinstance(event, BacktrackTo) or self.prob == 0:
            return event
        b = self.beta_fn(view)
        lo, hi = b + 1, len(view.steps) - 2
        if lo > hi or view.rng.random() >= self.prob:
            return event
        return BacktrackTo(view.labels[int(view.rng.integers(lo, hi + 1))])


def undershoot_policy_variant(base, prob: float, beta_fn=None) -> UndershootPolicy:
    return UndershootPolicy(base, prob, beta_fn)


# ---------------------------------------------------------------- lemma harness


def clopper_pearson(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """One-sided exact binomial bounds (lower, upper) at ``confidence``."""
    alpha = 1 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class LemmaStats:
    trials: int
    successes: int
    success_rate: float
    lower99: float
    upper99: float
    max_backtrack_leaves: int
    mean_backtrack_leaves: float
    bound: float
    leaf_bound: int

    @property
    def passes(self) -> bool:
        return self.lower99 >= self.bound and self.max_backtrack_leaves <= self.leaf_bound


def _lemma_trial(index, *, config, eps_gen, eps_back, golden_length, mode, undershoot, seed,
                 log=False):
    policy = SyntheticPolicy(config.gamma, eps_gen, eps_back, golden_length, mode)
    if undershoot:
        policy = UndershootPolicy(policy, undershoot)
    out = build_tree(policy, policy.root() if hasattr(policy, "root") else policy.base.root(),
                     config, rng=trial_rng(seed, index))
    text = write_transcript(out, (seed, index)) if log else None
    return out.solved, out.backtrack_leaves, text


def simulate_success_lemma(config: EngineConfig, trials: int, *, eps_gen: float | None = None,
                           eps_back: float | None = None, golden_length: int | None = None,
                           mode: str = "tmax", undershoot: float = 0.0, seed: int | None = None,
                           workers: int = 1, log_file=None) -> LemmaStats:
    """Monte Carlo check of the success lemma for the synthetic policy.

    Defaults put the policy exactly at the lemma's epsilon and the longest
    admissible golden path (T_max - 1 steps).
    """
    if trials < 1:
        raise ParameterError("trials must be positive")
    eps_gen = config.epsilon if eps_gen is None else eps_gen
    eps_back = config.epsilon if eps_back is None else eps_back
    golden_length = config.T_max - 1 if golden_length is None else golden_length
    if golden_length >= config.T_max:
        raise ParameterError("golden path must be shorter than T_max")
    seed = config.seed if seed is None else seed
    fn = partial(_lemma_trial, config=config, eps_gen=eps_gen, eps_back=eps_back,
                 golden_length=golden_length, mode=mode, undershoot=undershoot, seed=seed,
                 log=log_file is not None)
    rows = map_trials(fn, range(trials), workers)
    if log_file is not None:
        for _, _, text in rows:
            log_file.write(text)
    solved = sum(1 for s, _, _ in rows if s)
    leaves = [b for _, b, _ in rows]
    lo, hi = clopper_pearson(solved, trials)
    return LemmaStats(trials, solved, solved / trials, lo, hi, max(leaves),
                      float(np.mean(leaves)), 1 - 4 * config.delta, config.lemma_leaf_bound)


def write_transcript(outcome: TreeOutcome, seed) -> str:
    """Tree log followed by a one-line outcome record."""
    buf = io.StringIO()
    buf.write(serialize_tree(outcome.tree))
    if isinstance(seed, tuple):
        seed = ":".join(str(s) for s in seed)
    buf.write(f"OUTCOME solved={int(outcome.solved)} nodes={len(outcome.tree.nodes)} "
              f"backtracks={outcome.backtrack_leaves} seed={seed}\n")
    return buf.getvalue()
