"""Reference methods that lack the diligent learner's backtracking.

All of them share the learners' hypothesis class (softmax-linear over the
same feature map) and the same normalized SGD step, so a difference in
solve rate comes from search and curriculum, not model capacity.

Every search method counts ``nodes``: reasoning steps it generated,
rollout steps included. A ``node_budget`` caps that count.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .core import ParameterError, Step, StepKind
from .engine import clopper_pearson
from .learners import FeatureMap, StepGenerator, sgd_train
from .problems import Task

__all__ = [
    "UnknownMethodError",
    "METHODS",
    "BaselineConfig",
    "TrialResult",
    "ValueScorer",
    "RolloutBatch",
    "make_generator",
    "sft_train",
    "sample_chain",
    "sft_infer",
    "teacher_forced_accuracy",
    "tot_bfs",
    "tot_dfs",
    "mcts_puct",
    "grpo_sim",
    "r3_train",
    "auc",
    "run_baseline",
    "summarize",
    "rows_csv",
    "summary_csv",
]

METHODS = ("sft", "tot-bfs", "tot-dfs", "mcts", "grpo", "r3")


class UnknownMethodError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineConfig:
    epochs: float = 10.0
    learning_rate: float = 0.1
    width: int = 8                 # ToT-BFS beam
    proposals: int = 3             # ToT samples per expansion, deduplicated
    reject_below: float = 0.0      # ToT-DFS scorer rejection threshold
    node_budget: int = 20_000
    simulations: int = 1000
    c_puct: float = 1.0
    batch: int = 8
    iterations: int = 100
    r3_iterations: int = 800       # per curriculum stage
    normalize_advantage: bool = False
    seed: int = 0


@dataclass
class TrialResult:
    solved: bool
    nodes: int
    seed: int | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)


def _T_max(task_or_inst) -> int:
    return task_or_inst.golden_length + 2


def make_generator(task: Task, T_max: int | None = None, local_context: bool = True) -> StepGenerator:
    T_max = _T_max(task) if T_max is None else T_max
    window = task.window if local_context else None
    size = task.window_len if window else task.root_len + T_max
    fm = FeatureMap(size, 2, "anchored", window=window)
    return StepGenerator(fm, task.n_slots, T_max, candidates=task.candidates)


# ------------------------------------------------------------------ SFT


def _teacher_forcing(gen: StepGenerator, paths):
    depths, slots, phis = [], [], []
    for g in paths:
        for k in range(1, len(g)):
            depths.append(min(k, gen.max_depth))
            slots.append(gen.slot_of(g[:k], g[k]))
            phis.append(gen.features(g[:k]))
    return np.array(depths), np.array(slots), np.array(phis)


def sft_train(task: Task, golden: Sequence, config: BaselineConfig = BaselineConfig(),
              gen: StepGenerator | None = None) -> StepGenerator:
    """Teacher forcing on every step of every golden path."""
    gen = make_generator(task) if gen is None else gen
    paths = [i.golden_path().chain.steps for i in golden]
    enc = _teacher_forcing(gen, paths)
    sgd_train(gen, None, int(config.epochs * len(enc[0])), config.learning_rate,
              config.seed, encoded=enc)
    return gen


def sample_chain(gen: StepGenerator, prefix: Sequence[Step], T_max: int, rng) -> list[Step]:
    """Autoregressive sampling until a Solution step or length T_max."""
    steps = list(prefix)
    while len(steps) < T_max:
        step = gen.sample(steps, rng)
        steps.append(step)
        if step.kind is StepKind.SOLUTION:
            break
    return steps


def sft_infer(gen: StepGenerator, instance, rng, T_max: int | None = None) -> TrialResult:
    T_max = _T_max(instance) if T_max is None else T_max
    chain = sample_chain(gen, [instance.root], T_max, rng)
    return TrialResult(bool(instance.outcome(chain)), len(chain) - 1, getattr(instance, "seed", None))


def teacher_forced_accuracy(gen: StepGenerator, golden: Sequence) -> np.ndarray:
    """Per-position argmax accuracy on ground-truth prefixes."""
    paths = [i.golden_path().chain.steps for i in golden]
    L = max(len(g) for g in paths)
    hit = np.zeros(L)
    tot = np.zeros(L)
    for g in paths:
        for k in range(1, len(g)):
            p = gen.distribution(g[:k])
            hit[k] += int(np.argmax(p)) == gen.slot_of(g[:k], g[k])
            tot[k] += 1
    with np.errstate(invalid="ignore"):
        return np.where(tot > 0, hit / np.maximum(tot, 1), np.nan)


# ------------------------------------------------------------------ scorer


class ValueScorer:
    """Logistic estimate of P(success | prefix), one weight row per depth,
    trained online from finished trials."""

    def __init__(self, features: FeatureMap, max_depth: int, learning_rate: float = 0.1):
        self.features = features
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.w = np.zeros((max_depth + 1, features.size))

    def __call__(self, steps: Sequence[Step]) -> float:
        d = min(len(steps), self.max_depth)
        z = float(self.w[d] @ self.features(steps))
        return float(1.0 / (1.0 + np.exp(-np.clip(z, -50, 50))))

    def update(self, chain: Sequence[Step], reward: float) -> None:
        for k in range(2, len(chain) + 1):
            prefix = chain[:k]
            d = min(k, self.max_depth)
            phi = self.features(prefix)
            p = self(prefix)
            self.w[d] += self.learning_rate * (reward - p) * phi / (phi @ phi)


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, bool)
    pos, neg = labels.sum(), (~labels).sum()
    if pos == 0 or neg == 0:
        return float("nan")
    r = rankdata(scores)
    return float((r[labels].sum() - pos * (pos + 1) / 2) / (pos * neg))


# ------------------------------------------------------------------ ToT


def _proposals(gen, steps, k, rng) -> list[Step]:
    out = []
    for _ in range(k):
        s = gen.sample(steps, rng)
        if s not in out:
            out.append(s)
    return out


def tot_bfs(instance, gen: StepGenerator, scorer: ValueScorer, rng, *, width: int = 8,
            proposals: int = 3, node_budget: int | None = None, T_max: int | None = None) -> TrialResult:
    """Level-synchronous beam search; a Solution step ends its branch and
    the trial is solved if any finished branch passes the validator."""
    if width < 1:
        raise ParameterError("width must be >= 1")
    T_max = _T_max(instance) if T_max is None else T_max
    beam = [[instance.root]]
    nodes = 0
    finished = []
    while beam and (node_budget is None or nodes < node_budget):
        children = []
        for steps in beam:
            if len(steps) >= T_max:
                continue
            for s in _proposals(gen, steps, proposals, rng):
                nodes += 1
                child = steps + [s]
                if s.kind is StepKind.SOLUTION:
                    finished.append(child)
                else:
                    children.append(child)
        if not children:
            break
        scores = np.array([scorer(c) for c in children])
        # stable order so ties keep proposal order
        keep = np.argsort(-scores, kind="stable")[:width]
        beam = [children[i] for i in keep]
    solved = any(instance.outcome(c) for c in finished)
    for c in finished:
        scorer.update(c, float(instance.outcome(c)))
    return TrialResult(solved, nodes, getattr(instance, "seed", None))


def tot_dfs(instance, gen: StepGenerator, scorer: ValueScorer, rng, *, proposals: int = 3,
            reject_below: float = 0.0, node_budget: int = 20_000,
            T_max: int | None = None) -> TrialResult:
    """Depth-first search that only ever steps back to the parent.

    Children are proposals ordered by the scorer; a child scoring below
    ``reject_below``, a rejected Solution or a chain at T_max is abandoned
    and the next sibling is tried.
    """
    T_max = _T_max(instance) if T_max is None else T_max
    nodes = 0
    finished = []
    stack = [([instance.root], None)]   # (prefix, remaining children)
    solved = False
    while stack and nodes < node_budget:
        steps, todo = stack[-1]
        if todo is None:
            if len(steps) >= T_max:
                stack.pop()
                continue
            props = _proposals(gen, steps, proposals, rng)
            sc = [scorer(steps + [s]) for s in props]
            order = np.argsort(-np.array(sc), kind="stable")
            todo = [(props[i], sc[i]) for i in order]
            stack[-1] = (steps, todo)
        if not todo:
            stack.pop()
            continue
        s, score = todo.pop(0)
        nodes += 1
        child = steps + [s]
        if s.kind is StepKind.SOLUTION:
            finished.append(child)
            if instance.outcome(child):
                solved = True
                break
            continue
        if score < reject_below:
            continue
        stack.append((child, None))
    for c in finished:
        scorer.update(c, float(instance.outcome(c)))
    return TrialResult(solved, nodes, getattr(instance, "seed", None))


# ------------------------------------------------------------------ MCTS


class _MNode:
    __slots__ = ("steps", "children", "N", "W", "P", "terminal")

    def __init__(self, steps, prior, terminal):
        self.steps = steps
        self.children: dict[int, _MNode] = {}
        self.N = 0
        self.W = 0.0
        self.P = prior
        self.terminal = terminal

    @property
    def Q(self) -> float:
        return self.W / self.N if self.N else 0.0


def mcts_puct(instance, gen: StepGenerator, rng, *, simulations: int = 1000, c_puct: float = 1.0,
              node_budget: int | None = None, T_max: int | None = None,
              stop_on_solve: bool = True) -> TrialResult:
    """Selection by Q + c P sqrt(N) / (1 + n), expansion of one child,
    evaluation by a generator rollout scored with the outcome reward,
    backpropagation of visits and value.

    The outcome reward is the validator, so a rewarded rollout is a
    verified solution; by default the search ends there."""
    if simulations < 1:
        raise ParameterError("simulations must be >= 1")
    T_max = _T_max(instance) if T_max is None else T_max
    root = _MNode([instance.root], None, False)
    nodes = 0
    rewards = []
    for _ in range(simulations):
        if node_budget is not None and nodes >= node_budget:
            break
        node = root
        path = [root]
        while True:
            if node.terminal:
                break
            if node.P is None:
                node.P = gen.distribution(node.steps)
            sq = np.sqrt(max(node.N, 1))
            best, best_u = None, -np.inf
            for a, p in enumerate(node.P):
                ch = node.children.get(a)
                q = ch.Q if ch else 0.0
                n = ch.N if ch else 0
                u = q + c_puct * p * sq / (1 + n)
                if u > best_u:
                    best, best_u = a, u
            ch = node.children.get(best)
            if ch is None:
                step = gen.candidates(node.steps)[best]
                steps = node.steps + [step]
                nodes += 1
                term = step.kind is StepKind.SOLUTION or len(steps) >= T_max
                ch = _MNode(steps, None, term)
                node.children[best] = ch
                path.append(ch)
                node = ch
                break
            path.append(ch)
            node = ch
        if node.terminal:
            chain = node.steps
        else:
            chain = sample_chain(gen, node.steps, T_max, rng)
            nodes += len(chain) - len(node.steps)
        r = float(instance.outcome(chain))
        rewards.append(r)
        for v in path:
            v.N += 1
            v.W += r
        if r > 0 and stop_on_solve:
            break
    rewards = np.array(rewards)
    q_root = {a: ch.Q for a, ch in root.children.items()}
    return TrialResult(bool(rewards.max(initial=0.0) > 0), nodes, getattr(instance, "seed", None),
                       extra={"reward_signal_rate": float(rewards.mean()) if len(rewards) else 0.0,
                              "simulations": len(rewards), "root_q": q_root})


# ------------------------------------------------------------------ RL


@dataclass
class RolloutBatch:
    chains: list
    rewards: np.ndarray
    advantages: np.ndarray

    @classmethod
    def build(cls, chains, rewards, normalize: bool = False) -> "RolloutBatch":
        r = np.asarray(rewards, float)
        adv = r - r.mean()
        if normalize:
            sd = r.std()
            adv = adv / sd if sd > 0 else adv
        return cls(list(chains), r, adv)

    @property
    def zero_signal(self) -> bool:
        return bool(np.all(self.rewards == self.rewards[0]))


def _pg_update(gen: StepGenerator, chain, start: int, adv: float, lr: float) -> None:
    # REINFORCE on the generated suffix: the log-loss step scaled by the advantage
    for k in range(start, len(chain)):
        ctx = chain[:k]
        gen.sgd_step(min(k, gen.max_depth), gen.slot_of(ctx, chain[k]), gen.features(ctx), lr * adv)


@dataclass
class GRPOResult:
    zero_signal_fraction: float
    mean_reward: np.ndarray
    final_accuracy: float


def grpo_sim(gen: StepGenerator, instances: Sequence, rng, *, batch: int = 8, iterations: int = 100,
             learning_rate: float = 0.1, normalize: bool = False, eval_instances: Sequence = (),
             T_max: int | None = None) -> GRPOResult:
    """Group rollouts from the problem statement with advantage = reward
    minus the batch mean. Start from a cold-start (SFT) generator."""
    zero = 0
    means = []
    for it in range(iterations):
        inst = instances[it % len(instances)]
        tm = _T_max(inst) if T_max is None else T_max
        chains = [sample_chain(gen, [inst.root], tm, rng) for _ in range(batch)]
        rb = RolloutBatch.build(chains, [inst.outcome(c) for c in chains], normalize)
        means.append(rb.rewards.mean())
        if rb.zero_signal:
            zero += 1
            continue
        for c, a in zip(rb.chains, rb.advantages):
            _pg_update(gen, c, 1, a, learning_rate)
    acc = float(np.mean([sft_infer(gen, i, rng, T_max).solved for i in eval_instances])) if eval_instances else float("nan")
    return GRPOResult(zero / iterations if iterations else 0.0, np.array(means), acc)


@dataclass
class R3Result:
    stage_accuracy: list
    final_accuracy: float
    generator: StepGenerator


def r3_train(task: Task, golden: Sequence, eval_instances: Sequence, rng, *,
             iterations: int = 200, batch: int = 8, learning_rate: float = 0.1,
             gen: StepGenerator | None = None) -> R3Result:
    """Reverse curriculum with outcome-reward policy gradient and no
    backtracking: stage s starts from the golden prefix s steps before
    the end and samples the rest."""
    gen = make_generator(task) if gen is None else gen
    paths = [i.golden_path().chain.steps for i in golden]
    L = max(len(g) for g in paths)
    T_max = L + 2
    accs = []
    for s in range(1, L):
        pool = [(inst, g) for inst, g in zip(golden, paths) if len(g) > s]
        for it in range(iterations):
            inst, g = pool[int(rng.integers(len(pool)))]
            k = len(g) - s
            chains = [sample_chain(gen, g[:k], T_max, rng) for _ in range(batch)]
            rb = RolloutBatch.build(chains, [inst.outcome(c) for c in chains])
            if rb.zero_signal:
                continue
            for c, a in zip(rb.chains, rb.advantages):
                _pg_update(gen, c, k, a, learning_rate)
        hits = []
        for inst in eval_instances:
            g = inst.golden_path().chain.steps
            if len(g) <= s:
                continue
            c = sample_chain(gen, g[:len(g) - s], T_max, rng)
            hits.append(inst.outcome(c))
        accs.append(float(np.mean(hits)) if hits else float("nan"))
    return R3Result(accs, accs[-1], gen)


# ------------------------------------------------------------------ harness


def run_baseline(method: str, task: Task, golden: Sequence, instances: Sequence,
                 config: BaselineConfig = BaselineConfig(), node_budget: int | None = None) -> list[TrialResult]:
    """One TrialResult per instance, in order. Per-trial randomness comes
    from (config.seed, trial index)."""
    if method not in METHODS:
        raise UnknownMethodError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    budget = config.node_budget if node_budget is None else node_budget
    gen = sft_train(task, golden, config)
    results = []
    if method == "grpo":
        rng = np.random.default_rng([config.seed, 1])
        grpo_sim(gen, golden, rng, batch=config.batch, iterations=config.iterations,
                 learning_rate=config.learning_rate, normalize=config.normalize_advantage)
    elif method == "r3":
        rng = np.random.default_rng([config.seed, 2])
        gen = r3_train(task, golden, [], rng, iterations=config.r3_iterations, batch=config.batch,
                       learning_rate=config.learning_rate, gen=make_generator(task)).generator
    scorer = ValueScorer(gen.features, gen.max_depth)
    for i, inst in enumerate(instances):
        rng = np.random.default_rng([config.seed, 1000, i])
        t0 = time.perf_counter()
        if method in ("sft", "grpo", "r3"):
            res = sft_infer(gen, inst, rng)
        elif method == "tot-bfs":
            res = tot_bfs(inst, gen, scorer, rng, width=config.width, proposals=config.proposals,
                          node_budget=node_budget)
        elif method == "tot-dfs":
            res = tot_dfs(inst, gen, scorer, rng, proposals=config.proposals,
                          reject_below=config.reject_below, node_budget=budget)
        else:
            res = mcts_puct(inst, gen, rng, simulations=config.simulations, c_puct=config.c_puct,
                            node_budget=node_budget)
        res.seed = inst.seed
        res.wall_time = time.perf_counter() - t0
        results.append(res)
    return results


@dataclass(frozen=True)
class Summary:
    method: str
    family: str
    n: int
    trials: int
    solved: int
    solve_rate: float
    lower99: float
    upper99: float
    nodes_visited: float
    wall_time: float


def summarize(method: str, task: Task, results: Sequence[TrialResult]) -> Summary:
    k = sum(r.solved for r in results)
    n = len(results)
    lo, hi = clopper_pearson(k, n) if n else (0.0, 1.0)
    return Summary(method, task.family, task.n, n, k, k / n if n else float("nan"), lo, hi,
                   float(np.median([r.nodes for r in results])) if n else 0.0,
                   float(sum(r.wall_time for r in results)))


SUMMARY_COLUMNS = ("method", "family", "n", "trials", "solveRate", "nodesVisited", "wallTime")
TRIAL_COLUMNS = ("method", "family", "n", "seed", "solved", "nodesVisited", "backtrackLeaves")


def summary_csv(summaries: Sequence[Summary], wall_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = SUMMARY_COLUMNS if wall_time else SUMMARY_COLUMNS[:-1]
    w.writerow(cols)
    for s in summaries:
        row = [s.method, s.family, s.n, s.trials, f"{s.solve_rate:.6f}", f"{s.nodes_visited:.1f}"]
        if wall_time:
            row.append(f"{s.wall_time:.3f}")
        w.writerow(row)
    return buf.getvalue()


def rows_csv(method: str, task: Task, results: Sequence[TrialResult]) -> str:
    """Per-trial rows. Wall time stays out so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in results:
        w.writerow([method, task.family, task.n, r.seed, int(r.solved), r.nodes,
                    r.extra.get("backtrack_leaves", 0)])
    return buf.getvalue()
