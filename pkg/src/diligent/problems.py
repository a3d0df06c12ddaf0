"""Synthetic problem families with exact validators and beta oracles.

Three families:

* drift: a +-1 input of length 2n, a hidden permutation, and a chain
  whose first step is an n-bit parity followed by purely local updates.
* graph: shortest s->t path in a two-row layered graph whose first
  choice (start row) is a parity of the odd-layer bits.
* mult: the carry-free digit product g(x) used by the SGD hardness
  construction. Only the functions are needed there, not chains.

Boosted variants concatenate independent copies ("components"). Steps of
a boosted chain are serialized one component at a time.

Permutations are 0-based throughout.
"""

from __future__ import annotations

import enum
import heapq
import math
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import GoldenPath, ParameterError, ReasoningChain, Step, StepKind

__all__ = [
    "InputMismatchError",
    "Verdict",
    "VerdictKind",
    "DriftChainInstance",
    "BoostedDriftInstance",
    "PathGraphInstance",
    "BoostedGraphInstance",
    "MultInstance",
    "drift_golden_path",
    "drift_validate",
    "graph_build",
    "shortest_path_oracle",
    "parity_predictor",
    "graph_golden_path",
    "boosted_concat",
    "beta_oracle",
    "mult_g",
    "mult_f",
    "generate",
    "instance_to_text",
    "instance_from_text",
]


class InputMismatchError(ValueError):
    """The chain's first step is not this instance's input."""


class VerdictKind(enum.Enum):
    CORRECT_COMPLETE = "CorrectComplete"
    CORRECT_PREFIX = "CorrectPrefix"
    INCORRECT = "Incorrect"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    beta: int | None = None

    @property
    def ok(self) -> bool:
        return self.kind is not VerdictKind.INCORRECT

    @classmethod
    def complete(cls):
        return cls(VerdictKind.CORRECT_COMPLETE)

    @classmethod
    def prefix(cls):
        return cls(VerdictKind.CORRECT_PREFIX)

    @classmethod
    def incorrect(cls, beta: int):
        return cls(VerdictKind.INCORRECT, beta)


def _steps(chain) -> tuple[Step, ...]:
    if isinstance(chain, ReasoningChain):
        return chain.steps
    return tuple(chain)


def _check_perm(pi, size: int) -> tuple[int, ...]:
    pi = tuple(int(p) for p in pi)
    if sorted(pi) != list(range(size)):
        raise ParameterError(f"not a permutation of 0..{size - 1}: {pi}")
    return pi


def _check_signs(x, size: int) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if len(x) != size or any(v not in (-1, 1) for v in x):
        raise ParameterError(f"expected {size} symbols in {{-1, +1}}")
    return x


class _ChainFamily:
    """Shared validator logic for families with a unique golden path.

    Subclasses provide ``_golden`` (tuple of Steps), ``answer`` (payload of
    the Solution step) and optionally ``component_ends``.
    """

    family = ""
    _golden: tuple[Step, ...]

    @property
    def root(self) -> Step:
        return self._golden[0]

    @property
    def golden_length(self) -> int:
        return len(self._golden)

    @property
    def answer(self) -> tuple[int, ...]:
        return self._golden[-1].payload

    def golden_path(self) -> GoldenPath:
        return GoldenPath(ReasoningChain(self._golden), getattr(self, "seed", None))

    def _lcp(self, steps) -> int:
        g = self._golden
        k = 1
        while k < len(steps) and k < len(g) and steps[k] == g[k]:
            k += 1
        return k

    def validate(self, chain) -> Verdict:
        steps = _steps(chain)
        if not steps or steps[0].payload != self.root.payload:
            raise InputMismatchError("chain root differs from the instance input")
        k = self._lcp(steps)
        if k == len(steps):
            if k == len(self._golden):
                return Verdict.complete()
            return Verdict.prefix()
        return Verdict.incorrect(k)

    def beta(self, chain) -> int:
        """Longest prefix of ``chain`` that still extends to the golden path.

        The golden path is unique in every family here, so this is the
        longest common prefix with it.
        """
        steps = _steps(chain)
        if not steps or steps[0].payload != self.root.payload:
            raise InputMismatchError("chain root differs from the instance input")
        return self._lcp(steps)

    def outcome(self, chain) -> bool:
        """Outcome reward: the Solution step carries the right answer."""
        steps = _steps(chain)
        return (len(steps) > 1 and steps[-1].kind is StepKind.SOLUTION
                and steps[-1].payload == self.answer)

    # -- hooks for learners and the engine

    @property
    def component_ends(self) -> tuple[int, ...]:
        """Chain indices (0-based) of the last step of each component."""
        return ()

    @property
    def component_starts(self) -> tuple[int, ...]:
        """Chain indices of nodes whose next step opens a component."""
        return (0,) + tuple(self.component_ends[:-1])

    def checkpoint(self, chain) -> bool | None:
        """Validator gate used during search.

        Returns None where nothing is checked, else whether the chain is
        still on track. Solution steps are checked by outcome, component
        ends by the component's own outcome.
        """
        steps = _steps(chain)
        last = len(steps) - 1
        if steps[-1].kind is StepKind.SOLUTION:
            return self.outcome(steps)
        if last in self.component_ends:
            return self._component_ok(steps, last)
        return None

    def _component_ok(self, steps, last: int) -> bool:
        return steps[last] == self._golden[last]

    def candidates(self, chain) -> list[Step]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------- drift


def _drift_values(n: int, pi: Sequence[int], x: Sequence[int]) -> list[int]:
    """v_2 .. v_{n-2} for one component."""
    v = 1
    for i in range(n):
        v *= x[pi[i]]
    values = [v]
    for i in range(3, n - 1):
        v = v * x[pi[i - 1]]
        values.append(v)
    return values


@dataclass(frozen=True, eq=False)
class DriftChainInstance(_ChainFamily):
    n: int
    pi: tuple[int, ...]
    x: tuple[int, ...]
    seed: int | None = None

    family = "drift"

    def __post_init__(self):
        if self.n < 6 or self.n % 2:
            raise ParameterError("drift needs an even n >= 6")
        object.__setattr__(self, "pi", _check_perm(self.pi, 2 * self.n))
        object.__setattr__(self, "x", _check_signs(self.x, 2 * self.n))
        values = _drift_values(self.n, self.pi, self.x)
        steps = [Step(self.x, StepKind.ROOT)]
        steps += [Step((v,)) for v in values[:-1]]
        steps.append(Step((values[-1],), StepKind.SOLUTION))
        object.__setattr__(self, "_golden", tuple(steps))

    def remark_parity(self) -> int:
        p = self.pi
        return self.x[p[0]] * self.x[p[1]] * self.x[p[self.n - 2]] * self.x[p[self.n - 1]]

    def candidates(self, chain) -> list[Step]:
        return [Step((1,)), Step((-1,)),
                Step((1,), StepKind.SOLUTION), Step((-1,), StepKind.SOLUTION)]

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "pi": list(self.pi),
                "x": list(self.x), "seed": self.seed}


@dataclass(frozen=True, eq=False)
class BoostedDriftInstance(_ChainFamily):
    """Independent drift copies; ``x[j]`` and ``pis[j]`` belong to copy j.

    Each copy contributes its steps v_2..v_{n-2} in turn; the Solution
    step lists every copy's final value. n = 4 is allowed here (one step
    per copy) so search baselines can be run at small sizes.
    """

    n: int
    pis: tuple[tuple[int, ...], ...]
    x: tuple[tuple[int, ...], ...]
    seed: int | None = None

    family = "boosted-drift"

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ParameterError("boosted drift needs an even n >= 4")
        if len(self.pis) != len(self.x) or not self.pis:
            raise ParameterError("need one permutation per component")
        pis = tuple(_check_perm(p, 2 * self.n) for p in self.pis)
        xs = tuple(_check_signs(c, 2 * self.n) for c in self.x)
        object.__setattr__(self, "pis", pis)
        object.__setattr__(self, "x", xs)
        root = tuple(v for col in xs for v in col)
        steps = [Step(root, StepKind.ROOT)]
        finals, ends = [], []
        for p, col in zip(pis, xs):
            values = _drift_values(self.n, p, col)
            steps += [Step((v,)) for v in values]
            finals.append(values[-1])
            ends.append(len(steps) - 1)
        steps.append(Step(tuple(finals), StepKind.SOLUTION))
        object.__setattr__(self, "_golden", tuple(steps))
        object.__setattr__(self, "_ends", tuple(ends))

    @property
    def components(self) -> int:
        return len(self.pis)

    @property
    def component_ends(self) -> tuple[int, ...]:
        return self._ends

    def component(self, j: int) -> DriftChainInstance | None:
        if self.n < 6:
            return None
        return DriftChainInstance(self.n, self.pis[j], self.x[j])

    def finals(self, steps) -> tuple[int, ...]:
        return tuple(steps[e].last if e < len(steps) else 0 for e in self._ends)

    def candidates(self, chain) -> list[Step]:
        steps = _steps(chain)
        return [Step((1,)), Step((-1,)), Step(self.finals(steps), StepKind.SOLUTION)]

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "pis": [list(p) for p in self.pis],
                "x": [list(c) for c in self.x], "seed": self.seed}


def drift_golden_path(instance: DriftChainInstance) -> GoldenPath:
    return instance.golden_path()


def drift_validate(instance: DriftChainInstance, chain) -> Verdict:
    return instance.validate(chain)


# ---------------------------------------------------------------- graph


def _graph_rows(n: int, pi: Sequence[int], x: Sequence[int]) -> list[int]:
    """Row (+1 = a, -1 = b) of the zero-weight path at layers 0..n."""
    row = parity_of(x[pi[j - 1]] for j in range(1, n + 1, 2))
    rows = [row]
    for j in range(1, n + 1):
        if j % 2:
            row *= x[pi[j - 1]]
        rows.append(row)
    return rows


def parity_of(values) -> int:
    p = 1
    for v in values:
        p *= v
    return p


@dataclass(frozen=True, eq=False)
class PathGraphInstance(_ChainFamily):
    n: int
    pi: tuple[int, ...]
    x: tuple[int, ...]
    seed: int | None = None

    family = "graph"

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ParameterError("graph needs an even n >= 2")
        object.__setattr__(self, "pi", _check_perm(self.pi, self.n))
        object.__setattr__(self, "x", _check_signs(self.x, self.n))
        rows = _graph_rows(self.n, self.pi, self.x)
        steps = [Step(self.x, StepKind.ROOT)]
        steps += [Step((r,)) for r in rows]
        steps.append(Step(tuple(rows), StepKind.SOLUTION))
        object.__setattr__(self, "_golden", tuple(steps))

    def candidates(self, chain) -> list[Step]:
        steps = _steps(chain)
        rows = tuple(s.last for s in steps[1:])
        return [Step((1,)), Step((-1,)), Step(rows, StepKind.SOLUTION)]

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "pi": list(self.pi),
                "x": list(self.x), "seed": self.seed}


@dataclass(frozen=True, eq=False)
class BoostedGraphInstance(_ChainFamily):
    """Graph copies chained by zero-weight bridges t_i -> s_{i+1}."""

    n: int
    pis: tuple[tuple[int, ...], ...]
    x: tuple[tuple[int, ...], ...]
    seed: int | None = None

    family = "boosted-graph"

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ParameterError("graph needs an even n >= 2")
        if len(self.pis) != len(self.x) or not self.pis:
            raise ParameterError("need one permutation per component")
        pis = tuple(_check_perm(p, self.n) for p in self.pis)
        xs = tuple(_check_signs(c, self.n) for c in self.x)
        object.__setattr__(self, "pis", pis)
        object.__setattr__(self, "x", xs)
        steps = [Step(tuple(v for c in xs for v in c), StepKind.ROOT)]
        rows_all, ends = [], []
        for p, c in zip(pis, xs):
            rows = _graph_rows(self.n, p, c)
            steps += [Step((r,)) for r in rows]
            rows_all += rows
            ends.append(len(steps) - 1)
        steps.append(Step(tuple(rows_all), StepKind.SOLUTION))
        object.__setattr__(self, "_golden", tuple(steps))
        object.__setattr__(self, "_ends", tuple(ends))

    @property
    def components(self) -> int:
        return len(self.pis)

    @property
    def component_ends(self) -> tuple[int, ...]:
        return self._ends

    def component(self, j: int) -> PathGraphInstance:
        return PathGraphInstance(self.n, self.pis[j], self.x[j])

    def _component_ok(self, steps, last: int) -> bool:
        # the component's rows must trace a zero-weight path that can exit
        j = self._ends.index(last)
        first = last - self.n
        rows = [s.last for s in steps[first:last + 1]]
        return rows[-1] == 1 and path_weight(self.component(j), rows) == 0

    def candidates(self, chain) -> list[Step]:
        steps = _steps(chain)
        rows = tuple(s.last for s in steps[1:])
        return [Step((1,)), Step((-1,)), Step(rows, StepKind.SOLUTION)]

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "pis": [list(p) for p in self.pis],
                "x": [list(c) for c in self.x], "seed": self.seed}


@dataclass(frozen=True)
class WeightedGraph:
    nodes: tuple
    edges: tuple  # (u, v, weight)
    source: object
    sink: object

    def adjacency(self) -> dict:
        adj: dict = {u: [] for u in self.nodes}
        for u, v, w in self.edges:
            adj[u].append((v, w))
        return adj


def _layer_edges(tag, n: int, pi, x) -> list:
    edges = []
    for j in range(1, n + 1):
        a0, b0, a1, b1 = (tag, "a", j - 1), (tag, "b", j - 1), (tag, "a", j), (tag, "b", j)
        if j % 2 == 0:
            edges += [(a0, a1, 0), (b0, b1, 0)]
        else:
            straight, cross = (0, 1) if x[pi[j - 1]] == 1 else (1, 0)
            edges += [(a0, a1, straight), (b0, b1, straight),
                      (a0, b1, cross), (b0, a1, cross)]
    return edges


def graph_build(instance) -> WeightedGraph:
    """Weighted digraph of a (possibly boosted) graph instance.

    Nodes are ``(component, row, layer)`` plus ``("s", i)`` / ``("t", i)``.
    """
    if isinstance(instance, PathGraphInstance):
        parts = [(instance.pi, instance.x)]
    elif isinstance(instance, BoostedGraphInstance):
        parts = list(zip(instance.pis, instance.x))
    else:
        raise ParameterError("graph_build needs a graph instance")
    n = instance.n
    if n % 2:
        raise ParameterError("odd n")
    nodes, edges = [], []
    for i, (pi, x) in enumerate(parts):
        s, t = ("s", i), ("t", i)
        nodes += [s] + [(i, r, j) for j in range(n + 1) for r in "ab"] + [t]
        edges += [(s, (i, "a", 0), 0), (s, (i, "b", 0), 0)]
        edges += _layer_edges(i, n, pi, x)
        edges.append(((i, "a", n), t, 0))
        if i > 0:
            edges.append((("t", i - 1), s, 0))
    return WeightedGraph(tuple(nodes), tuple(edges), ("s", 0), ("t", len(parts) - 1))


def _tie_key(node) -> tuple:
    # row a before row b, then lower layer; terminals by component
    if node[0] in ("s", "t"):
        return (0, node[1], 0)
    comp, row, layer = node
    return (0 if row == "a" else 1, comp, layer)


def shortest_path_oracle(graph: WeightedGraph) -> tuple[list, int]:
    """Dijkstra from source to sink with a deterministic queue order."""
    adj = graph.adjacency()
    dist = {graph.source: 0}
    prev: dict = {}
    heap = [(0, _tie_key(graph.source), graph.source)]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == graph.sink:
            break
        for v, w in adj[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, _tie_key(v), v))
    path = [graph.sink]
    while path[-1] != graph.source:
        path.append(prev[path[-1]])
    return path[::-1], dist[graph.sink]


def path_rows(path) -> list[int]:
    """+1/-1 row indicators of the layer nodes on a path."""
    return [1 if node[1] == "a" else -1 for node in path if node[0] not in ("s", "t")]


def path_weight(instance: PathGraphInstance, rows: Sequence[int]) -> float:
    """Total weight of the layer path with the given rows (exit ignored).

    Even layers only have straight edges, so a row change there is not a
    path at all and weighs inf.
    """
    w = 0
    for j in range(1, instance.n + 1):
        if j % 2 == 0:
            if rows[j] != rows[j - 1]:
                return math.inf
        elif rows[j] != rows[j - 1] * instance.x[instance.pi[j - 1]]:
            w += 1
    return w


def parity_predictor(instance: PathGraphInstance) -> int:
    """Start row of the shortest path: product of x_pi(j) over odd layers j."""
    return parity_of(instance.x[instance.pi[j - 1]] for j in range(1, instance.n + 1, 2))


def graph_golden_path(instance) -> GoldenPath:
    return instance.golden_path()


def boosted_concat(instances: Sequence, family: str | None = None):
    """Concatenate single-copy instances into a boosted one."""
    if not instances:
        raise ParameterError("need at least one component")
    kinds = {type(i) for i in instances}
    if len(kinds) != 1:
        raise ParameterError("cannot mix families in one boosted instance")
    first = instances[0]
    if any(i.n != first.n for i in instances):
        raise ParameterError("components must share n")
    if isinstance(first, DriftChainInstance):
        if family not in (None, "drift", "boosted-drift"):
            raise ParameterError(f"family {family!r} does not match drift components")
        return BoostedDriftInstance(first.n, tuple(i.pi for i in instances),
                                    tuple(i.x for i in instances))
    if isinstance(first, PathGraphInstance):
        if family not in (None, "graph", "boosted-graph"):
            raise ParameterError(f"family {family!r} does not match graph components")
        return BoostedGraphInstance(first.n, tuple(i.pi for i in instances),
                                    tuple(i.x for i in instances))
    raise ParameterError("only drift and graph instances can be boosted")


def beta_oracle(instance, chain) -> int:
    return instance.beta(chain)


# ---------------------------------------------------------------- mult

K_DIGITS = 10


def mult_g(x: Sequence[int]) -> int:
    x = [int(d) for d in x]
    if len(x) % 2 or not x:
        raise ParameterError("mult_g needs an even, non-empty digit sequence")
    if any(not 0 <= d <= 9 for d in x):
        raise ParameterError("digits must lie in 0..9")
    m = len(x) // 2
    return sum(x[i] * x[2 * m - 1 - i] for i in range(m)) % K_DIGITS


def permute_digits(pi: Sequence[int], x: Sequence[int]) -> tuple[int, ...]:
    """x_pi: the first m digits are permuted, the rest stay put."""
    m = len(pi)
    return tuple(x[pi[i]] for i in range(m)) + tuple(x[m:])


def mult_f(pi: Sequence[int], x: Sequence[int]) -> np.ndarray:
    g = mult_g(permute_digits(pi, x))
    f = np.full(K_DIGITS, 1.0 / K_DIGITS)
    f[g] += 1.0 / K_DIGITS
    f[(g + 5) % K_DIGITS] -= 1.0 / K_DIGITS
    return f


@dataclass(frozen=True)
class MultInstance:
    m: int
    pi: tuple[int, ...]
    seed: int | None = None

    family = "mult"
    k = K_DIGITS

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError("m must be positive")
        object.__setattr__(self, "pi", _check_perm(self.pi, self.m))

    def g(self, x) -> int:
        return mult_g(permute_digits(self.pi, x))

    def f(self, x) -> np.ndarray:
        return mult_f(self.pi, x)

    def to_dict(self) -> dict:
        return {"family": self.family, "m": self.m, "pi": list(self.pi), "seed": self.seed}


# ---------------------------------------------------------------- generation and files

FAMILIES = ("drift", "graph", "boosted-drift", "boosted-graph", "mult")


def task_permutations(family: str, n: int, task_seed: int = 0,
                      components: int | None = None):
    """The hidden permutation(s) of a task. Fixed per (family, n, task_seed)
    and shared by every instance drawn from that task."""
    code = FAMILIES.index(family)
    rng = np.random.default_rng([int(task_seed), code, int(n)])
    if family == "drift":
        return tuple(int(v) for v in rng.permutation(2 * n))
    if family in ("graph", "mult"):
        return tuple(int(v) for v in rng.permutation(n))
    k = n if components is None else components
    if k < 1:
        raise ParameterError("components must be positive")
    size = 2 * n if family == "boosted-drift" else n
    return tuple(tuple(int(v) for v in rng.permutation(size)) for _ in range(k))


def generate(family: str, n: int, seed: int, components: int | None = None,
             task_seed: int = 0):
    """Deterministic instance from (family, n, seed).

    The permutation comes from ``task_seed`` (see :func:`task_permutations`);
    ``seed`` draws the input. Boosted families default to n components.
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    pi = task_permutations(family, n, task_seed, components)
    rng = np.random.default_rng(seed)
    if family == "drift":
        x = rng.choice((-1, 1), size=2 * n)
        return DriftChainInstance(n, pi, tuple(int(v) for v in x), seed)
    if family == "graph":
        x = rng.choice((-1, 1), size=n)
        return PathGraphInstance(n, pi, tuple(int(v) for v in x), seed)
    if family == "mult":
        return MultInstance(n, pi, seed)
    size = 2 * n if family == "boosted-drift" else n
    xs = tuple(tuple(int(v) for v in rng.choice((-1, 1), size=size)) for _ in pi)
    cls = BoostedDriftInstance if family == "boosted-drift" else BoostedGraphInstance
    return cls(n, pi, xs, seed)


def instance_to_text(instance) -> str:
    d = instance.to_dict()
    d["format"] = 1
    return json.dumps(d, sort_keys=True) + "\n"


def instance_from_text(text: str):
    d = json.loads(text)
    family = d.get("family")
    seed = d.get("seed")
    if family == "drift":
        return DriftChainInstance(d["n"], tuple(d["pi"]), tuple(d["x"]), seed)
    if family == "graph":
        return PathGraphInstance(d["n"], tuple(d["pi"]), tuple(d["x"]), seed)
    if family == "boosted-drift":
        return BoostedDriftInstance(d["n"], tuple(map(tuple, d["pis"])),
                                    tuple(map(tuple, d["x"])), seed)
    if family == "boosted-graph":
        return BoostedGraphInstance(d["n"], tuple(map(tuple, d["pis"])),
                                    tuple(map(tuple, d["x"])), seed)
    if family == "mult":
        return MultInstance(d["m"], tuple(d["pi"]), seed)
    raise ParameterError(f"unknown family {family!r}")


class Task:
    """A family with its hidden permutation(s) fixed; instances vary by seed.

    Candidate lists and component positions depend only on the structure,
    so they are answered by a reference instance.
    """

    def __init__(self, family: str, n: int, components: int | None = None, task_seed: int = 0):
        if family == "mult":
            raise ParameterError("the mult family has no reasoning chains")
        self.family = family
        self.n = n
        self.components = components
        self.task_seed = task_seed
        self.reference = generate(family, n, 0, components, task_seed)

    def instance(self, seed: int):
        return generate(self.family, self.n, seed, self.components, self.task_seed)

    def instances(self, seeds) -> list:
        return [self.instance(s) for s in seeds]

    @property
    def golden_length(self) -> int:
        return self.reference.golden_length

    @property
    def root_len(self) -> int:
        return len(self.reference.root.payload)

    @property
    def n_slots(self) -> int:
        return len(self.reference.candidates(self.reference.golden_path().chain.steps[:1]))

    @property
    def component_starts(self) -> tuple[int, ...]:
        return self.reference.component_starts

    @property
    def window(self) -> tuple | None:
        """(root symbols per component, component starts) for boosted tasks."""
        starts = self.component_starts
        if len(starts) < 2:
            return None
        return self.root_len // len(starts), starts

    @property
    def window_len(self) -> int:
        """Longest component-local context a chain of length <= T_max needs."""
        block, starts = self.window
        spans = [b - a for a, b in zip(starts, starts[1:])]
        return block + max(spans + [self.golden_length + 2 - starts[-1]])

    def candidates(self, steps) -> list[Step]:
        return self.reference.candidates(steps)

    def describe(self) -> dict:
        return {"family": self.family, "n": self.n, "components": self.components,
                "task_seed": self.task_seed}
