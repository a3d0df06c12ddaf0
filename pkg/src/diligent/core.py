"""Shared domain types: reasoning chains, search trees, tree events and the
search constants (epsilon, B) derived from (gamma, delta, T_max).

Payload symbols are small signed integers in [-128, 127]; the tree log
stores them one byte each (two's complement) in hex.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

__all__ = [
    "ParameterError",
    "TreeParseError",
    "MalformedLineError",
    "LabelOrderError",
    "AncestorError",
    "StepKind",
    "Step",
    "ReasoningChain",
    "GoldenPath",
    "NodeCreate",
    "BacktrackTo",
    "Done",
    "TreeEvent",
    "TreeEntry",
    "SearchTree",
    "EngineConfig",
    "derive_constants",
    "serialize_tree",
    "parse_tree",
]


class ParameterError(ValueError):
    """A parameter lies outside its admissible domain."""


class TreeParseError(ValueError):
    pass


class MalformedLineError(TreeParseError):
    pass


class LabelOrderError(TreeParseError):
    pass


class AncestorError(TreeParseError):
    pass


class StepKind(enum.Enum):
    ROOT = "root"
    INTERMEDIATE = "intermediate"
    SOLUTION = "solution"


@dataclass(frozen=True)
class Step:
    payload: tuple[int, ...]
    kind: StepKind = StepKind.INTERMEDIATE

    def __post_init__(self):
        payload = tuple(int(s) for s in self.payload)
        for s in payload:
            if not -128 <= s <= 127:
                raise ParameterError(f"symbol {s} outside [-128, 127]")
        object.__setattr__(self, "payload", payload)

    @property
    def last(self) -> int:
        return self.payload[-1] if self.payload else 0


@dataclass(frozen=True)
class ReasoningChain:
    """Ordered steps v_1..v_T. The first is the problem statement."""

    steps: tuple[Step, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ParameterError("a chain has at least one step")
        if steps[0].kind is not StepKind.ROOT:
            raise ParameterError("first step must be a Root step")
        for i, s in enumerate(steps[1:], start=1):
            if s.kind is StepKind.ROOT:
                raise ParameterError("Root step only allowed at position 1")
            if s.kind is StepKind.SOLUTION and i != len(steps) - 1:
                raise ParameterError("only the last step may be a Solution")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Step]:
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def root(self) -> Step:
        return self.steps[0]

    @property
    def is_complete(self) -> bool:
        return self.steps[-1].kind is StepKind.SOLUTION

    def prefix(self, length: int) -> "ReasoningChain":
        """First ``length`` steps (1-based length, like v_1..v_length)."""
        return ReasoningChain(self.steps[:length])

    def extend(self, step: Step) -> "ReasoningChain":
        return ReasoningChain(self.steps + (step,))

    @classmethod
    def from_payloads(cls, root: Sequence[int], steps: Iterable[Sequence[int]] = (),
                      complete: bool = False) -> "ReasoningChain":
        body = [Step(tuple(p)) for p in steps]
        if complete and body:
            body[-1] = Step(body[-1].payload, StepKind.SOLUTION)
        return cls((Step(tuple(root), StepKind.ROOT), *body))


@dataclass(frozen=True)
class GoldenPath:
    chain: ReasoningChain
    seed: int | None = None

    def __post_init__(self):
        if not self.chain.is_complete:
            raise ParameterError("a golden path ends in a Solution step")

    def __len__(self) -> int:
        return len(self.chain)


# ---------------------------------------------------------------- events


@dataclass(frozen=True)
class NodeCreate:
    payload: tuple[int, ...]


@dataclass(frozen=True)
class BacktrackTo:
    target: int


@dataclass(frozen=True)
class Done:
    payload: tuple[int, ...]


TreeEvent = Union[NodeCreate, BacktrackTo, Done]


# ---------------------------------------------------------------- trees


@dataclass(frozen=True)
class TreeEntry:
    """One labeled element of a search tree.

    ``kind`` is "node", "backtrack" or "done". Leaves keep their parent so
    the tree can be walked without replaying the event log.
    """

    label: int
    parent: int | None
    kind: str
    payload: tuple[int, ...] = ()
    target: int | None = None


@dataclass(frozen=True)
class SearchTree:
    entries: tuple[TreeEntry, ...]
    _depth: tuple[int, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        _check_tree(entries)
        depth = []
        for e in entries:
            depth.append(0 if e.parent is None else depth[e.parent] + 1)
        object.__setattr__(self, "_depth", tuple(depth))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, label: int) -> TreeEntry:
        return self.entries[label]

    @property
    def nodes(self) -> list[TreeEntry]:
        return [e for e in self.entries if e.kind == "node"]

    @property
    def leaves(self) -> list[TreeEntry]:
        return [e for e in self.entries if e.kind != "node"]

    @property
    def backtrack_leaves(self) -> list[TreeEntry]:
        return [e for e in self.entries if e.kind == "backtrack"]

    @property
    def done_leaf(self) -> TreeEntry | None:
        for e in self.entries:
            if e.kind == "done":
                return e
        return None

    def depth(self, label: int) -> int:
        return self._depth[label]

    def path(self, label: int) -> list[int]:
        """Labels from the root down to ``label`` inclusive."""
        out = []
        cur: int | None = label
        while cur is not None:
            out.append(cur)
            cur = self.entries[cur].parent
        return out[::-1]

    def chain(self, label: int) -> ReasoningChain:
        """Reasoning chain of the root-to-``label`` path (node entries only,
        a done leaf contributes its Solution step)."""
        steps = []
        for lab in self.path(label):
            e = self.entries[lab]
            if lab == 0:
                steps.append(Step(e.payload, StepKind.ROOT))
            elif e.kind == "node":
                steps.append(Step(e.payload))
            elif e.kind == "done":
                steps.append(Step(e.payload, StepKind.SOLUTION))
        return ReasoningChain(tuple(steps))


def _check_tree(entries: tuple[TreeEntry, ...]) -> None:
    if not entries:
        raise LabelOrderError("empty tree")
    seen_done = False
    for i, e in enumerate(entries):
        if e.label != i:
            raise LabelOrderError(f"label {e.label} at creation index {i}")
        if i == 0:
            if e.parent is not None or e.kind != "node":
                raise LabelOrderError("label 0 must be the root node")
            continue
        if e.parent is None or not 0 <= e.parent < i:
            raise LabelOrderError(f"entry {i} has invalid parent {e.parent}")
        if entries[e.parent].kind != "node":
            raise AncestorError(f"entry {i} hangs below a leaf")
        if e.kind == "backtrack":
            ancestors = set()
            cur = e.parent
            while cur is not None:
                ancestors.add(cur)
                cur = entries[cur].parent
            if e.target not in ancestors:
                raise AncestorError(
                    f"backtrack leaf {i} targets {e.target}, not on its root path")
        elif e.kind == "done":
            if seen_done:
                raise LabelOrderError("more than one done leaf")
            seen_done = True
        elif e.kind != "node":
            raise MalformedLineError(f"unknown entry kind {e.kind!r}")


# ---------------------------------------------------------------- log format


def _hex(payload: Sequence[int]) -> str:
    return bytes(s & 0xFF for s in payload).hex() or "-"


def _unhex(text: str) -> tuple[int, ...]:
    if text == "-":
        return ()
    raw = bytes.fromhex(text)
    return tuple(b - 256 if b > 127 else b for b in raw)


def serialize_tree(tree: SearchTree) -> str:
    """One event per line: ``N label parent hex``, ``B label target``,
    ``D label hex``. The root's parent is written as ``-``."""
    lines = []
    for e in tree.entries:
        if e.kind == "node":
            parent = "-" if e.parent is None else str(e.parent)
            lines.append(f"N {e.label} {parent} {_hex(e.payload)}")
        elif e.kind == "backtrack":
            lines.append(f"B {e.label} {e.target}")
        else:
            lines.append(f"D {e.label} {_hex(e.payload)}")
    return "\n".join(lines) + "\n"


def parse_tree(text: str) -> SearchTree:
    """Inverse of :func:`serialize_tree`.

    Leaves carry no explicit parent: a leaf hangs off the current node,
    which is the last created node, or the target of the last backtrack.
    """
    entries: list[TreeEntry] = []
    current: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        tag = parts[0]
        try:
            label = int(parts[1])
        except (IndexError, ValueError):
            raise MalformedLineError(f"line {lineno}: {line!r}") from None
        if label != len(entries):
            raise LabelOrderError(f"line {lineno}: label {label}, expected {len(entries)}")
        try:
            if tag == "N" and len(parts) == 4:
                parent = None if parts[2] == "-" else int(parts[2])
                if parent is not None and not 0 <= parent < label:
                    raise LabelOrderError(f"line {lineno}: parent {parent} not yet created")
                if parent is not None and entries[parent].kind != "node":
                    raise AncestorError(f"line {lineno}: parent {parent} is a leaf")
                if (parent is None) != (label == 0):
                    raise LabelOrderError(f"line {lineno}: only label 0 is parentless")
                entries.append(TreeEntry(label, parent, "node", _unhex(parts[3])))
                current = label
            elif tag == "B" and len(parts) == 3:
                target = int(parts[2])
                if current is None:
                    raise MalformedLineError(f"line {lineno}: leaf before root")
                entries.append(TreeEntry(label, current, "backtrack", target=target))
                _check_ancestor(entries, label, lineno)
                current = target
            elif tag == "D" and len(parts) == 3:
                if current is None:
                    raise MalformedLineError(f"line {lineno}: leaf before root")
                entries.append(TreeEntry(label, current, "done", _unhex(parts[2])))
            else:
                raise MalformedLineError(f"line {lineno}: {line!r}")
        except ValueError as exc:
            if isinstance(exc, TreeParseError):
                raise
            raise MalformedLineError(f"line {lineno}: {line!r}") from None
    try:
        return SearchTree(tuple(entries))
    except TreeParseError:
        raise
    except ParameterError as exc:
        raise MalformedLineError(str(exc)) from None


def _check_ancestor(entries: list[TreeEntry], label: int, lineno: int) -> None:
    e = entries[label]
    cur = e.parent
    while cur is not None:
        if cur == e.target:
            return
        cur = entries[cur].parent
    raise AncestorError(f"line {lineno}: backtrack target {e.target} is not an ancestor")


# ---------------------------------------------------------------- constants


def derive_constants(gamma: float, delta: float, T_max: int) -> tuple[float, int]:
    """Return ``(epsilon, B)`` with epsilon = gamma*delta/(2*T_max) and
    B = ceil(ln(T_max/delta)/gamma). Natural log, as required by the
    1 - x <= exp(-x) step of the success bound."""
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    if not 0.0 < delta < 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2), got {delta}")
    if int(T_max) != T_max or T_max < 2:
        raise ParameterError(f"T_max must be an integer >= 2, got {T_max}")
    epsilon = gamma * delta / (2 * T_max)
    B = math.ceil(math.log(T_max / delta) / gamma)
    return epsilon, max(B, 1)


@dataclass(frozen=True)
class EngineConfig:
    gamma: float
    delta: float
    T_max: int
    epsilon: float
    B: int
    leaf_budget: int
    seed: int = 0

    def __post_init__(self):
        eps, B = derive_constants(self.gamma, self.delta, self.T_max)
        if not math.isclose(eps, self.epsilon, rel_tol=1e-12) or B != self.B:
            raise ParameterError("epsilon and B must match derive_constants(gamma, delta, T_max)")
        if self.leaf_budget < 1:
            raise ParameterError("leaf_budget must be positive")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @classmethod
    def create(cls, gamma: float, delta: float, T_max: int, *, seed: int = 0,
               leaf_budget: int | None = None) -> "EngineConfig":
        eps, B = derive_constants(gamma, delta, T_max)
        if leaf_budget is None:
            leaf_budget = default_leaf_budget(B, T_max)
        return cls(gamma, delta, T_max, eps, B, leaf_budget, seed)

    @property
    def lemma_leaf_bound(self) -> int:
        return (self.B - 1) * (self.T_max - 1)


def default_leaf_budget(B: int, T_max: int) -> int:
    # lemma bound plus one golden path worth of slack
    return (B - 1) * (T_max - 1) + T_max
