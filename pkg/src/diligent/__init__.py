"""Search-tree reasoning with learned backtracking, plus the baselines and
numerical checks that go with it."""

from .core import (
    BacktrackTo,
    Done,
    EngineConfig,
    GoldenPath,
    NodeCreate,
    ParameterError,
    ReasoningChain,
    SearchTree,
    Step,
    StepKind,
    derive_constants,
    parse_tree,
    serialize_tree,
)
from .engine import Result, build_tree, simulate_success_lemma
from .problems import FAMILIES, Task, generate

__version__ = "0.1.0"

__all__ = [
    "BacktrackTo",
    "Done",
    "EngineConfig",
    "GoldenPath",
    "NodeCreate",
    "ParameterError",
    "ReasoningChain",
    "SearchTree",
    "Step",
    "StepKind",
    "derive_constants",
    "parse_tree",
    "serialize_tree",
    "Result",
    "build_tree",
    "simulate_success_lemma",
    "FAMILIES",
    "Task",
    "generate",
    "__version__",
]
