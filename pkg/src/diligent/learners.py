"""Softmax-linear learners over low-degree monomials of +-1 context symbols.

The context of a chain is the root payload followed by the last symbol of
every later step, padded with 0 up to a fixed length. "last" denotes the
last symbol of the current (deepest) step.

Two learners share the feature map:

* StepGenerator: a distribution over the family's candidate steps, one
  weight table per chain depth.
* BacktrackClassifier: a distribution over proper ancestors, scored by
  the offset from the current node, a slot-conditioned score of the
  ancestor's child and a few position indicators (root, start of the
  current component, any component start).
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BacktrackTo, Done, NodeCreate, ParameterError, Step, StepKind, TreeEvent

__all__ = [
    "DivergenceError",
    "CheckpointMismatchError",
    "FeatureMap",
    "TrainingExample",
    "StepGenerator",
    "BacktrackClassifier",
    "sgd_train",
    "estimate_gamma",
    "predict_backtrack",
    "save_checkpoint",
    "load_checkpoint",
]

LAST = -1
CHECKPOINT_VERSION = 2


class DivergenceError(FloatingPointError):
    """SGD produced a non-finite loss."""


class CheckpointMismatchError(ValueError):
    """A checkpoint was written for a different feature index or config."""


class FeatureMap:
    """Monomials over context positions; ``LAST`` (-1) is the current step.

    mode "anchored" keeps the constant, ``last`` and every pair
    ``(i, last)``; mode "full" keeps every monomial up to ``degree``.

    With ``window=(block, starts)`` the context is local to the component
    of the step being predicted: that component's ``block`` root symbols
    followed by its own earlier steps. ``starts`` are the chain indices
    after which a component opens.
    """

    def __init__(self, context_len: int, degree: int = 2, mode: str = "anchored",
                 cap: int = 200_000, window: tuple | None = None):
        if context_len < 1 or degree < 0:
            raise ParameterError("context_len >= 1 and degree >= 0 required")
        self.context_len = context_len
        self.degree = degree
        self.mode = mode
        if window is not None:
            block, starts = window
            window = (int(block), tuple(int(v) for v in starts))
            if window[0] < 1 or not window[1] or window[1][0] != 0:
                raise ParameterError("window needs a positive block and starts beginning at 0")
        self.window = window
        self._index_cache: dict = {}
        positions = list(range(context_len)) + [LAST]
        if mode == "anchored":
            if degree < 2:
                raise ParameterError("anchored features need degree >= 2")
            monos = [(), (LAST,)] + [(i, LAST) for i in range(context_len)]
        elif mode == "full":
            monos = []
            for d in range(degree + 1):
                monos += list(itertools.combinations(positions, d))
        else:
            raise ParameterError(f"unknown feature mode {mode!r}")
        if len(monos) > cap:
            raise ParameterError(f"{len(monos)} monomials exceed the cap {cap}")
        self.monomials: tuple[tuple[int, ...], ...] = tuple(monos)
        self._anchored = mode == "anchored"
        if not self._anchored:
            width = max((len(m) for m in monos), default=0)
            idx = np.full((len(monos), max(width, 1)), context_len, dtype=np.int64)
            for r, m in enumerate(monos):
                for c, p in enumerate(m):
                    idx[r, c] = context_len if p == LAST else p
            # column context_len holds last; column context_len + 1 is the constant 1
            for r, m in enumerate(monos):
                for c in range(len(m), idx.shape[1]):
                    idx[r, c] = context_len + 1
            self._idx = idx

    @property
    def size(self) -> int:
        return len(self.monomials)

    def digest(self) -> str:
        text = json.dumps([self.context_len, self.degree, self.mode, self.monomials, self.window])
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def index(self, root_len: int, c: int) -> np.ndarray:
        """Gather positions of the context for predicting step ``c``.

        Positions point into ``[root..., last of steps 1.., 0]``; -1 is
        the trailing pad, so absent positions contribute no features.
        """
        key = (root_len, c)
        hit = self._index_cache.get(key)
        if hit is not None:
            return hit
        out = np.full(self.context_len, -1, dtype=np.int64)
        if self.window is None:
            pos = np.arange(root_len + c - 1)
        else:
            block, starts = self.window
            k = max(i for i, s in enumerate(starts) if s < c) if c > 0 else 0
            root_part = np.arange(k * block, min((k + 1) * block, root_len))
            steps_part = root_len + np.arange(starts[k] + 1, c) - 1
            pos = np.concatenate([root_part, steps_part])
        pos = pos[:self.context_len]
        out[:len(pos)] = pos
        self._index_cache[key] = out
        return out

    @staticmethod
    def full_symbols(steps: Sequence[Step]) -> np.ndarray:
        return np.array(list(steps[0].payload) + [s.last for s in steps[1:]] + [0], dtype=np.int8)

    def symbols(self, steps: Sequence[Step]) -> np.ndarray:
        full = self.full_symbols(steps)
        return full[self.index(len(steps[0].payload), len(steps))].astype(float)

    def __call__(self, steps: Sequence[Step]) -> np.ndarray:
        ctx = self.symbols(steps)
        last = float(steps[-1].last) if len(steps) > 1 else 1.0
        return self.from_symbols(ctx, last)

    def from_symbols(self, ctx: np.ndarray, last: float) -> np.ndarray:
        if self._anchored:
            out = np.empty(self.context_len + 2)
            out[0] = 1.0
            out[1] = last
            np.multiply(ctx, last, out=out[2:])
            return out
        ext = np.concatenate([ctx, [last, 1.0]])
        return ext[self._idx].prod(axis=1)

    def prefix_rows(self, full: np.ndarray, root_len: int, d: int) -> np.ndarray:
        """Row c-1 is phi(steps[:c]) for c = 1..d, from cached full symbols."""
        idx = np.stack([self.index(root_len, c) for c in range(1, d + 1)])
        full = np.asarray(full, dtype=float)
        ctx = full[idx]
        last = np.ones(d)
        if d > 1:
            last[1:] = full[root_len:root_len + d - 1]
        if self._anchored:
            return np.concatenate([np.ones((d, 1)), last[:, None], ctx * last[:, None]], axis=1)
        return np.stack([self.from_symbols(ctx[i], last[i]) for i in range(d)])


@dataclass(frozen=True)
class TrainingExample:
    context: tuple[Step, ...]
    response: TreeEvent


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _event_step(event: TreeEvent) -> Step:
    if isinstance(event, Done):
        return Step(event.payload, StepKind.SOLUTION)
    return Step(event.payload)


class StepGenerator:
    """Distribution over candidate next steps.

    ``candidates(steps)`` supplies the family's fixed-size list of possible
    steps; the generator scores slot c at depth d with ``W[d, c] . phi``.
    """

    def __init__(self, features: FeatureMap, n_slots: int, max_depth: int,
                 temperature: float = 1.0, candidates=None):
        if temperature <= 0:
            raise ParameterError("temperature must be positive")
        self.features = features
        self.n_slots = n_slots
        self.max_depth = max_depth
        self.temperature = temperature
        self.candidates = candidates
        self.W = np.zeros((max_depth + 1, n_slots, features.size))

    def _mask(self, cands: Sequence[Step], create: bool, done: bool) -> np.ndarray:
        m = np.array([(done if c.kind is StepKind.SOLUTION else create) for c in cands])
        if not m.any():
            raise ParameterError("no candidate slot is legal")
        return m

    def distribution(self, steps: Sequence[Step], *, create: bool = True, done: bool = True,
                     phi: np.ndarray | None = None) -> np.ndarray:
        d = min(len(steps), self.max_depth)
        phi = self.features(steps) if phi is None else phi
        z = self.W[d] @ phi / self.temperature
        cands = self.candidates(steps)
        mask = self._mask(cands, create, done)
        z = np.where(mask, z, -np.inf)
        return _softmax(z)

    def sample(self, steps: Sequence[Step], rng: np.random.Generator, *,
               create: bool = True, done: bool = True) -> Step:
        p = self.distribution(steps, create=create, done=done)
        c = int(rng.choice(self.n_slots, p=p))
        return self.candidates(steps)[c]

    def slot_of(self, steps: Sequence[Step], step: Step) -> int:
        cands = self.candidates(steps)
        for i, c in enumerate(cands):
            if c == step:
                return i
        raise ParameterError(f"step {step} is not a candidate here")

    def encode(self, examples: Sequence[TrainingExample]):
        """(depth, slot, phi, mask) arrays for fast repeated SGD."""
        depths, slots, phis = [], [], []
        for ex in examples:
            if isinstance(ex.response, BacktrackTo):
                raise ParameterError("generator examples must create a node or a done leaf")
            depths.append(min(len(ex.context), self.max_depth))
            slots.append(self.slot_of(ex.context, _event_step(ex.response)))
            phis.append(self.features(ex.context))
        return (np.array(depths, dtype=np.int64), np.array(slots, dtype=np.int64),
                np.array(phis).reshape(len(phis), self.features.size))

    def sgd_step(self, d: int, slot: int, phi: np.ndarray, lr: float) -> float:
        Wd = self.W[d]
        z = Wd @ phi / self.temperature
        p = _softmax(z)
        loss = -np.log(max(p[slot], 1e-300))
        p[slot] -= 1.0
        # normalized step: lr is the change in score per update, whatever |phi|
        Wd -= (lr / (self.temperature * (phi @ phi))) * np.outer(p, phi)
        return float(loss)

    def copy(self) -> "StepGenerator":
        other = StepGenerator(self.features, self.n_slots, self.max_depth, self.temperature,
                              self.candidates)
        other.W = self.W.copy()
        return other


class BacktrackClassifier:
    """Distribution over proper ancestors of a failed node.

    Ancestor j of the failed node d is scored as
    ``b[d - j] + V[c, slot(c)] . phi(steps[:c]) + u . psi(j)`` with c = j + 1:
    a bias per relative offset, a slot-conditioned score of the child of j
    (a child that looks wrong in its context pulls the search back to its
    parent) and psi = [j is root, j starts the current component, j starts
    some component].
    """

    N_PSI = 3

    def __init__(self, features: FeatureMap, max_depth: int, starts=None, *,
                 n_slots: int = 1, candidates=None):
        self.features = features
        self.max_depth = max_depth
        self.starts = starts
        self.n_slots = n_slots
        self.candidates = candidates
        self.V = np.zeros((max_depth + 1, n_slots, features.size))
        self.b = np.zeros(max_depth + 1)
        self.u = np.zeros(self.N_PSI)

    def _psi(self, d: int, starts: Sequence[int]) -> np.ndarray:
        psi = np.zeros((d, self.N_PSI))
        psi[0, 0] = 1.0
        below = [s for s in starts if s < d]
        if below:
            psi[max(below), 1] = 1.0
        for s in starts:
            if s < d:
                psi[s, 2] = 1.0
        return psi

    def _starts(self, steps) -> Sequence[int]:
        if self.starts is None:
            return (0,)
        return self.starts(steps) if callable(self.starts) else self.starts

    def _slot(self, context, step) -> int:
        if self.candidates is None:
            return 0
        cands = self.candidates(context)
        for i, c in enumerate(cands):
            if c == step:
                return i
        # a rejected Done kept as an intermediate node
        for i, c in enumerate(cands):
            if c.payload == step.payload:
                return i
        return 0

    def encode(self, steps: Sequence[Step]):
        """Compact cache for one chain: (symbols, root_len, d, child slots)."""
        steps = tuple(steps)
        d = len(steps) - 1
        slots = np.array([self._slot(steps[:c], steps[c]) for c in range(1, d + 1)], dtype=np.int64)
        return (self.features.full_symbols(steps), len(steps[0].payload), d, slots)

    def _parts(self, steps, code):
        code = self.encode(steps) if code is None else code
        full, r, d, slots = code
        if d < 1:
            raise ParameterError("a chain of length 1 has no ancestor to return to")
        rows = self.features.prefix_rows(full, r, d)
        depth = np.minimum(np.arange(1, d + 1), self.max_depth)
        offsets = np.minimum(d - np.arange(d), self.max_depth)
        return d, rows, depth, slots, offsets

    def _raw(self, rows, depth, slots, offsets, psi):
        return np.einsum("jf,jf->j", self.V[depth, slots], rows) + self.b[offsets] + psi @ self.u

    def scores(self, steps: Sequence[Step], code=None) -> np.ndarray:
        d, rows, depth, slots, offsets = self._parts(steps, code)
        return self._raw(rows, depth, slots, offsets, self._psi(d, self._starts(steps)))

    def distribution(self, steps: Sequence[Step]) -> np.ndarray:
        """Probabilities over path indices 0..len(steps)-2."""
        return _softmax(self.scores(steps))

    def predict(self, steps: Sequence[Step]) -> int:
        """Most likely ancestor index; ties go to the deepest candidate,
        which trades overshoot for undershoot."""
        s = self.scores(steps)
        best = np.flatnonzero(s >= s.max() - 1e-12)
        return int(best[-1])

    def sgd_step(self, steps: Sequence[Step], target: int, lr: float, code=None) -> float:
        d, rows, depth, slots, offsets = self._parts(steps, code)
        if not 0 <= target < d:
            raise ParameterError("backtrack target must be a proper ancestor")
        psi = self._psi(d, self._starts(steps))
        p = _softmax(self._raw(rows, depth, slots, offsets, psi))
        loss = -np.log(max(p[target], 1e-300))
        p[target] -= 1.0
        # normalized like the generator: lr bounds the score change per row
        scale = lr / (self.features.size + 1.0)
        np.subtract.at(self.V, (depth, slots), scale * p[:, None] * rows)
        np.subtract.at(self.b, offsets, scale * p)
        self.u -= scale * (p @ psi)
        return float(loss)

    def copy(self) -> "BacktrackClassifier":
        other = BacktrackClassifier(self.features, self.max_depth, self.starts,
                                    n_slots=self.n_slots, candidates=self.candidates)
        other.V = self.V.copy()
        other.b = self.b.copy()
        other.u = self.u.copy()
        return other


def predict_backtrack(classifier: BacktrackClassifier, failed_chain) -> int:
    steps = getattr(failed_chain, "steps", failed_chain)
    if len(steps) < 2:
        raise ParameterError("failed chain must have length >= 2")
    return classifier.predict(steps)


def _target_index(ex: TrainingExample, labels=None) -> int:
    # backtrack examples store the target as a path index
    return ex.response.target


def sgd_train(model, examples: Sequence[TrainingExample], steps: int, learning_rate: float = 0.1,
              seed: int = 0, *, losses: list | None = None, encoded=None):
    """``steps`` single-example SGD updates on log-loss, examples drawn
    uniformly with replacement by a seeded generator. Returns the model
    (updated in place)."""
    if learning_rate <= 0:
        raise ParameterError("learning rate must be positive")
    if not examples and encoded is None:
        return model
    rng = np.random.default_rng(seed)
    if isinstance(model, StepGenerator):
        depths, slots, phis = model.encode(examples) if encoded is None else encoded
        order = rng.integers(0, len(depths), size=steps)
        for i in order:
            loss = model.sgd_step(depths[i], slots[i], phis[i], learning_rate)
            if not np.isfinite(loss) or not np.isfinite(model.W[depths[i]]).all():
                raise DivergenceError(f"non-finite loss after update on example {i}")
            if losses is not None:
                losses.append(loss)
        return model
    if isinstance(model, BacktrackClassifier):
        codes = [model.encode(ex.context) for ex in examples] if encoded is None else encoded
        order = rng.integers(0, len(examples), size=steps)
        for i in order:
            ex = examples[i]
            loss = model.sgd_step(ex.context, _target_index(ex), learning_rate, codes[i])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss after update on example {i}")
            if losses is not None:
                losses.append(loss)
        return model
    raise ParameterError(f"cannot train {type(model).__name__}")


@dataclass(frozen=True)
class GammaEstimate:
    per_context: np.ndarray
    target: float

    @property
    def fraction_above(self) -> float:
        return float(np.mean(self.per_context >= self.target))


def estimate_gamma(model: StepGenerator, contexts: Sequence[Sequence[Step]], oracle,
                   samples_per_context: int = 100, *, target: float = 0.5,
                   rng: np.random.Generator | None = None, exact: bool = False) -> GammaEstimate:
    """Empirical Pr[generated step is correct] per context.

    ``oracle(context, step) -> bool``. With ``exact`` the model's own
    probabilities are summed instead of sampling.
    """
    if samples_per_context < 100 and not exact:
        raise ParameterError("use at least 100 samples per context")
    rng = np.random.default_rng(0) if rng is None else rng
    est = []
    for ctx in contexts:
        p = model.distribution(ctx)
        cands = model.candidates(ctx)
        good = np.array([bool(oracle(ctx, c)) for c in cands])
        if exact:
            est.append(float(p[good].sum()))
        else:
            draws = rng.choice(len(p), size=samples_per_context, p=p)
            est.append(float(good[draws].mean()))
    return GammaEstimate(np.array(est), target)


# ---------------------------------------------------------------- checkpoints


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()[:16]


def save_checkpoint(path, generator: StepGenerator, classifier: BacktrackClassifier,
                    config: dict | None = None) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "features": generator.features.digest(),
        "context_len": generator.features.context_len,
        "degree": generator.features.degree,
        "mode": generator.features.mode,
        "n_slots": generator.n_slots,
        "max_depth": generator.max_depth,
        "temperature": generator.temperature,
        "config_hash": config_hash(config or {}),
    }
    with open(path, "wb") as fh:
        np.savez(fh, W=generator.W, V=classifier.V, b=classifier.b, u=classifier.u,
                 meta=np.array(json.dumps(meta, sort_keys=True)))


def load_checkpoint(path, generator: StepGenerator, classifier: BacktrackClassifier,
                    config: dict | None = None) -> None:
    """Load weights into freshly built models; refuse on any mismatch."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise CheckpointMismatchError(f"checkpoint version {meta.get('version')}")
        if meta["features"] != generator.features.digest():
            raise CheckpointMismatchError("feature index differs from the checkpoint")
        if config is not None and meta["config_hash"] != config_hash(config):
            raise CheckpointMismatchError("config hash differs from the checkpoint")
        if data["W"].shape != generator.W.shape or data["V"].shape != classifier.V.shape:
            raise CheckpointMismatchError("weight shapes differ from the checkpoint")
        generator.W = data["W"].copy()
        classifier.V = data["V"].copy()
        classifier.b = data["b"].copy()
        classifier.u = data["u"].copy()
