"""Order-deterministic trial dispatch.

Each trial gets its own RNG stream from ``(seed, index)`` so results do not
depend on how trials are spread over workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _run_chunk(fn, args):
    return [fn(a) for a in args]


def map_trials(fn: Callable[..., T], args: Sequence, workers: int = 1) -> list[T]:
    """``[fn(a) for a in args]``, optionally in a process pool.

    ``fn`` must be picklable (a module-level function or a partial of one).
    """
    args = list(args)
    if workers <= 1 or len(args) < 2:
        return [fn(a) for a in args]
    chunks = [args[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [fn] * workers, chunks))
    out: list = [None] * len(args)
    for w, part in enumerate(parts):
        out[w::workers] = part
    return out
