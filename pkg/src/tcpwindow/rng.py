"""Deterministic, index-addressed random streams.

Every stream is keyed by ``(root_seed, stream_index)`` through
:class:`numpy.random.SeedSequence` and drives a counter-based Philox
generator, so a replica block's randomness depends only on its index and
never on the order in which blocks are run.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .laws import MultiplicativeLaw

#: Replicas simulated together from one stream. Part of the reproducibility
#: contract: changing it changes the output bytes.
DEFAULT_BLOCK_SIZE = 8192

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class StreamSeed:
    root_seed: int
    stream_index: int

    def __post_init__(self) -> None:
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def open(self) -> "Stream":
        return Stream(self)


class Stream:
    """Single-owner source of uniform, exponential and jump-factor variates."""

    def __init__(self, seed: StreamSeed):
        self.seed = seed
        ss = np.random.SeedSequence([seed.root_seed & _MASK64, seed.stream_index])
        self.generator = np.random.Generator(np.random.Philox(ss))

    def uniforms(self, size: int | None = None):
        """Uniform variates on [0, 1)."""
        return self.generator.random(size)

    def exponentials(self, size: int | None = None):
        """Unit exponentials by inversion, ``-log U`` with ``U`` on (0, 1]."""
        u = 1.0 - self.generator.random(size)
        return -np.log(u)

    def factors(self, law: MultiplicativeLaw, size: int | None = None):
        return law.sample(self.generator, size)

    def next_exponential(self) -> float:
        return float(self.exponentials())

    def next_factor(self, law: MultiplicativeLaw) -> float:
        return float(self.factors(law))


def stream(root_seed: int, stream_index: int = 0) -> Stream:
    return Stream(StreamSeed(root_seed, stream_index))


def next_exponential(s: Stream) -> float:
    return s.next_exponential()


def next_factor(s: Stream, law: MultiplicativeLaw) -> float:
    return s.next_factor(law)


def block_layout(n_replicas: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[int]:
    """Sizes of the consecutive replica blocks covering ``n_replicas``."""
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    full, rest = divmod(n_replicas, block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_streams(
    root_seed: int,
    n_replicas: int,
    stream_offset: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> Iterator[tuple[StreamSeed, int]]:
    for b, count in enumerate(block_layout(n_replicas, block_size)):
        yield StreamSeed(root_seed, stream_offset + b), count


def _call_block(args):
    fn, seed, count = args
    return fn(Stream(seed), count)


def map_blocks(
    fn: Callable[[Stream, int], np.ndarray],
    n_replicas: int,
    root_seed: int,
    stream_offset: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> np.ndarray:
    """Run ``fn(stream, count)`` on every replica block and stack the results.

    Results are concatenated along axis 0 in block-index order, so the output
    does not depend on ``workers``. With ``workers > 1`` ``fn`` must be
    picklable (a module-level function or a ``functools.partial`` of one).
    """
    jobs: Sequence = [
        (fn, seed, count)
        for seed, count in block_streams(root_seed, n_replicas, stream_offset, block_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call_block, jobs))
    else:
        parts = [_call_block(job) for job in jobs]
    return np.concatenate(parts, axis=0)
