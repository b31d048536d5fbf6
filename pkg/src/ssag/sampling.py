"""Seeded index generation: uniform sampling and two-stage stratified draws.

Every stream wraps a PCG64 generator, so identical seeds give bit-identical
draw sequences on every platform.  Exhaustive draws (requesting a whole class
or the whole population) return ascending indices without consuming generator
state; this makes paired-trajectory oracles possible by seed sharing alone.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset
from .errors import SamplingError


class RngStream:
    """Single-owner random stream with a logical draw counter.

    ``draws`` counts sampling calls that consumed generator state, not raw
    generator words (bounded-integer rejection may consume a variable number
    of words internally; the sequence is still seed-deterministic).
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0

    @classmethod
    def for_run(cls, master_seed: int, run_id: int) -> "RngStream":
        """Derive an independent stream for run `run_id` of an experiment.

        Splitting rule: the child seed is the first 64-bit word of
        SeedSequence(master_seed, spawn_key=(run_id,)).
        """
        ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_id),))
        return cls(int(ss.generate_state(1, np.uint64)[0]))

    def __repr__(self):
        return f"RngStream(algorithm={self.algorithm!r}, seed={self.seed}, draws={self.draws})"


def sample_class(rng: RngStream, num_classes: int) -> int:
    """Uniform class index from {0..C-1}; consumes one draw."""
    if num_classes < 1:
        raise SamplingError("need at least one class to sample from")
    rng.draws += 1
    return int(rng.generator.integers(num_classes))


def sample_within_class(rng: RngStream, dataset: Dataset, class_j: int, n: int) -> np.ndarray:
    """n indices drawn uniformly without replacement from class j's cell.

    Requesting the whole class (n == N_j) returns the cell in ascending
    order without consuming generator state.
    """
    cell = dataset.partition[class_j]
    if n < 1:
        raise SamplingError("batch size must be >= 1")
    if n > cell.size:
        raise SamplingError(
            f"batch size {n} exceeds class {class_j} size {cell.size}")
    if n == cell.size:
        return cell.copy()
    rng.draws += 1
    if n == 1:
        return cell[[rng.generator.integers(cell.size)]]
    return rng.generator.choice(cell, size=n, replace=False)


def sample_uniform(rng: RngStream, n_population: int, n: int) -> np.ndarray:
    """n indices drawn uniformly without replacement from {0..N-1}.

    Requesting the whole population returns ascending indices without
    consuming generator state.
    """
    if n < 1:
        raise SamplingError("sample size must be >= 1")
    if n > n_population:
        raise SamplingError(f"sample size {n} exceeds population {n_population}")
    if n == n_population:
        return np.arange(n_population)
    rng.draws += 1
    if n == 1:
        return np.array([rng.generator.integers(n_population)])
    return rng.generator.choice(n_population, size=n, replace=False)
