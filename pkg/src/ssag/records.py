"""Trajectory records produced by optimizer runs and their aggregates."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__

#: Column order of emitted per-run CSV files.  The in-memory record also
#: carries a sigma_sq column (population gradient variance) that is not part
#: of the CSV schema.
CSV_COLUMNS = ("k", "passes", "loss", "test_acc", "dist_sq", "grad_evals", "wall_ms")


@dataclass(eq=False)
class RunRecord:
    """Per-iteration trajectory of one optimizer run.

    All metric arrays are aligned with ``k`` (the recorded step indices,
    strictly increasing, starting at 0).  Metrics that were not recorded are
    NaN.  ``passes`` is grad_evals / N exactly.
    """

    k: np.ndarray
    passes: np.ndarray
    loss: np.ndarray
    test_acc: np.ndarray
    dist_sq: np.ndarray
    grad_evals: np.ndarray
    wall_ms: np.ndarray
    sigma_sq: np.ndarray
    seed: int
    config_hash: str
    version: str = __version__
    diverged: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.k) <= 0):
            raise ValueError("recorded step indices must be strictly increasing")

    def __len__(self) -> int:
        return self.k.size

    def column(self, name: str) -> np.ndarray:
        if name not in CSV_COLUMNS and name != "sigma_sq":
            raise KeyError(name)
        return getattr(self, name)

    def content_hash(self) -> str:
        """Hash of everything deterministic: all columns except wall time."""
        h = hashlib.sha256()
        h.update(f"seed={self.seed};config={self.config_hash};diverged={self.diverged}".encode())
        for name in ("k", "passes", "loss", "test_acc", "dist_sq", "grad_evals", "sigma_sq"):
            col = getattr(self, name)
            h.update(name.encode())
            h.update(np.ascontiguousarray(col, dtype=np.float64).tobytes())
        return h.hexdigest()


class RecordBuilder:
    """Accumulates trajectory rows and freezes them into a RunRecord."""

    def __init__(self, seed: int, config_hash: str):
        self.seed = seed
        self.config_hash = config_hash
        self.rows: list[tuple] = []
        self.diverged = False

    def append(self, k: int, passes: float, loss: float, test_acc: float,
               dist_sq: float, grad_evals: int, wall_ms: float, sigma_sq: float):
        self.rows.append((k, passes, loss, test_acc, dist_sq, grad_evals, wall_ms, sigma_sq))

    @property
    def last_k(self) -> int:
        return self.rows[-1][0] if self.rows else -1

    def build(self) -> RunRecord:
        cols = list(zip(*self.rows)) if self.rows else [[] for _ in range(8)]
        return RunRecord(
            k=np.array(cols[0], dtype=np.int64),
            passes=np.array(cols[1], dtype=np.float64),
            loss=np.array(cols[2], dtype=np.float64),
            test_acc=np.array(cols[3], dtype=np.float64),
            dist_sq=np.array(cols[4], dtype=np.float64),
            grad_evals=np.array(cols[5], dtype=np.int64),
            wall_ms=np.array(cols[6], dtype=np.float64),
            sigma_sq=np.array(cols[7], dtype=np.float64),
            seed=self.seed,
            config_hash=self.config_hash,
            diverged=self.diverged,
        )


def _nan_mean_std(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean/std ignoring NaN; all-NaN columns stay NaN (no warning)."""
    mean = np.full(stack.shape[1], np.nan)
    std = np.full(stack.shape[1], np.nan)
    counts = np.sum(~np.isnan(stack), axis=0)
    ok = counts > 0
    if np.any(ok):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean[ok] = np.nanmean(stack[:, ok], axis=0)
            std[ok] = np.nanstd(stack[:, ok], axis=0, ddof=1) if stack.shape[0] > 1 else 0.0
    return mean, std


@dataclass(eq=False)
class Aggregate:
    """Seed-mean and seed-stddev of every metric, aligned on the k grid."""

    k: np.ndarray
    passes: np.ndarray
    n_seeds: int
    n_diverged: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)


def aggregate(records: list[RunRecord]) -> Aggregate:
    """Combine per-seed records; diverged runs are dropped with a warning."""
    survivors = [r for r in records if not r.diverged]
    n_diverged = len(records) - len(survivors)
    if n_diverged:
        warnings.warn(f"{n_diverged} of {len(records)} runs diverged; "
                      "aggregating over the survivors", RuntimeWarning)
    if not survivors:
        raise ValueError("no surviving runs to aggregate")
    base = survivors[0].k
    for r in survivors[1:]:
        if not np.array_equal(r.k, base):
            raise ValueError("records have mismatched step grids and cannot be aggregated")
    agg = Aggregate(k=base.copy(), passes=survivors[0].passes.copy(),
                    n_seeds=len(survivors), n_diverged=n_diverged)
    for name in ("loss", "test_acc", "dist_sq", "sigma_sq", "wall_ms"):
        stack = np.vstack([getattr(r, name) for r in survivors])
        agg.mean[name], agg.std[name] = _nan_mean_std(stack)
    return agg
