"""State machines for the seven optimizers: FGD, SGD, mini-batch SGD, SAG,
SVRG, SAGA, and SSAG.

SSAG keeps one remembered gradient per class (C table entries); SAG and SAGA
keep one per sample (N entries).  All table-based states maintain a running
sum of their entries, recomputed exactly every ``sum_recompute_every`` steps
to cap floating drift.

Note on stratified sampling: each SSAG step refreshes the drawn class's slot
with the mean gradient of a fresh within-class batch and moves along the mean
of the C slots.  Under class imbalance that direction targets the
class-balanced gradient, not the sample-weighted full gradient; the update is
implemented literally as specified.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .core import estimate_constants, gradient_population_stats, squared_distance
from .errors import ConfigError, DivergenceError, UnsupportedObjectiveError
from .objectives import Objective, accuracy
from .records import RecordBuilder, RunRecord
from .sampling import RngStream, sample_class, sample_uniform, sample_within_class

#: A recorded loss above this value marks the run as diverged.
DIVERGENCE_LOSS_LIMIT = 1e12

OPTIMIZER_KINDS = ("fgd", "sgd", "minibatch", "sag", "svrg", "saga", "ssag")


@dataclass
class SsagState:
    """SSAG state: C-entry gradient table plus its running sum."""

    W: np.ndarray
    table: np.ndarray      # (C, p), zero-initialized
    table_sum: np.ndarray  # (p,)
    h: float
    n: int                 # within-class batch size
    steps: int = 0
    grad_evals: int = 0


@dataclass
class SagState:
    """SAG state: N-entry gradient table plus its running sum."""

    W: np.ndarray
    table: np.ndarray      # (N, p), zero-initialized
    table_sum: np.ndarray
    h: float
    steps: int = 0
    grad_evals: int = 0


@dataclass
class SagaState:
    """SAGA state: N-entry table, running sum, optional L1 prox."""

    W: np.ndarray
    table: np.ndarray
    table_sum: np.ndarray
    h: float
    prox_l1: float | None = None
    steps: int = 0
    grad_evals: int = 0


@dataclass
class SvrgState:
    """SVRG state: current iterate plus snapshot and its full gradient."""

    W: np.ndarray
    snapshot: np.ndarray
    snapshot_grad: np.ndarray
    h: float
    m: int                 # inner-loop length
    steps: int = 0
    grad_evals: int = 0


@dataclass
class SimpleState:
    """Memoryless state shared by FGD, SGD, and mini-batch SGD."""

    W: np.ndarray
    h: float
    n: int = 1
    schedule: str = "constant"  # "constant" or "inv_k"
    steps: int = 0
    grad_evals: int = 0


def _guard_finite(prev_W: np.ndarray, state) -> None:
    if not np.all(np.isfinite(state.W)):
        raise DivergenceError("optimizer produced a non-finite iterate",
                              last_finite=prev_W, steps=state.steps)


def _step_size(state: SimpleState) -> float:
    if state.schedule == "inv_k":
        return state.h / (state.steps + 1)
    return state.h


def recompute_sum(state):
    """Replace the cached running sum with the exact table sum."""
    if not isinstance(state, (SsagState, SagState, SagaState)):
        raise TypeError("only table-based states carry a running sum")
    state.table_sum = state.table.sum(axis=0)
    return state


def ssag_step(state: SsagState, obj: Objective, rng: RngStream) -> SsagState:
    """One SSAG update: refresh one class slot, move along the slot mean.

    Draws class j uniformly, draws n within-class samples without
    replacement, writes their mean gradient into slot j, and steps
    W <- W - (h/C) * sum of all slots.
    """
    ds = obj.dataset
    j = sample_class(rng, ds.n_classes)
    idx = sample_within_class(rng, ds, j, state.n)
    phi = obj.grad_class_batch(state.W, j, idx)
    prev = state.W
    state.table_sum = state.table_sum - state.table[j] + phi
    state.table[j] = phi
    state.W = state.W - (state.h / ds.n_classes) * state.table_sum
    state.steps += 1
    state.grad_evals += idx.size
    _guard_finite(prev, state)
    return state


def sag_step(state: SagState, obj: Objective, rng: RngStream) -> SagState:
    """One SAG update: refresh one sample slot, move along the slot mean."""
    ds = obj.dataset
    i = int(sample_uniform(rng, ds.n_samples, 1)[0])
    g = obj.grad_batch(state.W, np.array([i]))
    prev = state.W
    state.table_sum = state.table_sum - state.table[i] + g
    state.table[i] = g
    state.W = state.W - (state.h / ds.n_samples) * state.table_sum
    state.steps += 1
    state.grad_evals += 1
    _guard_finite(prev, state)
    return state


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    """Coordinate-wise soft-thresholding, the L1 prox map."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def saga_step(state: SagaState, obj: Objective, rng: RngStream) -> SagaState:
    """One SAGA update with optional L1 prox.

    The candidate uses the pre-update slot value and table mean:
    W - h * (G_i(W) - phi_i + sum/N); the slot is refreshed afterwards.
    """
    ds = obj.dataset
    N = ds.n_samples
    i = int(sample_uniform(rng, N, 1)[0])
    g = obj.grad_batch(state.W, np.array([i]))
    prev = state.W
    candidate = state.W - state.h * (g - state.table[i] + state.table_sum / N)
    state.table_sum = state.table_sum - state.table[i] + g
    state.table[i] = g
    if state.prox_l1 is not None:
        state.W = soft_threshold(candidate, state.h * state.prox_l1)
    else:
        state.W = candidate
    state.steps += 1
    state.grad_evals += 1
    _guard_finite(prev, state)
    return state


def svrg_outer(state: SvrgState, obj: Objective, rng: RngStream) -> SvrgState:
    """One SVRG outer iteration: snapshot, full gradient, m inner steps."""
    ds = obj.dataset
    state.snapshot = state.W.copy()
    state.snapshot_grad = obj.grad_full(state.snapshot)
    state.grad_evals += ds.n_samples
    for _ in range(state.m):
        i = int(sample_uniform(rng, ds.n_samples, 1)[0])
        idx = np.array([i])
        gi = obj.grad_batch(state.W, idx)
        gs = obj.grad_batch(state.snapshot, idx)
        prev = state.W
        state.W = state.W - state.h * (gi - gs + state.snapshot_grad)
        state.steps += 1
        state.grad_evals += 2
        _guard_finite(prev, state)
    return state


def fgd_step(state: SimpleState, obj: Objective) -> SimpleState:
    """One full-gradient step W <- W - h_k * grad_full(W)."""
    prev = state.W
    state.W = state.W - _step_size(state) * obj.grad_full(state.W)
    state.steps += 1
    state.grad_evals += obj.dataset.n_samples
    _guard_finite(prev, state)
    return state


def _uniform_batch_step(state: SimpleState, obj: Objective, rng: RngStream, n: int) -> SimpleState:
    idx = sample_uniform(rng, obj.dataset.n_samples, n)
    g = obj.grad_batch(state.W, idx)
    prev = state.W
    state.W = state.W - _step_size(state) * g
    state.steps += 1
    state.grad_evals += idx.size
    _guard_finite(prev, state)
    return state


def sgd_step(state: SimpleState, obj: Objective, rng: RngStream) -> SimpleState:
    """One SGD update along a single uniformly drawn sample gradient."""
    return _uniform_batch_step(state, obj, rng, 1)


def minibatch_step(state: SimpleState, obj: Objective, rng: RngStream) -> SimpleState:
    """One mini-batch update along the mean gradient of n uniform samples.

    n = N reduces to fgd_step and n = 1 to sgd_step, step for step.
    """
    return _uniform_batch_step(state, obj, rng, state.n)


@dataclass(frozen=True)
class RunConfig:
    """Configuration of a single optimizer run.

    ``h = None`` resolves to the per-algorithm theoretical default step size
    (ssag 1/(2CL), fgd 1/L, sag 1/(16L), svrg and saga 1/(3L), sgd and
    minibatch 1/L), computed from certified convexity constants.
    """

    kind: str
    steps: int
    h: float | None = None
    n: int = 1
    m: int | None = None
    prox_l1: float | None = None
    schedule: str = "constant"
    seed: int = 0
    cadence: int = 1
    record_variance: bool = False
    sum_recompute_every: int = 10_000

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if self.steps < 0:
            raise ConfigError("step budget must be >= 0")
        if self.cadence < 1:
            raise ConfigError("metric cadence must be >= 1")
        if self.n < 1:
            raise ConfigError("batch size must be >= 1")
        if self.schedule not in ("constant", "inv_k"):
            raise ConfigError(f"unknown step-size schedule {self.schedule!r}")

    def fingerprint(self) -> str:
        payload = ";".join(f"{k}={getattr(self, k)!r}" for k in sorted(self.__dataclass_fields__))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def default_step_size(kind: str, obj: Objective, constants=None) -> float:
    """Per-algorithm theoretical default step size from certified constants."""
    constants = constants if constants is not None else estimate_constants(obj)
    L = constants.L
    if kind == "ssag":
        return 1.0 / (2.0 * obj.dataset.n_classes * L)
    if kind == "sag":
        return 1.0 / (16.0 * L)
    if kind in ("svrg", "saga"):
        return 1.0 / (3.0 * L)
    # fgd, sgd, minibatch
    return 1.0 / L


def make_state(config: RunConfig, obj: Objective, constants=None):
    """Initial optimizer state for a run (tables zeroed, W from the objective)."""
    if config.h is not None:
        h = float(config.h)
    else:
        try:
            h = default_step_size(config.kind, obj, constants)
        except UnsupportedObjectiveError as exc:
            raise ConfigError(
                f"no automatic step size for objective kind {obj.kind!r}; "
                "set h explicitly") from exc
    p = obj.dim
    W0 = obj.init_params(seed=config.seed)
    ds = obj.dataset
    if config.kind == "ssag":
        return SsagState(W=W0, table=np.zeros((ds.n_classes, p)),
                         table_sum=np.zeros(p), h=h, n=config.n)
    if config.kind == "sag":
        return SagState(W=W0, table=np.zeros((ds.n_samples, p)),
                        table_sum=np.zeros(p), h=h)
    if config.kind == "saga":
        return SagaState(W=W0, table=np.zeros((ds.n_samples, p)),
                         table_sum=np.zeros(p), h=h, prox_l1=config.prox_l1)
    if config.kind == "svrg":
        m = config.m if config.m is not None else 2 * ds.n_samples
        return SvrgState(W=W0, snapshot=W0.copy(), snapshot_grad=np.zeros(p), h=h, m=m)
    return SimpleState(W=W0, h=h, n=config.n, schedule=config.schedule)


def steps_for_passes(kind: str, passes: float, n_samples: int, n: int = 1,
                     m: int | None = None) -> int:
    """Step count whose gradient evaluations amount to the given data passes."""
    evals = passes * n_samples
    if kind == "fgd":
        per_step = n_samples
    elif kind in ("sgd", "sag", "saga"):
        per_step = 1
    elif kind in ("minibatch", "ssag"):
        per_step = n
    elif kind == "svrg":
        m_eff = m if m is not None else 2 * n_samples
        per_step = (n_samples + 2.0 * m_eff) / m_eff
    else:
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    return max(int(round(evals / per_step)), 0)


def _advance(state, obj: Objective, rng: RngStream, kind: str):
    if kind == "ssag":
        return ssag_step(state, obj, rng)
    if kind == "sag":
        return sag_step(state, obj, rng)
    if kind == "saga":
        return saga_step(state, obj, rng)
    if kind == "svrg":
        return svrg_outer(state, obj, rng)
    if kind == "fgd":
        return fgd_step(state, obj)
    if kind == "sgd":
        return sgd_step(state, obj, rng)
    return minibatch_step(state, obj, rng)


def run(config: RunConfig, obj: Objective, *, constants=None,
        w_star: np.ndarray | None = None, test_dataset=None,
        config_hash: str | None = None) -> RunRecord:
    """Execute one seeded run and record metrics at the configured cadence.

    Records a row at step 0, whenever the step counter crosses a cadence
    multiple, and at the final step.  Loss above DIVERGENCE_LOSS_LIMIT or a
    non-finite iterate truncates the record and flags it diverged.  The
    trajectory is fully deterministic given the seed.
    """
    rng = RngStream(config.seed)
    state = make_state(config, obj, constants)
    builder = RecordBuilder(seed=config.seed,
                            config_hash=config_hash if config_hash is not None
                            else config.fingerprint())
    t0 = time.perf_counter()

    def snapshot() -> bool:
        loss = obj.loss_full(state.W)
        dist = squared_distance(state.W, w_star) if w_star is not None else float("nan")
        acc = accuracy(obj, state.W, test_dataset) if test_dataset is not None else float("nan")
        sigma_sq = (gradient_population_stats(obj, state.W).population_variance
                    if config.record_variance else float("nan"))
        builder.append(state.steps, state.grad_evals / obj.dataset.n_samples, loss,
                       acc, dist, state.grad_evals,
                       (time.perf_counter() - t0) * 1e3, sigma_sq)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS_LIMIT:
            builder.diverged = True
            return False
        return True

    alive = snapshot()
    next_record = config.cadence
    while alive and state.steps < config.steps:
        try:
            _advance(state, obj, rng, config.kind)
        except DivergenceError as exc:
            state.W = exc.last_finite
            builder.diverged = True
            break
        if (isinstance(state, (SsagState, SagState, SagaState))
                and state.steps % config.sum_recompute_every == 0):
            recompute_sum(state)
        if state.steps >= next_record or state.steps >= config.steps:
            alive = snapshot()
            next_record = (state.steps // config.cadence + 1) * config.cadence
    return builder.build()
