"""Closed-form evaluators for the convergence analysis.

Covers the convergence-variance inequality (the optimality-gap envelope
lam + rho^k (gap - lam) with its variance-induced floor lam), the stratified
method's squared-distance envelope and iteration-complexity bound, the rate
constants of the compared methods, and the finite-population variance
identity, plus helpers that measure the required inputs on a concrete
problem and check recorded trajectories against an envelope.

The gap envelope treats the floor term as iteration-indexed (constant under a
constant step size), not as a constant raised to the k-th power; the floor of
constant-step SGD does not decay, which is exactly what the inequality is
meant to express.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ConvexityConstants, estimate_constants,
                   gradient_population_stats, squared_distance)
from .errors import OutOfRegimeError, SsagError, UndefinedBoundError, UnsupportedObjectiveError
from .objectives import Objective, closed_form_optimum


@dataclass(frozen=True)
class CviInputs:
    """Inputs of the convergence-variance inequality.

    Requires 0 < h < 2/L, 0 < f <= 1, n >= 1, sigma_sq >= 0.
    """

    h: float
    L: float
    mu: float
    f: float
    n: int
    sigma_sq: float

    def __post_init__(self):
        if not (self.L > 0 and 0 <= self.mu <= self.L * (1 + 1e-12)):
            raise ValueError("need 0 <= mu <= L with L > 0")
        if not (0.0 < self.h < 2.0 / self.L):
            raise OutOfRegimeError(f"step size {self.h} outside (0, 2/L) = (0, {2.0 / self.L})")
        if not (0.0 < self.f <= 1.0):
            raise ValueError("sampling ratio f must lie in (0, 1]")
        if self.n < 1:
            raise ValueError("sample size n must be >= 1")
        if self.sigma_sq < 0.0:
            raise ValueError("gradient variance must be >= 0")


def cvi_lambda(inp: CviInputs) -> float:
    """Variance floor lam = h L (1-f) sigma^2 / (2 mu (2 - h mu) n).

    Zero when f = 1 (census sampling) or the variance vanishes.  Undefined
    when mu = 0 or h mu = 2.
    """
    if inp.mu == 0.0:
        raise UndefinedBoundError("variance floor undefined for mu = 0")
    if inp.h * inp.mu == 2.0:
        raise UndefinedBoundError("variance floor undefined for h*mu = 2")
    return (inp.h * inp.L * (1.0 - inp.f) * inp.sigma_sq
            / (2.0 * inp.mu * (2.0 - inp.h * inp.mu) * inp.n))


def cvi_rho(h: float, L: float, mu: float) -> float:
    """Per-step gap contraction rho = h^2 mu L - 2 h mu + 1, < 1 on (0, 2/L)."""
    if not (L > 0 and 0 < mu <= L * (1 + 1e-12)):
        raise ValueError("need 0 < mu <= L")
    if not (0.0 < h < 2.0 / L):
        raise OutOfRegimeError(f"step size {h} outside (0, 2/L) = (0, {2.0 / L})")
    return h * h * mu * L - 2.0 * h * mu + 1.0


def cvi_envelope(k: int, lam: float, rho: float, initial_gap: float) -> float:
    """Gap envelope lam + rho^k (initial_gap - lam) after k steps."""
    if not (0.0 <= rho < 1.0):
        raise OutOfRegimeError(f"rho = {rho} outside [0, 1)")
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    return lam + rho ** k * (initial_gap - lam)


@dataclass(frozen=True, eq=False)
class Theorem2Inputs:
    """Inputs of the stratified method's squared-distance envelope.

    ``f`` and ``n`` may be scalars (the single shared sampling ratio and
    batch size, as the bound is written) or length-C arrays f_c = n/N_c,
    n_c for the per-stratum variant; broadcasting handles both.

    The envelope decays geometrically to zero, while the stratified iterate
    retains a resampling noise floor proportional to the within-class
    gradient variance at the optimum; empirical checks can therefore only
    hold over horizons where that variance is small relative to the
    envelope (near-redundant classes), which balanced low-spread data
    provides.
    """

    mu: float
    L: float
    C: int
    f: float | np.ndarray
    n: int | np.ndarray
    sigma_c_sq: np.ndarray
    dist0_sq: float

    def __post_init__(self):
        if not (self.L > 0 and 0 < self.mu <= self.L * (1 + 1e-12)):
            raise ValueError("need 0 < mu <= L")
        if self.C < 1:
            raise ValueError("class count must be >= 1")
        sig = np.asarray(self.sigma_c_sq, dtype=np.float64)
        if sig.ndim != 1 or sig.size != self.C:
            raise ValueError("need one per-class variance per class")
        if np.any(sig < 0.0) or self.dist0_sq < 0.0:
            raise ValueError("variances and distances must be >= 0")
        f = np.asarray(self.f, dtype=np.float64)
        if np.any(f <= 0.0) or np.any(f > 1.0):
            raise ValueError("sampling ratios must lie in (0, 1]")
        if np.any(np.asarray(self.n) < 1):
            raise ValueError("batch sizes must be >= 1")
        object.__setattr__(self, "sigma_c_sq", sig)

    @property
    def rate(self) -> float:
        """Geometric rate factor 1 - mu/(8CL), in (0, 1)."""
        return 1.0 - self.mu / (8.0 * self.C * self.L)

    @property
    def variance_term(self) -> float:
        """(9/4) sum_c ((1 - f_c)/n_c) sigma_c^2 at the optimum."""
        return float(2.25 * np.sum((1.0 - np.asarray(self.f, dtype=np.float64))
                                   / np.asarray(self.n, dtype=np.float64)
                                   * self.sigma_c_sq))

    @property
    def bracket(self) -> float:
        """Variance term plus 3 * initial squared distance."""
        return self.variance_term + 3.0 * self.dist0_sq


def theorem2_bound(k: int, inp: Theorem2Inputs) -> float:
    """Squared-distance envelope rate^k * bracket after k steps."""
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    return inp.rate ** k * inp.bracket


def ssag_rate(mu: float, L: float, C: int) -> float:
    """Rate factor 1 - mu/(8CL) of the stratified average-gradient method."""
    return 1.0 - mu / (8.0 * C * L)


def sag_rate(mu: float, L: float, N: int) -> float:
    """Rate factor 1 - mu/(8NL) of the per-sample average-gradient method."""
    return 1.0 - mu / (8.0 * N * L)


def saga_rate(mu: float, L: float, N: int) -> float:
    """Rate factor 1 - mu/(2(mu N + L)) of the prox-capable variant."""
    return 1.0 - mu / (2.0 * (mu * N + L))


@dataclass(frozen=True)
class ComplexityEstimate:
    """Iteration counts to reach a target accuracy epsilon.

    ``iterations`` uses the full envelope bracket (variance term plus the
    3*distance term) for internal consistency; ``literal_iterations`` is the
    published variance-only form, None when the variance term is zero and
    its logarithm is undefined.
    """

    iterations: int
    literal_iterations: int | None
    already_converged: bool = False


def ssag_complexity(epsilon: float, inp: Theorem2Inputs) -> ComplexityEstimate:
    """Iterations k with rate^k * bracket <= epsilon, ceiling-rounded."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    log_rate = math.log(inp.rate)

    def count(bracket: float) -> int:
        if epsilon >= bracket:
            return 0
        return math.ceil(math.log(epsilon / bracket) / log_rate)

    var_term = inp.variance_term
    full = inp.bracket
    if full == 0.0:
        return ComplexityEstimate(iterations=0, literal_iterations=None,
                                  already_converged=True)
    return ComplexityEstimate(
        iterations=count(full),
        literal_iterations=count(var_term) if var_term > 0.0 else None,
        already_converged=(epsilon >= full),
    )


def finite_population_variance(sigma_sq: float, f: float, n: int) -> float:
    """Variance (1-f)/n * sigma^2 of a without-replacement sample mean."""
    if not (0.0 < f <= 1.0):
        raise ValueError("sampling ratio f must lie in (0, 1]")
    if n < 1:
        raise ValueError("sample size must be >= 1")
    if sigma_sq < 0.0:
        raise ValueError("population variance must be >= 0")
    return (1.0 - f) / n * sigma_sq


@dataclass(frozen=True, eq=False)
class EnvelopeReport:
    """Per-iteration outcome of checking a seed-mean metric against a bound."""

    k: np.ndarray
    values: np.ndarray
    bounds: np.ndarray
    passed: np.ndarray
    slack: float
    n_seeds: int

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passed)) if self.passed.size else 1.0

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    def summary(self) -> str:
        return (f"{int(np.sum(self.passed))}/{self.passed.size} recorded iterations "
                f"within bound * (1 + {self.slack}) over {self.n_seeds} seeds "
                f"(pass fraction {self.pass_fraction:.4f})")


def check_envelope(k: np.ndarray, mean_values: np.ndarray, bounds: np.ndarray, *,
                   n_seeds: int, slack: float = 0.05, min_seeds: int = 20) -> EnvelopeReport:
    """Check a seed-averaged metric against per-iteration bound values.

    A point passes when value <= bound * (1 + slack); the slack absorbs
    Monte-Carlo error in the seed mean, which is why at least ``min_seeds``
    seeds are required.
    """
    k = np.asarray(k)
    mean_values = np.asarray(mean_values, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    if not (k.shape == mean_values.shape == bounds.shape):
        raise ValueError("k, values, and bounds must have matching shapes")
    if n_seeds < min_seeds:
        raise SsagError(f"need seed-averaged metrics over >= {min_seeds} seeds, got {n_seeds}")
    if np.any(np.isnan(mean_values)):
        raise SsagError("record lacks the required metric (NaN entries present)")
    passed = mean_values <= bounds * (1.0 + slack)
    return EnvelopeReport(k=k, values=mean_values, bounds=bounds, passed=passed,
                          slack=slack, n_seeds=n_seeds)


def reference_optimum(obj: Objective, *, constants: ConvexityConstants | None = None,
                      grad_tol: float = 1e-10, max_iter: int = 500_000) -> np.ndarray:
    """High-precision minimizer used as the distance oracle W*.

    Closed form for ridge and the quadratic objective; full-gradient descent
    polished to gradient norm <= grad_tol for logistic regression.
    """
    if obj.kind == "ridge":
        return closed_form_optimum(obj)
    if obj.kind == "quadratic":
        return obj.dataset.features.mean(axis=0) / (1.0 + obj.lam)
    if obj.kind != "logistic":
        raise UnsupportedObjectiveError(
            f"no reference optimum for objective kind {obj.kind!r}")
    constants = constants if constants is not None else estimate_constants(obj)
    if not constants.strongly_convex:
        raise SsagError("cannot polish an optimum without strong convexity (mu = 0)")
    h = 1.0 / constants.L
    W = np.zeros(obj.dim)
    for _ in range(max_iter):
        g = obj.grad_full(W)
        if float(np.linalg.norm(g)) <= grad_tol:
            return W
        W = W - h * g
    raise SsagError(f"optimum polish did not reach gradient norm {grad_tol} "
                    f"within {max_iter} iterations")


def theorem2_inputs_for(obj: Objective, n: int, w0: np.ndarray, *,
                        constants: ConvexityConstants | None = None,
                        w_star: np.ndarray | None = None,
                        per_class: bool = False) -> Theorem2Inputs:
    """Measure the envelope inputs on a concrete problem.

    Per-class gradient variances are taken at the reference optimum.  The
    shared sampling ratio defaults to f = nC/N (n over the mean class size,
    which equals n/N_c exactly for balanced classes); ``per_class=True``
    switches to exact per-stratum ratios f_c = n/N_c.
    """
    ds = obj.dataset
    constants = constants if constants is not None else estimate_constants(obj)
    if w_star is None:
        w_star = reference_optimum(obj, constants=constants)
    stats = gradient_population_stats(obj, w_star)
    if per_class:
        f = n / ds.class_counts.astype(np.float64)
    else:
        f = n * ds.n_classes / ds.n_samples
    return Theorem2Inputs(mu=constants.mu, L=constants.L, C=ds.n_classes, f=f, n=n,
                          sigma_c_sq=stats.per_class_variance,
                          dist0_sq=squared_distance(w0, w_star))


def fit_decay_rate(k: np.ndarray, values: np.ndarray, *,
                   k_min: int = 0, k_max: float = np.inf) -> float:
    """Least-squares slope of ln(value) against k over a window.

    Returns the per-step log-decay rate (negative for decaying series).
    Non-positive and non-finite values are dropped; the window must keep at
    least two points.
    """
    k = np.asarray(k, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = (np.isfinite(values) & (values > 0.0) & (k >= k_min) & (k <= k_max))
    if np.sum(keep) < 2:
        raise ValueError("need at least two positive values inside the fit window")
    slope, _ = np.polyfit(k[keep], np.log(values[keep]), 1)
    return float(slope)
