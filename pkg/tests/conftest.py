"""Shared fixtures and independent test oracles."""

from itertools import combinations

import numpy as np
import pytest

import ssag


def central_diff_grad(f, W, step=1e-6):
    """Central finite-difference gradient: the independent oracle for
    analytic gradients."""
    g = np.zeros_like(W)
    for i in range(W.size):
        e = np.zeros_like(W)
        e[i] = step
        g[i] = (f(W + e) - f(W - e)) / (2.0 * step)
    return g


def grad_rel_error(analytic, numeric):
    """Norm of the difference, normalized by max(1, norm of analytic)."""
    return float(np.linalg.norm(analytic - numeric) / max(1.0, np.linalg.norm(analytic)))


def subset_mean_gradients(obj, W, n):
    """Mean gradient of every size-n subset, by exhaustive enumeration."""
    N = obj.dataset.n_samples
    G = obj.grad_samples(W, np.arange(N))
    return np.array([G[list(s)].mean(axis=0) for s in combinations(range(N), n)])


def enumeration_mean_and_variance(obj, W, n):
    """Exact mean vector and scalar variance of the size-n subset mean.

    Variance is aggregated over coordinates (sum of per-coordinate
    variances), matching the package convention.
    """
    means = subset_mean_gradients(obj, W, n)
    grand = means.mean(axis=0)
    dev = means - grand
    return grand, float(np.sum(dev * dev) / means.shape[0])


@pytest.fixture
def line_ridge():
    """Two points on the line y = x: unregularized optimum W* = (1)."""
    ds = ssag.Dataset.regression(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]))
    return ssag.RidgeRegression(ds, lam=0.0)


@pytest.fixture
def two_class_logistic():
    """Small separable 2-class problem with a regularizer."""
    X = np.array([[1.0, 0.5], [2.0, -0.5], [-1.0, 0.3], [-2.0, -0.2],
                  [1.5, 1.0], [-1.5, -1.0]])
    y = np.array([1, 1, 0, 0, 1, 0])
    return ssag.LogisticRegression(ssag.Dataset.from_class_labels(X, y), lam=0.1)


@pytest.fixture
def random_problem():
    """Factory for random classification datasets and objectives."""

    def make(kind="logistic", N=12, p=3, C=2, lam=0.1, seed=0, stddev=1.0):
        rng = np.random.default_rng(seed)
        means = rng.normal(scale=2.0, size=(C, p))
        counts = [N // C] * C
        counts[0] += N - sum(counts)
        ds = ssag.gen_synthetic(ssag.SyntheticSpec(
            means=means, counts=tuple(counts), stddev=stddev, seed=seed + 1))
        return ssag.make_objective({"kind": kind, "lam": lam}, ds)

    return make


def make_envelope_problem():
    """The strongly convex 2-class logistic instance used by the
    envelope-verification tests: N = 200, p = 5, lam = 0.1.

    The class geometry is asymmetric (so the population gradient variance at
    the optimum is nonzero, giving SGD a genuine variance floor) and the
    within-class spread is small (the stratified method's resampling noise
    floor stays far below the distance envelope over the tested horizon).
    """
    means = np.zeros((2, 5))
    means[0, 0] = -18.0
    means[1, 0] = 22.0
    means[1, 1] = 4.0
    ds = ssag.gen_synthetic(ssag.SyntheticSpec(
        means=means, counts=(100, 100), stddev=0.02, seed=11))
    obj = ssag.LogisticRegression(ds, lam=0.1)
    const = ssag.estimate_constants(obj)
    w_star = ssag.reference_optimum(obj, constants=const)
    return obj, const, w_star


@pytest.fixture(scope="session")
def envelope_problem():
    return make_envelope_problem()
