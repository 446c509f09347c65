"""Shared test oracles: finite differences, a normal-quantile inverter, pinball scans."""

from __future__ import annotations

import math

import numpy as np


def central_diff(fun, vec, h=1e-6):
    """Central finite difference of a scalar function over a parameter vector."""
    vec = np.asarray(vec, dtype=float)
    out = np.zeros_like(vec)
    for j in range(vec.size):
        vp = vec.copy()
        vm = vec.copy()
        vp[j] += h
        vm[j] -= h
        out[j] = (fun(vp) - fun(vm)) / (2.0 * h)
    return out


def central_diff_vector(fun, vec, h=1e-6):
    """Central finite difference of a vector-valued function: rows index outputs."""
    vec = np.asarray(vec, dtype=float)
    cols = []
    for j in range(vec.size):
        vp = vec.copy()
        vm = vec.copy()
        vp[j] += h
        vm[j] -= h
        cols.append((np.asarray(fun(vp)) - np.asarray(fun(vm))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def normal_quantile_bisect(p, tol=1e-12):
    """Invert the standard normal CDF by bisection on erf."""
    lo, hi = -12.0, 12.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if 0.5 * (1.0 + math.erf(mid / math.sqrt(2.0))) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pinball_scan_minimizer(y, level):
    """Brute-force minimizer of the mean tilted loss over constants.

    The minimizer is attained at an order statistic, so scanning the sample
    values is exhaustive.
    """
    y = np.asarray(y, dtype=float)

    def loss(c):
        u = y - c
        return float(np.mean(np.maximum((level - 1.0) * u, level * u)))

    return float(min(np.sort(y), key=loss))


def lstsq_fit(X, y, quadratic=False):
    """Closed-form least squares with intercept (and squared columns if asked)."""
    X = np.atleast_2d(X)
    cols = [X, X**2] if quadratic else [X]
    Phi = np.hstack(cols + [np.ones((X.shape[0], 1))])
    beta, *_ = np.linalg.lstsq(Phi, y, rcond=None)
    return beta
