"""Optimality and feasibility measures reported for every run."""

import numpy as np


def _pair(x, Fx):
    x = np.asarray(x, dtype=float).ravel()
    Fx = np.asarray(Fx, dtype=float).ravel()
    if x.shape != Fx.shape:
        raise ValueError(f"length mismatch: {x.size} vs {Fx.size}")
    return x, Fx


def opt_metric(x, Fx):
    """max_i |x_i * F_i(x)|."""
    x, Fx = _pair(x, Fx)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x * Fx)))


def feas_metric(x, Fx):
    """||min(x, 0)||_1 + ||min(F(x), 0)||_1."""
    x, Fx = _pair(x, Fx)
    return float(np.sum(-np.minimum(x, 0.0)) + np.sum(-np.minimum(Fx, 0.0)))
