"""Theta-smoothing kernels and the coupled kernel ``G_r``.

Two kernels are provided:

* ``RATIONAL``: theta(t) = t / (t + 1) for t >= 0 and theta(t) = t otherwise.
* ``EXPONENTIAL``: theta(t) = 1 - exp(-t).

With psi = 1 - theta, the coupled kernel

    G_r(s, t) = r * psi^{-1}(psi(s / r) + psi(t / r))

is a smooth under-approximation of min(s, t) that tends to a function
vanishing exactly on the complementarity set as r -> 0.  All functions accept
scalars or numpy arrays and broadcast.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

DENOMINATOR_FLOOR = 1e-300


class DomainError(ValueError):
    """Raised when an argument lies outside a kernel's domain."""


class SafeguardWarning(RuntimeWarning):
    """Emitted when a closed-form denominator had to be clamped."""


class ThetaKernel(enum.Enum):
    RATIONAL = "rational"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"theta1": cls.RATIONAL, "1": cls.RATIONAL,
                   "theta2": cls.EXPONENTIAL, "2": cls.EXPONENTIAL}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class KernelDerivatives:
    """Partials of ``G_r(s, t)`` with respect to s, t and r."""

    d_s: np.ndarray
    d_t: np.ndarray
    d_r: np.ndarray


def _unwrap(a):
    a = np.asarray(a)
    return a[()] if a.ndim == 0 else a


def _check_r(r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr > 0)):
        raise DomainError(f"smoothing parameter must be positive, got {r!r}")
    return r_arr


def theta(kernel, t):
    kernel = ThetaKernel.parse(kernel)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("theta requires finite arguments")
    if kernel is ThetaKernel.RATIONAL:
        pos = np.maximum(t, 0.0)
        return _unwrap(np.where(t >= 0, pos / (pos + 1.0), t))
    return _unwrap(-np.expm1(-t))


def psi(kernel, t):
    """Return 1 - theta(t), computed without cancellation."""
    kernel = ThetaKernel.parse(kernel)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("psi requires finite arguments")
    if kernel is ThetaKernel.RATIONAL:
        pos = np.maximum(t, 0.0)
        return _unwrap(np.where(t >= 0, 1.0 / (pos + 1.0), 1.0 - t))
    return _unwrap(np.exp(-t))


def psi_inv(kernel, y):
    kernel = ThetaKernel.parse(kernel)
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("psi_inv is defined on (0, inf) only")
    if kernel is ThetaKernel.RATIONAL:
        # both branches vanish at y = 1
        return _unwrap(np.where(y <= 1.0, 1.0 / np.minimum(y, 1.0) - 1.0, 1.0 - y))
    return _unwrap(-np.log(y))


def theta_r(kernel, t, r):
    """Scaled member theta(t / r) of the smoothing family."""
    return theta(kernel, np.asarray(t, dtype=float) / _check_r(r))


def g_generic(kernel, s, t, r):
    """Evaluate ``r * psi^{-1}(psi(s/r) + psi(t/r))`` by composition.

    The exponential kernel is routed through :func:`g2_stable`, which is the
    same function written so that it cannot overflow.
    """
    kernel = ThetaKernel.parse(kernel)
    r = _check_r(r)
    if kernel is ThetaKernel.EXPONENTIAL:
        return g2_stable(s, t, r)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return _unwrap(r * psi_inv(kernel, psi(kernel, s / r) + psi(kernel, t / r)))


def _g1_denominator(s, t, r):
    den = s + t + 2.0 * r
    small = np.abs(den) < DENOMINATOR_FLOOR
    if np.any(small):
        warnings.warn("G1 denominator clamped to the floor", SafeguardWarning, stacklevel=3)
        den = np.where(small, np.where(den < 0, -DENOMINATOR_FLOOR, DENOMINATOR_FLOOR), den)
    return den


def g1_closed(s, t, r):
    """Rational kernel in closed form, ``(s t - r^2) / (s + t + 2 r)``.

    Coincides with the generic composition when s, t >= 0 and s t >= r^2.
    The solver uses this expression everywhere.
    """
    r = _check_r(r)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return _unwrap((s * t - r * r) / _g1_denominator(s, t, r))


def g2_stable(s, t, r):
    """Exponential kernel ``-r log(exp(-s/r) + exp(-t/r))`` without overflow."""
    r = _check_r(r)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return _unwrap(np.minimum(s, t) - r * np.log1p(np.exp(-np.abs(s - t) / r)))


def g1_derivatives(s, t, r):
    r = _check_r(r)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    den = _g1_denominator(s, t, r)
    d_s = ((t + r) / den) ** 2
    d_t = ((s + r) / den) ** 2
    d_r = -2.0 * r / den + 2.0 * (r * r - s * t) / den**2
    return KernelDerivatives(_unwrap(d_s), _unwrap(d_t), _unwrap(d_r))


def g2_derivatives(s, t, r):
    """Softmin weights of the exponential kernel and its r-partial.

    ``d_r = (G - s d_s - t d_t) / r`` is evaluated relative to min(s, t) so
    that no cancellation occurs for small r.
    """
    r = _check_r(r)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    gap = np.abs(s - t) / r
    e = np.exp(-gap)
    w_far = e / (1.0 + e)  # weight of the larger argument
    w_near = 1.0 / (1.0 + e)
    s_smaller = s <= t
    d_s = np.where(s_smaller, w_near, w_far)
    d_t = np.where(s_smaller, w_far, w_near)
    d_r = -np.log1p(e) - gap * w_far
    return KernelDerivatives(_unwrap(d_s), _unwrap(d_t), _unwrap(d_r))


def kernel_value(kernel, s, t, r):
    """The G_r evaluation the solver uses for ``kernel``."""
    if ThetaKernel.parse(kernel) is ThetaKernel.RATIONAL:
        return g1_closed(s, t, r)
    return g2_stable(s, t, r)


def kernel_derivatives(kernel, s, t, r):
    if ThetaKernel.parse(kernel) is ThetaKernel.RATIONAL:
        return g1_derivatives(s, t, r)
    return g2_derivatives(s, t, r)


def ha_threshold(kernel, a):
    """Smallest s_a from which ``psi(s) <= psi(a s) / 2`` holds, or None.

    The rational kernel only admits a threshold for a < 1/2.
    """
    kernel = ThetaKernel.parse(kernel)
    if not 0.0 < a < 1.0:
        raise DomainError("a must lie in (0, 1)")
    if kernel is ThetaKernel.EXPONENTIAL:
        return math.log(2.0) / (1.0 - a)
    if a >= 0.5:
        return None
    return 1.0 / (1.0 - 2.0 * a)


def check_Ha(kernel, a, s_grid, rtol=1e-12):
    """Check ``psi(s) <= psi(a s) / 2`` at every grid point.

    Returns False for the rational kernel with a >= 1/2, where no threshold
    exists.  Grid points must not lie below the kernel's threshold.
    """
    kernel = ThetaKernel.parse(kernel)
    s_a = ha_threshold(kernel, a)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_a is None:
        return False
    if np.any(s_grid < s_a * (1.0 - rtol)):
        raise DomainError(f"grid points must be >= s_a = {s_a:.17g}")
    lhs = psi(kernel, s_grid)
    rhs = 0.5 * psi(kernel, a * s_grid)
    return bool(np.all(lhs <= rhs * (1.0 + rtol)))
