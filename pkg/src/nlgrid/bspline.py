"""Cardinal B-splines on uniform integer knots, with half-open pieces."""
from __future__ import annotations

import numpy as np

__all__ = ["bspline_eval", "bspline_derivative"]


def _b0(t):
    return ((t >= 0.0) & (t < 1.0)).astype(float)


def _b1(t):
    out = np.zeros_like(t)
    m = (t >= 0.0) & (t < 1.0)
    out[m] = t[m]
    m = (t >= 1.0) & (t < 2.0)
    out[m] = 2.0 - t[m]
    return out


def _b3(t):
    out = np.zeros_like(t)
    m = (t >= 0.0) & (t < 1.0)
    out[m] = t[m] ** 3 / 6.0
    m = (t >= 1.0) & (t < 2.0)
    x = t[m]
    out[m] = (-3.0 * x**3 + 12.0 * x**2 - 12.0 * x + 4.0) / 6.0
    m = (t >= 2.0) & (t < 3.0)
    x = t[m]
    out[m] = (3.0 * x**3 - 24.0 * x**2 + 60.0 * x - 44.0) / 6.0
    m = (t >= 3.0) & (t < 4.0)
    x = t[m]
    out[m] = (4.0 - x) ** 3 / 6.0
    return out


def bspline_eval(p, t):
    """Evaluate the cardinal B-spline B_p at t.

    B_0 is the indicator of [0, 1); higher orders follow the recursion
    B_p(t) = (t/p) B_{p-1}(t) + ((p+1-t)/p) B_{p-1}(t-1).  Orders 1 and 3
    use their closed piecewise forms directly.  Support is [0, p+1) with
    half-open pieces, so values at knots are right limits.  Accepts scalars
    or arrays.
    """
    p = int(p)
    if p < 0:
        raise ValueError("spline order must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if p == 0:
        out = _b0(t_arr)
    elif p == 1:
        out = _b1(t_arr)
    elif p == 3:
        out = _b3(t_arr)
    else:
        out = (t_arr / p) * bspline_eval(p - 1, t_arr) + (
            (p + 1.0 - t_arr) / p
        ) * bspline_eval(p - 1, t_arr - 1.0)
    return float(out[0]) if scalar else out.reshape(np.shape(t))


def bspline_derivative(p, t):
    """Derivative B_p'(t) = B_{p-1}(t) - B_{p-1}(t-1) for p >= 1.

    At breakpoints this is the right-hand limit, consistent with the
    half-open piece convention of :func:`bspline_eval`.
    """
    p = int(p)
    if p < 1:
        raise ValueError("derivative requires order p >= 1")
    t_arr = np.asarray(t, dtype=float)
    return bspline_eval(p - 1, t_arr) - bspline_eval(p - 1, t_arr - 1.0)
