"""Normalized Black-Scholes put (zero rates, unit strike) and its inversion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import NoSolutionError, ValidationError


@dataclass(frozen=True)
class VolPoint:
    tau: float
    x: float
    vol: float

    def __post_init__(self):
        if not (self.tau > 0 and self.vol > 0):
            raise ValidationError("VolPoint needs tau > 0 and vol > 0")


def unit_put(theta, x):
    """Put price per unit strike with total variance ``theta`` and x = log(S/K)."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(theta < 0):
        raise ValidationError("total variance must be nonnegative")
    theta, x = np.broadcast_arrays(theta, x)
    shape = theta.shape
    theta = theta.ravel()
    x = x.ravel()
    out = np.maximum(-np.expm1(x), 0.0)
    pos = theta > 0
    if np.any(pos):
        st = np.sqrt(theta[pos])
        xp = x[pos]
        with np.errstate(over="ignore", invalid="ignore"):
            val = ndtr(-xp / st + st / 2) - np.exp(xp) * ndtr(-xp / st - st / 2)
        # e^x * Phi(.) -> inf * 0 for huge x: the put is worthless there
        val = np.where(np.isfinite(val), val, 0.0)
        out[pos] = np.maximum(val, 0.0)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def bs_put(tau, x, sigma):
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(sigma < 0):
        raise ValidationError("bs_put needs tau >= 0 and sigma >= 0")
    return unit_put(sigma ** 2 * tau, x)


def _vega(tau, x, sigma):
    st = sigma * math.sqrt(tau)
    d = -x / st + st / 2
    return math.sqrt(tau) * math.exp(-0.5 * d * d) / math.sqrt(2 * math.pi)


def implied_vol(price: float, tau: float, x: float, bracket=(0.01, 2.0),
                bisect_iters: int = 40, tol: float = 1e-10) -> float:
    """Volatility in ``bracket`` whose unit put price equals ``price``.

    Bisection narrows the bracket first; Newton then polishes inside it.
    """
    lo, hi = map(float, bracket)
    if not (tau > 0 and 0 <= lo < hi):
        raise ValidationError("implied_vol needs tau > 0 and 0 <= lo < hi")
    intrinsic = max(-math.expm1(x), 0.0)
    p_lo = bs_put(tau, x, lo)
    p_hi = bs_put(tau, x, hi)
    if not math.isfinite(price):
        raise NoSolutionError("non-finite price", bound=None)
    # a time value at rounding level carries no volatility information
    at_intrinsic = price - intrinsic <= 8 * np.finfo(float).eps * max(1.0, intrinsic)
    if at_intrinsic or price < p_lo:
        raise NoSolutionError(
            f"price {price:.6g} below the bracket (bs_put at lo={lo} is {p_lo:.6g}, intrinsic {intrinsic:.6g})",
            bound=lo)
    if price > p_hi:
        raise NoSolutionError(f"price {price:.6g} above bs_put at hi={hi} ({p_hi:.6g})", bound=hi)

    a, b = lo, hi
    for _ in range(bisect_iters):
        mid = 0.5 * (a + b)
        if bs_put(tau, x, mid) < price:
            a = mid
        else:
            b = mid
    s = 0.5 * (a + b)
    for _ in range(50):
        v = _vega(tau, x, s)
        if v <= 0 or not math.isfinite(v):
            break
        step = (bs_put(tau, x, s) - price) / v
        s_new = min(max(s - step, a), b)
        if abs(s_new - s) < 1e-15:
            s = s_new
            break
        s = s_new
    if b - a > tol and abs(bs_put(tau, x, s) - price) > 1e-13:
        # Newton stalled on a flat vega; finish by bisection
        for _ in range(200):
            mid = 0.5 * (a + b)
            if bs_put(tau, x, mid) < price:
                a = mid
            else:
                b = mid
            if b - a < tol:
                break
        s = 0.5 * (a + b)
    return s
