"""Short-maturity implied volatility for the uncorrelated Hull-White model.

With sigma(y) = y, a(y) = kappa*y and stock drift mu*y^3 under a distorted
entropic driver the expansion I = I0 (1 + tau I1) has

    psi(x, y) = asinh(kappa x / y) / kappa,        I0 = x / psi,
    I1 = [log((y/x) psi (1 + kappa^2 x^2/y^2)^(1/4)) + eta mu x^2 / 2] / psi^2.

Both are 0/0 at the money; near x = 0 they switch to series in s = kappa x / y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# |x| below this multiple of y uses the series branch
_SERIES_BAND = 1e-6
# I1 loses digits to cancellation in the log for small s; series up to here
_I1_SERIES_S = 1e-3


@dataclass(frozen=True)
class HwAsymptoticParams:
    kappa: float
    mu_coeff: float
    eta: float
    y: float
    tau: float

    def __post_init__(self):
        if not (self.kappa > 0 and self.y > 0 and self.tau >= 0):
            raise ValidationError("need kappa > 0, y > 0 and tau >= 0")


def _check(kappa, y):
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    if np.any(np.asarray(y) <= 0):
        raise ValidationError("y must be positive")


def _out(v):
    return v if np.ndim(v) else float(v)


def psi(kappa, x, y):
    _check(kappa, y)
    x = np.asarray(x, dtype=float)
    return _out(np.arcsinh(kappa * x / y) / kappa)


def i0(kappa, x, y):
    """x / psi, with limit y at the money."""
    _check(kappa, y)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    s = kappa * x / y
    small = np.abs(x) < _SERIES_BAND * y
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = kappa * x / np.arcsinh(s)
    # s / asinh(s) = 1 + s^2/6 - 17 s^4/360 + ...
    series = y * (1 + s ** 2 / 6 - 17 * s ** 4 / 360)
    return _out(np.where(small, series, exact))


def _log_term(s):
    """log( asinh(s)/s * (1+s^2)^(1/4) ), series for small s."""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < _I1_SERIES_S
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.log(np.arcsinh(s) / s) + 0.25 * np.log1p(s * s)
    # asinh(s)/s = 1 - s^2/6 + 3 s^4/40 ; log(...) = -s^2/6 + 3s^4/40 - s^4/72
    # 1/4 log(1+s^2) = s^2/4 - s^4/8
    series = s ** 2 / 12 + (3 / 40 - 1 / 72 - 1 / 8) * s ** 4
    return np.where(small, series, exact)


def i1(kappa, mu_coeff, eta, x, y):
    _check(kappa, y)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    s = kappa * x / y
    p = np.arcsinh(s) / kappa
    small = np.abs(s) < _I1_SERIES_S
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (_log_term(s) + 0.5 * eta * mu_coeff * x ** 2) / p ** 2
    # (x/psi)^2 = y^2 (1 + s^2/3 + ...); log term / psi^2 = kappa^2/12 (1 + ...)
    x_over_psi_sq = y ** 2 * (1 + s ** 2 / 3)
    series = (kappa ** 2 * (1 / 12 + (3 / 40 - 1 / 72 - 1 / 8 + 1 / 36) * s ** 2)
              + 0.5 * eta * mu_coeff * x_over_psi_sq)
    return _out(np.where(small, series, exact))


def approx_vol(p: HwAsymptoticParams, x):
    """Two-term expansion I0 (1 + tau I1)."""
    base = np.asarray(i0(p.kappa, x, p.y))
    if p.tau == 0:
        return _out(base)
    return _out(base * (1 + p.tau * np.asarray(i1(p.kappa, p.mu_coeff, p.eta, x, p.y))))


# PDE residuals by central differences

def _d(f, x, y, h, axis):
    if axis == 0:
        return (f(x + h, y) - f(x - h, y)) / (2 * h)
    return (f(x, y + h) - f(x, y - h)) / (2 * h)


def _d2(f, x, y, h, axis):
    if axis == 0:
        return (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / h ** 2
    return (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / h ** 2


def eikonal_residual(kappa, x, y, h=1e-5, psi_fn=None):
    """psi_x^2 + kappa^2 psi_y^2 - 1/y^2 with central differences."""
    if psi_fn is None:
        psi_fn = lambda a, b: psi(kappa, a, b)
    px = _d(psi_fn, x, y, h, 0)
    py = _d(psi_fn, x, y, h, 1)
    return px ** 2 + kappa ** 2 * py ** 2 - 1.0 / y ** 2


def transport_residual(kappa, mu_coeff, eta, x, y, h=1e-4, i1_fn=None):
    """Residual of the first-order transport equation at (x, y), x != 0.

        2 I1 + y^2 psi psi_x I1_x + kappa^2 y^2 psi psi_y I1_y
             - (psi/x) M(x/psi) + eta mu(y) psi_y / psi

    with M = 1/2 y^2 d_xx + 1/2 kappa^2 y^2 d_yy and mu(y) = mu_coeff y^3.
    """
    if x == 0:
        raise ValidationError("transport residual is evaluated away from x = 0")
    if i1_fn is None:
        i1_fn = lambda a, b: i1(kappa, mu_coeff, eta, a, b)
    ps = lambda a, b: psi(kappa, a, b)
    inv = lambda a, b: a / psi(kappa, a, b)
    p = ps(x, y)
    px = _d(ps, x, y, h, 0)
    py = _d(ps, x, y, h, 1)
    M = 0.5 * y ** 2 * _d2(inv, x, y, h, 0) + 0.5 * kappa ** 2 * y ** 2 * _d2(inv, x, y, h, 1)
    return (2 * i1_fn(x, y)
            + y ** 2 * p * px * _d(i1_fn, x, y, h, 0)
            + kappa ** 2 * y ** 2 * p * py * _d(i1_fn, x, y, h, 1)
            - (p / x) * M
            + eta * mu_coeff * y ** 3 * py / p)


def curve_rows(p: HwAsymptoticParams, xs):
    """(x, i0, i1, approx_vol) rows for CSV export."""
    xs = np.asarray(xs, dtype=float)
    a0 = np.asarray(i0(p.kappa, xs, p.y))
    a1 = np.asarray(i1(p.kappa, p.mu_coeff, p.eta, xs, p.y))
    av = np.asarray(approx_vol(p, xs))
    return [(float(x), float(b), float(c), float(d)) for x, b, c, d in zip(xs, a0, a1, av)]
