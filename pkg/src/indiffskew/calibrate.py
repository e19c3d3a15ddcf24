"""Two-stage least-squares fit of the Hull-White short-maturity smile.

Stage 1 fits (kappa, y) of the undistorted approximation I_M to the liquid
quotes with split_x <= x <= 0.  Stage 2 keeps (kappa, y) fixed and regresses
the remaining wing residuals on tau x^3 / (2 psi^3) to estimate mu*eta.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .asymptotics import i0, i1
from .errors import DataError, InsufficientDataError, UnidentifiableError, ValidationError

log = logging.getLogger(__name__)

KAPPA_BOUNDS = (1e-6, 50.0)
Y_BOUNDS = (1e-6, 2.0)
KAPPA_STARTS = (1.0, 5.0, 10.0)


@dataclass(frozen=True)
class MarketQuote:
    tau: float
    x: float
    vol: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and self.vol > 0 and self.weight >= 0):
            raise ValidationError(f"bad quote {self}: need tau > 0, vol > 0, weight >= 0")


@dataclass(frozen=True)
class Stage1Fit:
    kappa: float
    y: float
    rmse: float
    n_used: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class CalibrationResult:
    kappa_hat: float
    y_hat: float
    mu_eta_hat: float
    split_x: float
    rmse_stage1: float
    rmse_stage2: float
    n_quotes_stage1: int
    n_quotes_stage2: int
    n_ignored_positive: int = 0
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


def model_vol_im(kappa, y, tau, x):
    """Undistorted two-term Hull-White approximation I0 (1 + tau I1)."""
    if not (np.all(np.asarray(tau) >= 0) and np.all(np.asarray(y) > 0)):
        raise ValidationError("need y > 0 and tau >= 0")
    base = np.asarray(i0(kappa, x, y))
    out = base * (1 + np.asarray(tau) * np.asarray(i1(kappa, 0.0, 0.0, x, y)))
    return out if out.ndim else float(out)


def wing_regressor(kappa, y, tau, x):
    """tau x^3 / (2 psi^3), written through x/psi to stay finite at the money."""
    out = 0.5 * np.asarray(tau) * np.asarray(i0(kappa, x, y)) ** 3
    return out if out.ndim else float(out)


def _arrays(quotes: Sequence[MarketQuote]):
    tau = np.array([q.tau for q in quotes], dtype=float)
    x = np.array([q.x for q in quotes], dtype=float)
    vol = np.array([q.vol for q in quotes], dtype=float)
    w = np.array([q.weight for q in quotes], dtype=float)
    return tau, x, vol, w


def _wrmse(resid, w) -> float:
    sw = float(np.sum(w))
    return math.sqrt(float(np.sum(w * resid ** 2)) / sw) if sw > 0 else math.nan


def _single_tau(tau: np.ndarray):
    if len(tau) and np.ptp(tau) > 1e-12:
        raise ValidationError("calibration expects quotes of a single maturity")


def fit_stage1(quotes: Sequence[MarketQuote], x_range=(-0.06, 0.0)) -> Stage1Fit:
    lo, hi = x_range
    used = [q for q in quotes if lo <= q.x <= hi]
    if len(used) < 3:
        raise InsufficientDataError(f"stage 1 needs at least 3 quotes in [{lo}, {hi}], got {len(used)}")
    tau, x, vol, w = _arrays(used)
    _single_tau(tau)
    if not np.sum(w) > 0:
        raise InsufficientDataError("stage 1 quotes carry zero total weight")

    def loss(p):
        k, yy = p
        return float(np.sum(w * (model_vol_im(k, yy, tau, x) - vol) ** 2))

    atm = float(vol[np.argmin(np.abs(x))])
    best = None
    for i, k0 in enumerate(KAPPA_STARTS):
        res = optimize.minimize(loss, np.array([k0, atm]), method="Nelder-Mead",
                                bounds=[KAPPA_BOUNDS, Y_BOUNDS],
                                options={"xatol": 1e-10, "fatol": 1e-18, "maxiter": 4000})
        key = (res.fun, i)
        if best is None or key < best[0]:
            best = (key, res.x)
    k_hat, y_hat = map(float, best[1])

    flags = []
    if k_hat <= KAPPA_BOUNDS[0] * 1.01 or k_hat >= KAPPA_BOUNDS[1] * 0.999:
        flags.append("kappa_at_bound")
    if y_hat <= Y_BOUNDS[0] * 1.01 or y_hat >= Y_BOUNDS[1] * 0.999:
        flags.append("y_at_bound")
    # a (numerically) rank-deficient Jacobian means kappa and y are not separately identified
    hk, hy = 1e-6 * max(k_hat, 1.0), 1e-6 * max(y_hat, 1e-3)
    jk = (model_vol_im(k_hat + hk, y_hat, tau, x) - model_vol_im(k_hat - hk, y_hat, tau, x)) / (2 * hk)
    jy = (model_vol_im(k_hat, y_hat + hy, tau, x) - model_vol_im(k_hat, y_hat - hy, tau, x)) / (2 * hy)
    sv = np.linalg.svd(np.sqrt(w)[:, None] * np.column_stack([jk, jy]), compute_uv=False)
    if sv[-1] <= 1e-6 * sv[0]:
        flags.append("unidentifiable")
    rmse = _wrmse(model_vol_im(k_hat, y_hat, tau, x) - vol, w)
    return Stage1Fit(k_hat, y_hat, rmse, len(used), tuple(flags))


def fit_stage2(quotes: Sequence[MarketQuote], kappa_hat: float, y_hat: float, x_max: float = -0.06):
    """Weighted least squares for the single coefficient mu*eta; returns (mu_eta, rmse, n_used)."""
    used = [q for q in quotes if q.x < x_max]
    if not used:
        raise InsufficientDataError(f"stage 2 needs at least one quote with x < {x_max}")
    tau, x, vol, w = _arrays(used)
    _single_tau(tau)
    r = vol - model_vol_im(kappa_hat, y_hat, tau, x)
    g = np.asarray(wing_regressor(kappa_hat, y_hat, tau, x))
    denom = float(np.sum(w * g * g))
    if not denom > 0:
        raise UnidentifiableError("all stage-2 regressors vanish; mu*eta is unidentifiable")
    mu_eta = float(np.sum(w * r * g)) / denom
    return mu_eta, _wrmse(r - mu_eta * g, w), len(used)


def calibrate(quotes: Sequence[MarketQuote], split_x: float = -0.06) -> CalibrationResult:
    quotes = list(quotes)
    if not quotes:
        raise InsufficientDataError("no quotes")
    _single_tau(np.array([q.tau for q in quotes]))
    negative = [q for q in quotes if q.x <= 0]
    ignored = len(quotes) - len(negative)
    if ignored:
        log.warning("ignoring %d quotes with positive log-moneyness", ignored)
    s1 = fit_stage1(negative, (split_x, 0.0))
    mu_eta, rmse2, n2 = fit_stage2(negative, s1.kappa, s1.y, split_x)
    return CalibrationResult(s1.kappa, s1.y, mu_eta, split_x, s1.rmse, rmse2, s1.n_used, n2,
                             ignored, s1.flags)


def load_quotes(path) -> list[MarketQuote]:
    """Read ``tau,log_moneyness,implied_vol[,weight]``; errors name the line."""
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip() for h in header]
        if header[:3] != ["tau", "log_moneyness", "implied_vol"] or header[3:] not in ([], ["weight"]):
            raise DataError(f"{path}:1: expected header tau,log_moneyness,implied_vol[,weight]")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
                out.append(MarketQuote(*vals))
            except (ValueError, ValidationError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from exc
    return out


def synthetic_chain(kappa: float, y: float, mu_eta: float, tau: float, xs, noise: float = 0.0,
                    seed: int = 0, wing_from: float | None = -0.06,
                    relative_noise: bool = False) -> list[MarketQuote]:
    """Quotes from I_M, plus mu_eta * regressor where x < ``wing_from``.

    The default matches the two-stage fitting model (undistorted liquid region,
    distorted wing); ``wing_from=None`` distorts every strike.  Noise is
    Gaussian, absolute in vol units unless ``relative_noise``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    g = np.asarray(wing_regressor(kappa, y, tau, xs))
    if wing_from is not None:
        g = np.where(xs < wing_from, g, 0.0)
    vols = model_vol_im(kappa, y, tau, xs) + mu_eta * g
    if noise:
        e = noise * np.random.default_rng(seed).standard_normal(xs.shape)
        vols = vols * (1 + e) if relative_noise else vols + e
    return [MarketQuote(tau, float(a), float(b)) for a, b in zip(xs, vols)]
