"""Stochastic-volatility model coefficients.

A model is the set of scalar maps (mu, sigma, m, a) and a constant correlation
rho for

    dS = mu(Y) S dt + sigma(Y) S dW1
    dY = m(Y) dt + a(Y) (rho dW1 + rho' dW2),   rho' = sqrt(1 - rho^2).

All coefficient maps accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, ValidationError

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Default Sharpe scaling for the arctan-OU drift mu(y) = MU0 * sigma(y)^2,
# i.e. lambda(y) = MU0 * sigma(y).
# default constant expected return of the stock in the arctan-OU model
ARCTAN_OU_MU = 0.1


@dataclass(frozen=True, eq=False)
class SvModel:
    name: str
    mu: ArrayFn
    sigma: ArrayFn
    m: ArrayFn
    a: ArrayFn
    rho: float
    sigma_low: float
    sigma_high: float
    y_interval: tuple[float, float] = (-math.inf, math.inf)
    asymptotics_only: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (-1.0 < self.rho < 1.0):
            raise ValidationError(f"rho must lie in (-1, 1), got {self.rho}")
        if not (0 < self.sigma_low <= self.sigma_high):
            raise ValidationError("need 0 < sigma_low <= sigma_high")

    @property
    def rho_prime(self) -> float:
        return math.sqrt(1.0 - self.rho ** 2)

    def sharpe(self, y):
        return sharpe(self, y)


def _eval(fn: ArrayFn, y):
    out = np.asarray(fn(np.asarray(y, dtype=float)), dtype=float)
    return out if out.ndim else float(out)


def sharpe(model: SvModel, y):
    """Market price of stock risk mu(y)/sigma(y)."""
    s = np.asarray(_eval(model.sigma, y))
    if np.any(s <= 0):
        raise DomainError("Sharpe ratio undefined where sigma(y) <= 0")
    out = np.asarray(_eval(model.mu, y)) / s
    return out if out.ndim else float(out)


def make_hull_white(mu_coeff: float, kappa: float) -> SvModel:
    """Uncorrelated Hull-White model with cubic drift mu(y) = mu_coeff * y^3.

    sigma(y) = y is neither bounded nor bounded away from zero, so the model is
    flagged ``asymptotics_only`` and refused by the PDE pricer.
    """
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    return SvModel(
        name="hull_white",
        mu=lambda y: mu_coeff * y ** 3,
        sigma=lambda y: y,
        m=lambda y: np.zeros_like(y),
        a=lambda y: kappa * y,
        rho=0.0,
        sigma_low=1e-300,
        sigma_high=math.inf,
        y_interval=(0.0, math.inf),
        asymptotics_only=True,
        params={"family": "hull_white", "mu_coeff": mu_coeff, "kappa": kappa},
    )


def arctan_sigma(y):
    return 0.7 / math.pi * (np.arctan(np.asarray(y, dtype=float) - 1.0) + math.pi / 2) + 0.03


def make_arctan_ou(alpha: float = 5.0, mbar: float = 0.0, nu: float = 1.0, rho: float = -0.2,
                   mu: Optional[ArrayFn] = None, mu0: Optional[float] = None,
                   mu_const: float = ARCTAN_OU_MU) -> SvModel:
    """Ornstein-Uhlenbeck factor with the arctangent volatility map.

    Stock drift: ``mu`` if given, else ``mu0 * sigma(y)**2`` if ``mu0`` is
    given, else the constant ``mu_const``.
    """
    if not (alpha > 0 and nu > 0):
        raise ValidationError("alpha and nu must be positive")
    if not abs(rho) < 1:
        raise ValidationError(f"|rho| must be < 1, got {rho}")
    vol_of_vol = nu * math.sqrt(2 * alpha)
    params = {"family": "arctan_ou", "alpha": alpha, "mbar": mbar, "nu": nu, "rho": rho}
    if mu is None and mu0 is not None:
        mu = lambda y: mu0 * arctan_sigma(y) ** 2
        params["mu0"] = mu0
    elif mu is None:
        mu = lambda y: np.full_like(np.asarray(y, dtype=float), mu_const)
        params["mu_const"] = mu_const
    return SvModel(
        name="arctan_ou",
        mu=mu,
        sigma=arctan_sigma,
        m=lambda y: alpha * (mbar - y),
        a=lambda y: np.full_like(y, vol_of_vol, dtype=float),
        rho=rho,
        sigma_low=0.03,
        sigma_high=0.73,
        params=params,
    )


def make_constant_vol(sigma: float, alpha: float = 5.0, nu: float = 1.0, rho: float = 0.0,
                      mu0: float = 0.0) -> SvModel:
    """Degenerate model with y-independent volatility and an OU factor."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    vol_of_vol = nu * math.sqrt(2 * alpha)
    return SvModel(
        name="constant",
        mu=lambda y: np.full_like(y, mu0 * sigma ** 2, dtype=float),
        sigma=lambda y: np.full_like(y, sigma, dtype=float),
        m=lambda y: -alpha * y,
        a=lambda y: np.full_like(y, vol_of_vol, dtype=float),
        rho=rho,
        sigma_low=sigma,
        sigma_high=sigma,
        params={"family": "constant", "sigma": sigma, "alpha": alpha, "nu": nu, "rho": rho, "mu0": mu0},
    )


def model_from_dict(doc: dict) -> SvModel:
    """Build a built-in model from ``{"family": ..., <parameters>}``."""
    doc = dict(doc)
    family = doc.pop("family", None)
    builders = {"hull_white": make_hull_white, "arctan_ou": make_arctan_ou, "constant": make_constant_vol}
    if family not in builders:
        raise ValidationError(f"unknown model family {family!r}; choose from {sorted(builders)}")
    try:
        return builders[family](**doc)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {family}: {exc}") from exc


def y_for_sigma(model: SvModel, target: float, lo: float = -50.0, hi: float = 50.0) -> float:
    """Factor level y with sigma(y) = target (sigma assumed monotone on [lo, hi])."""
    f = lambda y: float(_eval(model.sigma, y)) - target
    if f(lo) * f(hi) > 0:
        raise DomainError(f"sigma(y) = {target} has no root in [{lo}, {hi}]")
    return optimize.brentq(f, lo, hi, xtol=1e-14)


@dataclass(frozen=True)
class ValidationReport:
    model: str
    interval: tuple[float, float]
    sigma_min: float
    sigma_max: float
    a_min: float
    a_max: float
    mu_abs_max: float
    m_abs_max: float
    violations: tuple[str, ...]
    holder_sigma: float
    holder_a: float
    known_violation: bool

    @property
    def ok(self) -> bool:
        return not self.violations or self.known_violation


def _holder_constant(vals: np.ndarray, y: np.ndarray, beta: float) -> float:
    # Hoelder quotient of the first derivative between neighbouring nodes
    d = np.gradient(vals, y)
    dy = np.diff(y)
    return float(np.max(np.abs(np.diff(d)) / dy ** beta)) if len(y) > 2 else 0.0


def validate_assumptions(model: SvModel, interval: tuple[float, float], resolution: int = 401,
                         beta: float = 0.5) -> ValidationReport:
    """Sample the coefficients and report bound / regularity violations."""
    lo, hi = interval
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValidationError(f"bad validation interval {interval}")
    y = np.linspace(lo, hi, resolution)
    s = np.asarray(_eval(model.sigma, y))
    a = np.asarray(_eval(model.a, y))
    mu = np.asarray(_eval(model.mu, y))
    m = np.asarray(_eval(model.m, y))
    violations = []
    if not all(np.all(np.isfinite(v)) for v in (s, a, mu, m)):
        violations.append("non-finite coefficient")
    if np.min(s) < model.sigma_low * (1 - 1e-12) or np.max(s) > model.sigma_high * (1 + 1e-12):
        violations.append("sigma outside declared [sigma_low, sigma_high]")
    if np.min(s) <= 1e-3 * max(1.0, np.max(np.abs(s))) or model.sigma_low < 1e-100:
        violations.append(f"sigma not bounded away from zero near y={y[np.argmin(s)]:.4g}")
    if not math.isfinite(model.sigma_high):
        violations.append("sigma not bounded above")
    if np.min(a) <= 0:
        violations.append(f"a(y) not positive near y={y[np.argmin(a)]:.4g}")
    hs = _holder_constant(s, y, beta)
    ha = _holder_constant(a, y, beta)
    if not (math.isfinite(hs) and math.isfinite(ha)):
        violations.append("derivative not Hoelder continuous on the sample")
    return ValidationReport(
        model=model.name,
        interval=(lo, hi),
        sigma_min=float(np.min(s)),
        sigma_max=float(np.max(s)),
        a_min=float(np.min(a)),
        a_max=float(np.max(a)),
        mu_abs_max=float(np.max(np.abs(mu))),
        m_abs_max=float(np.max(np.abs(m))),
        violations=tuple(violations),
        holder_sigma=hs,
        holder_a=ha,
        known_violation=model.asymptotics_only,
    )
