"""Monte Carlo cross-checks: the small risk-aversion limit of the put price and
the static entropic risk measure."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, SimulationError, ValidationError
from .pdepricer import PutContract
from .svmodels import SvModel, sharpe


@dataclass(frozen=True)
class McConfig:
    paths: int = 200_000
    steps: int = 200
    seed: int = 12345
    antithetic: bool = True
    batch_size: int = 50_000

    def __post_init__(self):
        if self.paths < 1 or self.steps < 1 or self.batch_size < 1:
            raise ValidationError("paths, steps and batch_size must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.antithetic and self.paths % 2:
            raise ValidationError("antithetic sampling needs an even path count")


def _simulate_batch(model: SvModel, eta: float, contract: PutContract, s0: float, y0: float,
                    n_paths: int, steps: int, rng: np.random.Generator, antithetic: bool,
                    log_f_slope: Optional[Callable]) -> np.ndarray:
    T = contract.maturity
    dt = T / steps
    sq = math.sqrt(dt)
    rho, rho_p = model.rho, model.rho_prime
    half = n_paths // 2 if antithetic else n_paths
    log_s = np.full(n_paths, math.log(s0))
    y = np.full(n_paths, float(y0))
    for i in range(steps):
        z = rng.standard_normal((2, half))
        if antithetic:
            z = np.concatenate([z, -z], axis=1)
        dw1 = sq * z[0]
        dw2 = sq * z[1]
        sig = model.sigma(y)
        a = model.a(y)
        drift = model.m(y) - (rho + eta * rho_p) * a * sharpe(model, y)
        if log_f_slope is not None:
            drift = drift + a ** 2 * log_f_slope(T - i * dt, y)
        log_s += -0.5 * sig ** 2 * dt + sig * dw1
        y = y + drift * dt + a * (rho * dw1 + rho_p * dw2)
        if not (np.all(np.isfinite(log_s)) and np.all(np.isfinite(y))):
            raise SimulationError(f"non-finite path values at step {i + 1}", step=i + 1)
    payoff = contract.quantity * np.maximum(contract.strike - np.exp(log_s), 0.0)
    if antithetic:
        # pair means are the independent samples
        payoff = 0.5 * (payoff[:half] + payoff[half:])
    return payoff


def mc_adjusted_price(model: SvModel, eta: float, contract: PutContract, s0: float, y0: float,
                      cfg: McConfig = McConfig(),
                      log_f_slope: Optional[Callable] = None) -> tuple[float, float]:
    """Mean and standard error of n (K - S_T)^+ under the drift-adjusted factor.

    The factor drifts at m - (rho + eta rho') a lambda, plus a^2 d/dy log f when
    ``log_f_slope(tau, y)`` is supplied (the small-gamma limit needs it whenever
    lambda depends on y).  The stock is simulated as a driftless log-Euler step.
    """
    if model.asymptotics_only:
        raise ValidationError(f"model {model.name!r} is not a bounded-coefficient model")
    chunks = []
    done = 0
    batch = 0
    while done < cfg.paths:
        n = min(cfg.batch_size, cfg.paths - done)
        if cfg.antithetic and n % 2:
            n += 1
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(batch,)))
        chunks.append(_simulate_batch(model, eta, contract, s0, y0, n, cfg.steps, rng,
                                      cfg.antithetic, log_f_slope))
        done += n
        batch += 1
    samples = np.concatenate(chunks)
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(len(samples)))


def static_entropic(samples, gamma: float) -> float:
    """(1/gamma) log E[exp(-gamma xi)] over equally weighted samples."""
    xi = np.asarray(samples, dtype=float).ravel()
    if xi.size == 0:
        raise DomainError("static_entropic needs at least one sample")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if not np.all(np.isfinite(xi)):
        raise DomainError("samples must be finite")
    return float((logsumexp(-gamma * xi) - math.log(xi.size)) / gamma)
