"""Finite-difference solver for the indifference-pricing PDE of a European put.

Coordinates are tau = T - t, x = log(S/K), y.  Per unit of the scaled strike
Kt = n*K the option holder's value u solves

    u_tau = L u - ghat(-lambda(y), rho' Kt a(y) u_y) / Kt,   u(0) = -(1 - e^x)^+

    L = 1/2 sigma^2 (u_xx - u_x) + rho sigma a u_xy + 1/2 a^2 u_yy + (m - rho a lambda) u_y

and u_tilde solves the same equation in (tau, y) from zero initial data.  The
indifference price per unit strike is u_tilde - u.

Linear terms are implicit (one sparse LU per run).  The driver contributes its
linearization at zero Vega, rho' a ghat_z2(-lambda, 0) u_y, to the implicit
drift; the remaining nonlinear part is explicit, with one optional fixed-point
correction sweep per step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .blackscholes import implied_vol
from .errors import DomainError, InstabilityError, NoSolutionError, NumericError, ValidationError
from .riskdrivers import ConjugateDriver, DistortedEntropic, DriverSpec, conjugate, conjugate_slope_at_zero
from .svmodels import SvModel, sharpe, validate_assumptions


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [0, T] x [x_lo, x_hi] x [y_lo, y_hi].

    ``nx`` counts the interior x nodes (two Dirichlet nodes are added);
    ``ny`` counts all y nodes, which are all unknowns under the Neumann
    condition.
    """

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    nt: int
    T: float

    def __post_init__(self):
        if not (self.x_lo < 0 < self.x_hi):
            raise ValidationError("grid needs x_lo < 0 < x_hi")
        if not self.y_lo < self.y_hi:
            raise ValidationError("grid needs y_lo < y_hi")
        if min(self.nx, self.ny, self.nt) < 8:
            raise ValidationError("nx, ny, nt must be at least 8")
        if not self.T > 0:
            raise ValidationError("grid maturity T must be positive")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.nx + 2)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_lo, self.y_hi, self.ny)

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def refined(self) -> "GridSpec":
        """Halve dx, dy and dt keeping the old nodes."""
        return GridSpec(self.x_lo, self.x_hi, self.y_lo, self.y_hi,
                        2 * self.nx + 1, 2 * self.ny - 1, 2 * self.nt, self.T)

    @classmethod
    def from_dict(cls, doc: dict) -> "GridSpec":
        missing = [k for k in ("x_lo", "x_hi", "y_lo", "y_hi", "nx", "ny", "nt", "T") if k not in doc]
        if missing:
            raise ValidationError(f"grid is missing fields {missing}")
        return cls(float(doc["x_lo"]), float(doc["x_hi"]), float(doc["y_lo"]), float(doc["y_hi"]),
                   int(doc["nx"]), int(doc["ny"]), int(doc["nt"]), float(doc["T"]))


@dataclass(frozen=True)
class PutContract:
    strike: float
    maturity: float
    quantity: int = 1

    def __post_init__(self):
        if not (self.strike > 0 and self.maturity > 0):
            raise ValidationError("contract needs strike > 0 and maturity > 0")
        if int(self.quantity) != self.quantity or self.quantity < 1:
            raise ValidationError("quantity must be a positive integer")

    @property
    def scaled_strike(self) -> float:
        return self.quantity * self.strike


@dataclass(frozen=True)
class SolverOptions:
    scheme: Literal["bdf2", "euler"] = "bdf2"
    correction: bool = True
    # adds mu(y) u_x, the stock drift written in the generator of the numerical study
    stock_drift: bool = False
    growth_limit: float = 10.0


@dataclass(frozen=True, eq=False)
class PdeSolution:
    grid: GridSpec
    u: np.ndarray
    u_tilde: np.ndarray
    model: str
    driver: DriverSpec
    contract: PutContract
    options: SolverOptions = field(default_factory=SolverOptions)
    sigma_low: float = 0.01
    sigma_high: float = 1.0

    @property
    def x(self):
        return self.grid.x

    @property
    def y(self):
        return self.grid.y

    @property
    def tau(self):
        return self.grid.tau

    @property
    def unit_price(self) -> np.ndarray:
        """u_tilde - u on every node, per unit of scaled strike."""
        return self.u_tilde[:, None, :] - self.u


# discretization helpers

def _d1(n: int, h: float) -> sp.csr_matrix:
    """Central first difference on n nodes; zero rows at both ends."""
    off = np.full(n - 1, 0.5 / h)
    D = sp.diags([-off, off], [-1, 1], shape=(n, n), format="lil")
    D[0, :] = 0
    D[n - 1, :] = 0
    return D.tocsr()


def _d2_neumann(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0 / h ** 2)
    off = np.full(n - 1, 1.0 / h ** 2)
    D = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    # ghost node u_{-1} = u_1
    D[0, 1] = 2.0 / h ** 2
    D[n - 1, n - 2] = 2.0 / h ** 2
    return D.tocsr()


def _x_stencils(nx: int, h: float):
    """First/second central differences for interior rows over all nx+2 nodes."""
    rows = np.arange(nx)
    D1 = sp.csr_matrix((np.r_[np.full(nx, -0.5 / h), np.full(nx, 0.5 / h)],
                        (np.r_[rows, rows], np.r_[rows, rows + 2])), shape=(nx, nx + 2))
    D2 = sp.csr_matrix((np.r_[np.full(nx, 1 / h ** 2), np.full(nx, -2 / h ** 2), np.full(nx, 1 / h ** 2)],
                        (np.r_[rows, rows, rows], np.r_[rows, rows + 1, rows + 2])), shape=(nx, nx + 2))
    return D1, D2


@dataclass
class _Coefficients:
    sigma: np.ndarray
    a: np.ndarray
    lam: np.ndarray
    drift_y: np.ndarray
    mu: np.ndarray


def _coefficients(model: SvModel, conj: ConjugateDriver, y: np.ndarray) -> _Coefficients:
    sig = np.asarray(model.sigma(y), dtype=float)
    a = np.asarray(model.a(y), dtype=float)
    m = np.asarray(model.m(y), dtype=float)
    mu = np.asarray(model.mu(y), dtype=float)
    lam = np.asarray(sharpe(model, y), dtype=float)
    slope0 = np.asarray(conjugate_slope_at_zero(conj, -lam), dtype=float)
    drift = m - model.rho * a * lam - model.rho_prime * a * slope0
    return _Coefficients(sig, a, lam, drift, mu)


def _conjugate_for(driver: DriverSpec) -> ConjugateDriver:
    return ConjugateDriver(driver, mode="closed" if isinstance(driver, DistortedEntropic) else "numeric")


class _Source:
    """Explicit part of the driver term: ghat(-lam, rho' Kt a q)/Kt minus its linearization."""

    def __init__(self, conj: ConjugateDriver, co: _Coefficients, rho_prime: float, k_scaled: float):
        self.conj = conj
        self.k = k_scaled
        self.zeta = -co.lam
        self.scale = rho_prime * k_scaled * co.a
        self.lin = rho_prime * co.a * np.asarray(conjugate_slope_at_zero(conj, -co.lam))

    def __call__(self, q: np.ndarray) -> np.ndarray:
        # q has the y-axis last
        zeta = np.broadcast_to(self.zeta, q.shape)
        val = np.asarray(conjugate(self.conj, zeta, self.scale * q)) / self.k
        return val - self.lin * q


def _check_growth(new: np.ndarray, old: np.ndarray, limit: float, step: int):
    if not np.all(np.isfinite(new)):
        raise InstabilityError(f"non-finite values at time step {step}; increase nt")
    ref = max(float(np.max(np.abs(old))), 1e-2)
    if float(np.max(np.abs(new))) > limit * ref:
        raise InstabilityError(f"solution grew more than {limit}x at time step {step}; increase nt")


def _factor(M: sp.spmatrix):
    try:
        return splu(M.tocsc())
    except RuntimeError as exc:
        raise NumericError(f"sparse LU failed: {exc}") from exc


def _march(A: sp.spmatrix, u0: np.ndarray, nt: int, dt: float, source, rhs_bc, grad,
           options: SolverOptions, shape: tuple) -> np.ndarray:
    """Generic IMEX march for u_tau = A u + rhs_bc(n) - source(grad(u)).

    Backward Euler for the first step, then BDF2 when requested.  Returns
    the stacked time levels reshaped to ``(nt+1,) + shape``.
    """
    n_unk = u0.size
    I = sp.identity(n_unk, format="csc")
    lu_euler = _factor(I - dt * A)
    lu_bdf2 = _factor(I - (2.0 / 3.0) * dt * A) if options.scheme == "bdf2" else None
    out = np.empty((nt + 1, n_unk))
    out[0] = u0
    q_prev = q_curr = grad(u0)
    for n in range(nt):
        bc = rhs_bc(n + 1)
        if lu_bdf2 is None or n == 0:
            lu, c = lu_euler, dt
            base = out[n]
            q_star = q_curr
        else:
            lu, c = lu_bdf2, (2.0 / 3.0) * dt
            base = (4.0 * out[n] - out[n - 1]) / 3.0
            q_star = 2.0 * q_curr - q_prev
        new = lu.solve(base + c * (bc - source(q_star).ravel()))
        if options.correction:
            new = lu.solve(base + c * (bc - source(grad(new)).ravel()))
        _check_growth(new, out[n], options.growth_limit, n + 1)
        out[n + 1] = new
        q_prev, q_curr = q_curr, grad(new)
    return out.reshape((nt + 1,) + shape)


def _solve_merton_value(co: _Coefficients, grid: GridSpec, src: _Source, options: SolverOptions):
    y = grid.y
    hy = y[1] - y[0]
    Dy = _d1(grid.ny, hy)
    Dyy = _d2_neumann(grid.ny, hy)
    A = sp.diags(0.5 * co.a ** 2) @ Dyy + sp.diags(co.drift_y) @ Dy
    zero_bc = np.zeros(grid.ny)
    dt = grid.T / grid.nt
    return _march(A, np.zeros(grid.ny), grid.nt, dt, src, lambda n: zero_bc,
                  lambda v: Dy @ v, options, (grid.ny,))


def solve_value(model: SvModel, driver: DriverSpec, contract: PutContract, grid: GridSpec,
                options: SolverOptions = SolverOptions(), validate: bool = True) -> PdeSolution:
    """March u and u_tilde from tau = 0 to tau = grid.T."""
    if model.asymptotics_only:
        raise ValidationError(f"model {model.name!r} is asymptotics-only and cannot be priced by PDE")
    if validate:
        report = validate_assumptions(model, (grid.y_lo, grid.y_hi))
        if report.violations:
            raise ValidationError(f"model fails assumptions on the grid: {report.violations}")
    if abs(grid.T - contract.maturity) > 1e-12:
        raise ValidationError("grid.T must equal the contract maturity")

    conj = _conjugate_for(driver)
    y = grid.y
    x = grid.x
    co = _coefficients(model, conj, y)
    k_scaled = contract.scaled_strike
    src = _Source(conj, co, model.rho_prime, k_scaled)
    u_tilde = _solve_merton_value(co, grid, src, options)

    nx, ny = grid.nx, grid.ny
    hx = x[1] - x[0]
    hy = y[1] - y[0]
    Dx, Dxx = _x_stencils(nx, hx)
    Dy = _d1(ny, hy)
    Dyy = _d2_neumann(ny, hy)
    Iy = sp.identity(ny, format="csr")
    Ixf = sp.eye(nx, nx + 2, k=1, format="csr")  # interior rows of identity on all x nodes

    drift_x = -0.5 * co.sigma ** 2 + (co.mu if options.stock_drift else 0.0)
    A_full = (sp.kron(Dxx, sp.diags(0.5 * co.sigma ** 2))
              + sp.kron(Dx, sp.diags(drift_x))
              + sp.kron(Dx, sp.diags(model.rho * co.sigma * co.a) @ Dy)
              + sp.kron(Ixf, sp.diags(0.5 * co.a ** 2) @ Dyy + sp.diags(co.drift_y) @ Dy)).tocsc()
    n_all = nx + 2
    interior_cols = np.arange(ny, (n_all - 1) * ny)
    boundary_cols = np.r_[np.arange(ny), np.arange((n_all - 1) * ny, n_all * ny)]
    A_II = A_full[:, interior_cols]
    A_IB = A_full[:, boundary_cols]

    payoff = -np.maximum(-np.expm1(x), 0.0)
    # exact far-field solutions: u = u_tilde + payoff, since e^x is in the kernel of L
    def boundary(n):
        return np.r_[u_tilde[n] + payoff[0], u_tilde[n] + payoff[-1]]

    def rhs_bc(n):
        return A_IB @ boundary(n)

    def grad(v):
        return v.reshape(nx, ny) @ Dy.T

    u0 = np.repeat(payoff[1:-1], ny)
    dt = grid.T / grid.nt
    inner = _march(A_II, u0, grid.nt, dt, src, rhs_bc, grad, options, (nx, ny))

    u = np.empty((grid.nt + 1, nx + 2, ny))
    u[:, 1:-1, :] = inner
    u[:, 0, :] = u_tilde + payoff[0]
    u[:, -1, :] = u_tilde + payoff[-1]
    return PdeSolution(grid, u, u_tilde, model.name, driver, contract, options,
                       model.sigma_low, model.sigma_high)


# Merton component via the linearizing log transform

def merton_log_f(model: SvModel, eta: float, grid: GridSpec, options: SolverOptions = SolverOptions()) -> np.ndarray:
    """log f on the (tau, y) grid for the linear Merton-component problem.

    f_tau = 1/2 a^2 f_yy + (m - (rho + eta rho') a lambda) f_y - 1/2 lambda^2 rho'^2 f,  f(0) = 1.
    """
    y = grid.y
    hy = y[1] - y[0]
    a = np.asarray(model.a(y), dtype=float)
    lam = np.asarray(sharpe(model, y), dtype=float)
    drift = np.asarray(model.m(y), dtype=float) - (model.rho + eta * model.rho_prime) * a * lam
    kill = 0.5 * lam ** 2 * model.rho_prime ** 2
    A = sp.diags(0.5 * a ** 2) @ _d2_neumann(grid.ny, hy) + sp.diags(drift) @ _d1(grid.ny, hy) - sp.diags(kill)
    zero = np.zeros(grid.ny)
    f = _march(A, np.ones(grid.ny), grid.nt, grid.T / grid.nt, lambda q: np.zeros_like(q),
               lambda n: zero, lambda v: v, SolverOptions(options.scheme, False, growth_limit=options.growth_limit),
               (grid.ny,))
    if np.any(f <= 0):
        raise NumericError("Merton component f lost positivity; refine the grid")
    return np.log(f)


def merton_component_closed(model: SvModel, gamma: float, eta: float, grid: GridSpec,
                            options: SolverOptions = SolverOptions()) -> np.ndarray:
    """phi_0 = -log f / (gamma (1 - rho^2)) on the (tau, y) grid, shape (nt+1, ny)."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    return -merton_log_f(model, eta, grid, options) / (gamma * model.rho_prime ** 2)


class LogFSlope:
    """Interpolant of d/dy log f(tau, y), clamped to the grid in y."""

    def __init__(self, grid: GridSpec, log_f: np.ndarray):
        self.grid = grid
        slope = np.gradient(log_f, grid.y, axis=1)
        self._interp = RegularGridInterpolator((grid.tau, grid.y), slope, bounds_error=False, fill_value=None)

    def __call__(self, tau, y):
        tau = np.clip(tau, 0.0, self.grid.T)
        y = np.clip(np.asarray(y, dtype=float), self.grid.y_lo, self.grid.y_hi)
        pts = np.column_stack([np.broadcast_to(tau, y.shape).ravel(), y.ravel()])
        return self._interp(pts).reshape(y.shape)


# queries

def _interp_field(sol: PdeSolution, field_: np.ndarray, tau: float, x: float, y: float) -> float:
    g = sol.grid
    if not (0 <= tau <= g.T + 1e-14 and g.x_lo <= x <= g.x_hi and g.y_lo <= y <= g.y_hi):
        raise DomainError(f"query ({tau}, {x}, {y}) outside the solution grid")
    f = RegularGridInterpolator((sol.tau, sol.x, sol.y), field_, method="linear")
    return float(f([[min(tau, g.T), x, y]])[0])


def indifference_price(sol: PdeSolution, tau: float, x: float, y: float) -> float:
    """Price of the n puts in currency units: n K (u_tilde - u)."""
    return sol.contract.scaled_strike * _interp_field(sol, sol.unit_price, tau, x, y)


def unit_price(sol: PdeSolution, tau: float, x: float, y: float) -> float:
    return _interp_field(sol, sol.unit_price, tau, x, y)


@dataclass(frozen=True)
class VolCurve:
    tau: float
    y: float
    x: np.ndarray
    vol: np.ndarray
    valid: np.ndarray
    errors: tuple = ()

    def rows(self):
        return [(float(a), float(b)) for a, b, ok in zip(self.x, self.vol, self.valid) if ok]


def implied_vol_curve(sol: PdeSolution, tau: float, y0: float, xs: Sequence[float],
                      sigma_low: Optional[float] = None, sigma_high: Optional[float] = None) -> VolCurve:
    """Invert the unit-strike price at each x; failed points are marked invalid."""
    sigma_low = sol.sigma_low if sigma_low is None else sigma_low
    sigma_high = sol.sigma_high if sigma_high is None else sigma_high
    bracket = (0.5 * sigma_low, 2.0 * sigma_high)
    xs = np.asarray(xs, dtype=float)
    vols = np.full(xs.shape, np.nan)
    valid = np.zeros(xs.shape, dtype=bool)
    errs = []
    for i, xi in enumerate(xs):
        p = unit_price(sol, tau, float(xi), y0)
        try:
            vols[i] = implied_vol(p, tau, float(xi), bracket)
            valid[i] = True
        except NoSolutionError as exc:
            errs.append((float(xi), str(exc)))
    return VolCurve(float(tau), float(y0), xs, vols, valid, tuple(errs))


def vega_gap(sol: PdeSolution, tau: float, x: float, y: float) -> float:
    """u_tilde_y - u_y at an interior point, by central differences in y."""
    py = np.gradient(sol.unit_price, sol.y, axis=2)
    return _interp_field(sol, py, tau, x, y)


# multi-strike runs

@dataclass(frozen=True)
class StrikePoint:
    strike: float
    x: float
    price: float
    vol: float


def price_strikes(model: SvModel, driver: DriverSpec, spot: float, strikes: Sequence[float],
                  maturity: float, y0: float, grid: GridSpec, quantity: int = 1,
                  options: SolverOptions = SolverOptions(), jobs: int = 1) -> list[StrikePoint]:
    """One solve per strike, read off at x = log(spot/K)."""

    def one(k):
        contract = PutContract(float(k), maturity, quantity)
        sol = solve_value(model, driver, contract, grid, options)
        x = math.log(spot / k)
        p = indifference_price(sol, maturity, x, y0)
        try:
            vol = implied_vol(p / contract.scaled_strike, maturity, x,
                              (0.5 * model.sigma_low, 2 * model.sigma_high))
        except NoSolutionError:
            vol = math.nan
        return StrikePoint(float(k), x, p, vol)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, strikes))
    return [one(k) for k in strikes]
