"""Convex BSDE drivers, their partial Legendre transforms and admissibility checks.

Two driver families are supported: the two-parameter distorted entropic driver

    g(z1, z2) = gamma/2 * ((z1 + eta*z2)**2 + z2**2)

and a generic driver tabulated on a rectangular (z1, z2) grid and interpolated
bilinearly.  The conjugate in the first argument,

    ghat(zeta, z2) = sup_z1 (zeta*z1 - g(z1, z2)),

is available in closed form for the distorted family and by numerical
maximization for any driver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Union

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator

from .errors import DataError, DomainError, InconclusiveSupError, NumericError, ValidationError


@dataclass(frozen=True)
class DistortedEntropic:
    gamma: float
    eta: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if not math.isfinite(self.eta):
            raise ValidationError(f"eta must be finite, got {self.eta}")


@dataclass(frozen=True, eq=False)
class GenericTabulated:
    """Driver samples ``g[i, j] = g(z1[i], z2[j])`` on a strictly increasing grid."""

    z1: np.ndarray
    z2: np.ndarray
    g: np.ndarray
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        z1 = np.asarray(self.z1, dtype=float)
        z2 = np.asarray(self.z2, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if z1.ndim != 1 or z2.ndim != 1 or len(z1) < 2 or len(z2) < 2:
            raise ValidationError("tabulated driver needs at least a 2x2 grid")
        if np.any(np.diff(z1) <= 0) or np.any(np.diff(z2) <= 0):
            raise ValidationError("tabulated driver grid must be strictly increasing")
        if g.shape != (len(z1), len(z2)):
            raise ValidationError(f"g has shape {g.shape}, expected {(len(z1), len(z2))}")
        if not np.all(np.isfinite(g)):
            raise ValidationError("tabulated driver has non-finite samples")
        for name, arr in (("z1", z1), ("z2", z2), ("g", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_interp", RegularGridInterpolator((z1, z2), g, method="linear"))

    @classmethod
    def from_function(cls, func: Callable, z1, z2) -> "GenericTabulated":
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
        return cls(z1, z2, np.asarray(func(Z1, Z2), dtype=float))

    def __call__(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
        if (np.any(z1 < self.z1[0]) or np.any(z1 > self.z1[-1])
                or np.any(z2 < self.z2[0]) or np.any(z2 > self.z2[-1])):
            raise DomainError("driver evaluated outside its table")
        pts = np.stack([z1.ravel(), z2.ravel()], axis=-1)
        out = self._interp(pts).reshape(z1.shape)
        return out if out.ndim else float(out)


DriverSpec = Union[DistortedEntropic, GenericTabulated]


def load_driver_csv(path) -> GenericTabulated:
    """Read a ``z1,z2,g`` table in any row order and rebuild the grid."""
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["z1", "z2", "g"]:
            raise DataError(f"{path}: expected header z1,z2,g")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["z1"]), float(row["z2"]), float(row["g"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row") from exc
    if not rows:
        raise DataError(f"{path}: empty driver table")
    data = np.array(rows)
    z1 = np.unique(data[:, 0])
    z2 = np.unique(data[:, 1])
    if len(data) != len(z1) * len(z2):
        raise DataError(f"{path}: rows do not form a full rectangular grid")
    g = np.full((len(z1), len(z2)), np.nan)
    g[np.searchsorted(z1, data[:, 0]), np.searchsorted(z2, data[:, 1])] = data[:, 2]
    if np.any(np.isnan(g)):
        raise DataError(f"{path}: duplicate or missing grid nodes")
    return GenericTabulated(z1, z2, g)


def eval_driver(d: DriverSpec, z1, z2):
    if isinstance(d, DistortedEntropic):
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        out = 0.5 * d.gamma * ((z1 + d.eta * z2) ** 2 + z2 ** 2)
        return out if out.ndim else float(out)
    return d(z1, z2)


# conjugate

@dataclass(frozen=True)
class ConjugateDriver:
    """Legendre transform of ``source`` in its first argument.

    ``mode="closed"`` is only valid for the distorted entropic family.  In
    ``mode="numeric"`` the sup is searched on ``n_search`` nodes of the window
    ``center +- halfwidth`` and polished by golden section.
    """

    source: DriverSpec
    mode: Literal["closed", "numeric"] = "closed"
    halfwidth: float = 10.0
    n_search: int = 2001
    tol: float = 1e-10
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("closed", "numeric"):
            raise ValidationError(f"unknown conjugate mode {self.mode!r}")
        if self.mode == "closed" and not isinstance(self.source, DistortedEntropic):
            raise ValidationError("closed-form conjugate needs a distorted entropic driver")
        if not (self.halfwidth > 0 and math.isfinite(self.halfwidth)):
            raise ValidationError("search halfwidth must be positive and finite")

    def __call__(self, zeta, z2):
        return conjugate(self, zeta, z2)


def curvature_z1(d: DriverSpec) -> float:
    """Typical second derivative of g in z1, used to centre the sup search."""
    if isinstance(d, DistortedEntropic):
        return d.gamma
    h = np.diff(d.z1)
    if len(d.z1) < 3:
        return 1.0
    second = 2 * (d.g[2:] / (h[1:, None] * (h[:-1, None] + h[1:, None]))
                  - d.g[1:-1] / (h[:-1, None] * h[1:, None])
                  + d.g[:-2] / (h[:-1, None] * (h[:-1, None] + h[1:, None])))
    c = float(np.median(second))
    return c if c > 1e-8 else 1.0


def _sup_line(line: Callable[[np.ndarray], np.ndarray], center: float, halfwidth: float,
              n: int, tol: float, lo: float = -np.inf, hi: float = np.inf) -> float:
    """max_t line(t) over [center-halfwidth, center+halfwidth] clipped to [lo, hi]."""
    a = max(center - halfwidth, lo)
    b = min(center + halfwidth, hi)
    if not a < b:
        raise InconclusiveSupError("empty search window")
    ts = np.linspace(a, b, n)
    vals = line(ts)
    k = int(np.argmax(vals))
    if k == 0 or k == n - 1:
        raise InconclusiveSupError(
            f"sup attained at search boundary t={ts[k]:.6g}; widen the window")
    neg = lambda t: -float(line(np.array([t]))[0])
    t_star = optimize.golden(neg, brack=(ts[k - 1], ts[k], ts[k + 1]), tol=tol)
    return max(float(vals[k]), -neg(t_star))


def conjugate(c: ConjugateDriver, zeta, z2):
    d = c.source
    if c.mode == "closed":
        zeta = np.asarray(zeta, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        out = zeta ** 2 / (2 * d.gamma) - 0.5 * d.gamma * z2 ** 2 - d.eta * zeta * z2
        return out if out.ndim else float(out)

    zeta_a, z2_a = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(z2, dtype=float))
    chat = curvature_z1(d)
    lo, hi = (-np.inf, np.inf) if isinstance(d, DistortedEntropic) else (d.z1[0], d.z1[-1])
    out = np.empty(zeta_a.shape)
    for idx in np.ndindex(zeta_a.shape):
        s, w = float(zeta_a[idx]), float(z2_a[idx])
        line = lambda t, s=s, w=w: s * t - eval_driver(d, t, np.full_like(t, w))
        out[idx] = _sup_line(line, s / chat, c.halfwidth, c.n_search, c.tol, lo, hi)
    return out if out.ndim else float(out)


def conjugate_slope_at_zero(c: ConjugateDriver, zeta):
    """d ghat / d z2 evaluated at (zeta, 0)."""
    if c.mode == "closed":
        out = -c.source.eta * np.asarray(zeta, dtype=float)
        return out if out.ndim else float(out)
    h = c.fd_step
    zeta = np.asarray(zeta, dtype=float)
    out = (conjugate(c, zeta, np.full_like(zeta, h)) - conjugate(c, zeta, np.full_like(zeta, -h))) / (2 * h)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite finite difference for conjugate slope")
    return out if np.ndim(out) else float(out)


def legendre_1d(func: Callable[[np.ndarray], np.ndarray], slope: float, center: float = 0.0,
                halfwidth: float = 10.0, n: int = 2001, tol: float = 1e-10) -> float:
    """sup_t (slope*t - func(t)) for a scalar convex function."""
    return _sup_line(lambda t: slope * t - func(t), center, halfwidth, n, tol)


# admissibility

@dataclass(frozen=True)
class Lattice:
    z1_lo: float = -5.0
    z1_hi: float = 5.0
    z2_lo: float = -5.0
    z2_hi: float = 5.0
    n: int = 41

    def nodes(self):
        return np.linspace(self.z1_lo, self.z1_hi, self.n), np.linspace(self.z2_lo, self.z2_hi, self.n)

    def shrink(self, factor: float) -> "Lattice":
        c1 = 0.5 * (self.z1_lo + self.z1_hi)
        c2 = 0.5 * (self.z2_lo + self.z2_hi)
        return Lattice(c1 + (self.z1_lo - c1) * factor, c1 + (self.z1_hi - c1) * factor,
                       c2 + (self.z2_lo - c2) * factor, c2 + (self.z2_hi - c2) * factor, self.n)


@dataclass(frozen=True)
class ConditionFlags:
    finite: bool
    normalized: bool
    convex: bool
    strictly_convex: bool
    upper_bound: bool
    lower_bound: bool
    c1: float
    c2: float

    @property
    def all_pass(self) -> bool:
        return (self.finite and self.normalized and self.convex and self.strictly_convex
                and self.upper_bound and self.lower_bound)


@dataclass(frozen=True)
class AdmissibilityReport:
    driver: ConditionFlags
    conjugate: ConditionFlags

    @property
    def all_pass(self) -> bool:
        return self.driver.all_pass and self.conjugate.all_pass


_FAILED = ConditionFlags(False, False, False, False, False, False, math.inf, math.inf)

# c1 fitted on the full lattice may exceed the half-size lattice value by at
# most this factor; linear (Lipschitz) growth doubles it.
_GROWTH_RATIO = 1.5


def _smallest_c1(Z1, Z2, G) -> float:
    def violated(c):
        return np.max(Z1 ** 2 / (4 * c) - c * (1 + Z2 ** 2) - G) > 1e-12

    lo, hi = 1e-10, 1e10
    if violated(hi):
        return math.inf
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if violated(mid):
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-10:
            break
    return hi


def _flags(func: Callable, lattice: Lattice) -> ConditionFlags:
    z1, z2 = lattice.nodes()
    Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
    try:
        G = np.asarray(func(Z1, Z2), dtype=float)
        g00 = float(func(np.array(0.0), np.array(0.0)))
    except InconclusiveSupError:
        return _FAILED
    if not np.all(np.isfinite(G)):
        return _FAILED
    scale = max(1.0, float(np.max(np.abs(G))))
    h = z1[1] - z1[0]
    second = (G[2:] - 2 * G[1:-1] + G[:-2]) / h ** 2
    c2 = float(np.max(G / (1 + Z1 ** 2 + Z2 ** 2)))
    c1 = _smallest_c1(Z1, Z2, G)
    inner = lattice.shrink(0.5)
    i1, i2 = inner.nodes()
    I1, I2 = np.meshgrid(i1, i2, indexing="ij")
    c1_inner = _smallest_c1(I1, I2, np.asarray(func(I1, I2), dtype=float))
    return ConditionFlags(
        finite=True,
        normalized=abs(g00) <= 1e-10 * scale,
        convex=bool(np.min(second) >= -1e-8 * scale),
        strictly_convex=bool(np.min(second) > 1e-8),
        upper_bound=math.isfinite(c2),
        lower_bound=math.isfinite(c1) and c1 <= _GROWTH_RATIO * c1_inner,
        c1=c1,
        c2=max(c2, 0.0),
    )


def check_strictly_quadratic(d: DriverSpec, lattice: Lattice = Lattice()) -> AdmissibilityReport:
    """Lattice diagnostics for the strictly-quadratic driver conditions.

    The lower quadratic bound cannot be decided on a finite lattice, so it is
    judged by growth: the smallest feasible c1 must stay put when the lattice
    doubles in size.  The same checks are repeated on the conjugate.
    """
    driver_flags = _flags(lambda a, b: eval_driver(d, a, b), lattice)
    mode = "closed" if isinstance(d, DistortedEntropic) else "numeric"
    conj = ConjugateDriver(d, mode=mode)
    conj_flags = _flags(lambda a, b: conjugate(conj, a, b), lattice)
    return AdmissibilityReport(driver_flags, conj_flags)
