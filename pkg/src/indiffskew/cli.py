"""Command-line front end: ``python -m indiffskew <command> ...``.

Every command reads a JSON config, validates all of it before computing, and
writes CSV/JSON outputs atomically.  Exit codes: 0 ok, 2 validation,
3 numeric, 4 data.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import asymptotics, calibrate as cal, pdepricer, riskdrivers, svmodels
from .blackscholes import bs_put
from .errors import IndiffError, ValidationError

log = logging.getLogger("indiffskew")

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"
SWEEPABLE = ("gamma", "eta")


# config plumbing

@dataclass(frozen=True)
class RunConfig:
    model: svmodels.SvModel
    driver: riskdrivers.DriverSpec
    spot: float
    strike: float
    maturity: float
    quantity: int
    y0: float
    grid: Optional[pdepricer.GridSpec]
    options: pdepricer.SolverOptions
    log_moneyness: tuple[float, ...]


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _section(doc: dict, key: str) -> dict:
    if key not in doc or not isinstance(doc[key], dict):
        raise ValidationError(f"config is missing the {key!r} section")
    return doc[key]


def driver_from_dict(doc: dict, base: Path = Path(".")) -> riskdrivers.DriverSpec:
    if "table" in doc:
        return riskdrivers.load_driver_csv(base / doc["table"])
    try:
        return riskdrivers.DistortedEntropic(float(doc["gamma"]), float(doc.get("eta", 0.0)))
    except KeyError as exc:
        raise ValidationError("driver needs 'gamma' (and optionally 'eta') or 'table'") from exc


def run_config_from_dict(doc: dict, base: Path = Path("."), need_grid: bool = True) -> RunConfig:
    model = svmodels.model_from_dict(_section(doc, "model"))
    driver = driver_from_dict(_section(doc, "driver"), base)
    c = _section(doc, "contract")
    spot = float(c.get("spot", 100.0))
    strike = float(c.get("strike", spot))
    maturity = float(c.get("maturity", 0.25))
    quantity = int(c.get("quantity", 1))
    pdepricer.PutContract(strike, maturity, quantity)  # validates
    if "y0" in doc:
        y0 = float(doc["y0"])
    elif "sigma0" in doc:
        y0 = svmodels.y_for_sigma(model, float(doc["sigma0"]))
    else:
        raise ValidationError("config needs 'y0' or 'sigma0'")
    grid = None
    if need_grid:
        grid = pdepricer.GridSpec.from_dict(_section(doc, "grid"))
        if abs(grid.T - maturity) > 1e-12:
            raise ValidationError(f"grid.T={grid.T} differs from the contract maturity {maturity}")
        if not grid.y_lo <= y0 <= grid.y_hi:
            raise ValidationError(f"y0={y0} lies outside the grid's y-range")
    s = doc.get("solver", {})
    unknown = set(s) - {"scheme", "correction", "stock_drift", "growth_limit"}
    if unknown:
        raise ValidationError(f"unknown solver options {sorted(unknown)}")
    options = pdepricer.SolverOptions(**s)
    if options.scheme not in ("bdf2", "euler"):
        raise ValidationError(f"unknown scheme {options.scheme!r}")
    ks = tuple(float(k) for k in doc.get("log_moneyness", [-0.3, -0.2, -0.1, 0.0, 0.1]))
    if grid is not None:
        for k in ks:
            if not grid.x_lo <= -k <= grid.x_hi:
                raise ValidationError(f"log-moneyness {k} falls outside the grid's x-range")
    return RunConfig(model, driver, spot, strike, maturity, quantity, y0, grid, options, ks)


def parse_sweep(text: Optional[str]) -> Optional[tuple[str, list[float]]]:
    if not text:
        return None
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in SWEEPABLE or not values:
        raise ValidationError(f"--sweep expects one of {SWEEPABLE} as name=v1,v2,...; got {text!r}")
    try:
        return name, [float(v) for v in values.split(",")]
    except ValueError as exc:
        raise ValidationError(f"--sweep values must be numbers: {values!r}") from exc


def _with_driver_param(driver: riskdrivers.DriverSpec, name: str, value: float) -> riskdrivers.DriverSpec:
    if not isinstance(driver, riskdrivers.DistortedEntropic):
        raise ValidationError("sweeps need a distorted-entropic driver")
    return replace(driver, **{name: value})


# output

def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _suffixed(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}_{tag}{out.suffix}")


# commands

def skew_rows(cfg: RunConfig, driver: riskdrivers.DriverSpec):
    contract = pdepricer.PutContract(cfg.strike, cfg.maturity, cfg.quantity)
    sol = pdepricer.solve_value(cfg.model, driver, contract, cfg.grid, cfg.options)
    ks = np.asarray(cfg.log_moneyness)
    curve = pdepricer.implied_vol_curve(sol, cfg.maturity, cfg.y0, -ks)
    for xi, msg in curve.errors:
        log.warning("no implied vol at log-moneyness %.4g: %s", -xi, msg)
    return [(float(k), float(v)) for k, v, ok in zip(ks, curve.vol, curve.valid) if ok]


def run_skew(cfg: RunConfig, out: Path, sweep=None) -> list[Path]:
    if cfg.model.asymptotics_only:
        raise ValidationError(f"model {cfg.model.name!r} is asymptotics-only; use the 'asymptotic' command")
    jobs = [(out, cfg.driver)]
    if sweep:
        name, values = sweep
        jobs = [(_suffixed(out, f"{name}{v:g}"), _with_driver_param(cfg.driver, name, v)) for v in values]
    results = [(p, skew_rows(cfg, d)) for p, d in jobs]
    # write only after every solve succeeded
    for p, rows in results:
        atomic_write(p, csv_text(["log_moneyness", "implied_vol"], rows))
    return [p for p, _ in results]


def asymptotic_rows(doc: dict):
    hw = _section(doc, "hull_white")
    try:
        kappa, mu, y, tau = (float(hw[k]) for k in ("kappa", "mu", "y", "tau"))
    except KeyError as exc:
        raise ValidationError(f"hull_white section is missing {exc}") from exc
    etas = [float(e) for e in doc.get("etas", [0.0, 0.2, 0.4])]
    ks = np.asarray(doc.get("log_moneyness", np.round(np.linspace(-1, 1, 81), 10).tolist()), dtype=float)
    svmodels.make_hull_white(mu, kappa)  # validates
    if tau == 0:
        a0 = np.asarray(asymptotics.i0(kappa, ks, y))
        return ["log_moneyness", "i0"], [(float(k), float(v)) for k, v in zip(ks, a0)]
    rows = []
    for eta in etas:
        p = asymptotics.HwAsymptoticParams(kappa, mu, eta, y, tau)
        # the expansion is even in x, so log(K/S) and log(S/K) agree
        rows += [(eta, x, b, c, d) for x, b, c, d in asymptotics.curve_rows(p, ks)]
    return ["eta", "log_moneyness", "i0", "i1", "implied_vol"], rows


def run_calibrate(quotes_path: Path, out: Path, split_x: float):
    quotes = cal.load_quotes(quotes_path)
    res = cal.calibrate(quotes, split_x)
    xs = sorted({q.x for q in quotes if q.x <= 0})
    tau = quotes[0].tau
    fit = np.asarray(cal.model_vol_im(res.kappa_hat, res.y_hat, tau, xs))
    wing = np.where(np.asarray(xs) < split_x,
                    res.mu_eta_hat * np.asarray(cal.wing_regressor(res.kappa_hat, res.y_hat, tau, xs)), 0.0)
    vol_by_x = {q.x: q.vol for q in quotes}
    rows = [(float(x), float(vol_by_x[x]), float(f + w)) for x, f, w in zip(xs, fit, wing)]
    curve_path = _suffixed(out.with_suffix(".csv"), "fit")
    atomic_write(out, json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
    atomic_write(curve_path, csv_text(["log_moneyness", "market_vol", "fitted_vol"], rows))
    return res, curve_path


@dataclass(frozen=True)
class CheckRow:
    name: str
    passed: bool
    detail: str


def run_check(doc: dict, base: Path, seed: int) -> list[CheckRow]:
    rows = []
    try:
        driver = driver_from_dict(_section(doc, "driver"), base)
        rep = riskdrivers.check_strictly_quadratic(driver)
        rows.append(CheckRow("driver admissibility", rep.all_pass,
                             f"driver {rep.driver}; conjugate {rep.conjugate}"))
    except IndiffError as exc:
        rows.append(CheckRow("driver admissibility", False, str(exc)))
        return rows
    cfg = run_config_from_dict(doc, base)
    if cfg.model.asymptotics_only:
        raise ValidationError(f"model {cfg.model.name!r} is asymptotics-only and cannot be checked by PDE")
    vr = svmodels.validate_assumptions(cfg.model, (cfg.grid.y_lo, cfg.grid.y_hi))
    rows.append(CheckRow("model assumptions", vr.ok, "ok" if not vr.violations else "; ".join(vr.violations)))

    contract = pdepricer.PutContract(cfg.strike, cfg.maturity, cfg.quantity)
    sol = pdepricer.solve_value(cfg.model, driver, contract, cfg.grid, cfg.options, validate=False)
    tau, x = cfg.maturity, sol.x[1:-1]
    p = sol.unit_price[-1, 1:-1, :]
    lo = np.asarray(bs_put(tau, x, cfg.model.sigma_low))[:, None]
    hi = np.asarray(bs_put(tau, x, cfg.model.sigma_high))[:, None]
    worst = float(max(np.max(lo - p), np.max(p - hi), 0.0))
    rows.append(CheckRow("price envelope", worst <= 1e-4, f"max violation {worst:.3g} per unit strike"))

    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.2, 1.0, 50) * rng.choice([-1.0, 1.0], 50)
    ys = rng.uniform(0.3, 0.5, 50)
    hw = doc.get("hull_white", {"kappa": 7.0, "mu": 6.0})
    k, mu = float(hw.get("kappa", 7.0)), float(hw.get("mu", 6.0))
    eik = max(abs(asymptotics.eikonal_residual(k, a, b)) for a, b in zip(xs, ys))
    rows.append(CheckRow("eikonal residual", eik < 1e-8, f"max {eik:.3g}"))
    tr = max(abs(asymptotics.transport_residual(k, mu, e, a, b)) for e in (0.0, 0.2) for a, b in zip(xs, ys))
    rows.append(CheckRow("transport residual", tr < 1e-5, f"max {tr:.3g}"))
    return rows


def price_point(cfg: RunConfig) -> dict:
    contract = pdepricer.PutContract(cfg.strike, cfg.maturity, cfg.quantity)
    sol = pdepricer.solve_value(cfg.model, cfg.driver, contract, cfg.grid, cfg.options)
    x = math.log(cfg.spot / cfg.strike)
    price = pdepricer.indifference_price(sol, cfg.maturity, x, cfg.y0)
    curve = pdepricer.implied_vol_curve(sol, cfg.maturity, cfg.y0, [x])
    vol = float(curve.vol[0]) if curve.valid[0] else None
    return {"spot": cfg.spot, "strike": cfg.strike, "quantity": cfg.quantity, "maturity": cfg.maturity,
            "y0": cfg.y0, "price": price, "implied_vol": vol}


# click wiring

def _fail(exc: IndiffError):
    click.echo(f"error [{type(exc).__name__}]: {exc}", err=True)
    sys.exit(exc.exit_code)


def _load(config: Optional[str], default_name: str) -> tuple[dict, Path]:
    path = Path(config) if config else CONFIG_DIR / default_name
    return _read_json(path), path.parent


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Indifference-pricing skews, short-maturity asymptotics and calibration."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--config", type=click.Path(dir_okay=False), help="JSON run config (default: configs/numerical_study.json).")
@click.option("--out", type=click.Path(dir_okay=False), default="skew.csv", show_default=True)
@click.option("--sweep", help="gamma=... or eta=... comma list; one output file per value.")
def skew(config, out, sweep):
    """Implied-vol skew from one PDE solve."""
    try:
        doc, base = _load(config, "numerical_study.json")
        sw = parse_sweep(sweep)
        cfg = run_config_from_dict(doc, base)
        for p in run_skew(cfg, Path(out), sw):
            click.echo(str(p))
    except IndiffError as exc:
        _fail(exc)


@main.command()
@click.option("--config", type=click.Path(dir_okay=False), help="JSON config (default: configs/hull_white_figure.json).")
@click.option("--out", type=click.Path(dir_okay=False), default="asymptotic.csv", show_default=True)
def asymptotic(config, out):
    """Hull-White two-term implied-vol curves for several eta."""
    try:
        doc, _ = _load(config, "hull_white_figure.json")
        header, rows = asymptotic_rows(doc)
        atomic_write(Path(out), csv_text(header, rows))
        click.echo(out)
    except IndiffError as exc:
        _fail(exc)


@main.command("calibrate")
@click.argument("quotes", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default="calibration.json", show_default=True)
@click.option("--split-x", type=float, default=-0.06, show_default=True, help="Liquid/wing boundary in log(K/S).")
def calibrate_cmd(quotes, out, split_x):
    """Two-stage Hull-White fit to a quote CSV."""
    try:
        if not Path(quotes).exists():
            raise ValidationError(f"quote file not found: {quotes}")
        res, curve = run_calibrate(Path(quotes), Path(out), split_x)
        click.echo(json.dumps(res.to_dict(), sort_keys=True))
        if res.n_ignored_positive:
            click.echo(f"warning: ignored {res.n_ignored_positive} quotes with positive log-moneyness", err=True)
    except IndiffError as exc:
        _fail(exc)


@main.command()
@click.option("--config", type=click.Path(dir_okay=False), help="JSON config (default: configs/check.json).")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=12345, show_default=True)
def check(config, seed):
    """Driver, model, envelope and residual checks as a pass/fail table."""
    try:
        doc, base = _load(config, "check.json")
        rows = run_check(doc, base, seed)
    except IndiffError as exc:
        _fail(exc)
    width = max(len(r.name) for r in rows)
    for r in rows:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    if not all(r.passed for r in rows):
        sys.exit(3)


@main.command()
@click.option("--config", type=click.Path(dir_okay=False), help="JSON run config (default: configs/numerical_study.json).")
@click.option("--out", type=click.Path(dir_okay=False), help="Also write the result as JSON here.")
def price(config, out):
    """Indifference price and implied vol at the configured spot and strike."""
    try:
        doc, base = _load(config, "numerical_study.json")
        cfg = run_config_from_dict(doc, base)
        if cfg.model.asymptotics_only:
            raise ValidationError(f"model {cfg.model.name!r} is asymptotics-only")
        res = price_point(cfg)
        text = json.dumps(res, sort_keys=True)
        if out:
            atomic_write(Path(out), text + "\n")
        click.echo(text)
    except IndiffError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
