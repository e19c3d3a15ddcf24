import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indiffskew.errors import DataError, DomainError, ValidationError
from indiffskew.riskdrivers import (
    ConjugateDriver,
    DistortedEntropic,
    GenericTabulated,
    Lattice,
    check_strictly_quadratic,
    conjugate,
    conjugate_slope_at_zero,
    eval_driver,
    legendre_1d,
    load_driver_csv,
)

gammas = st.floats(0.05, 5.0)
etas = st.floats(-1.0, 1.0)
reals = st.floats(-3.0, 3.0)


def closed_conjugate(gamma, eta, zeta, z2):
    return zeta ** 2 / (2 * gamma) - gamma * z2 ** 2 / 2 - eta * zeta * z2


# eval_driver

def test_eval_examples():
    d = DistortedEntropic(0.5, 0.2)
    assert eval_driver(d, 0.0, 0.0) == 0.0
    assert eval_driver(d, 1.0, 2.0) == pytest.approx(1.49, abs=1e-14)


@given(gammas, reals, reals)
def test_eta_zero_is_entropic(gamma, z1, z2):
    d = DistortedEntropic(gamma, 0.0)
    assert eval_driver(d, z1, z2) == pytest.approx(gamma / 2 * (z1 ** 2 + z2 ** 2), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("gamma", [0.0, -1.0, math.inf, math.nan])
def test_bad_gamma(gamma):
    with pytest.raises(ValidationError):
        DistortedEntropic(gamma, 0.2)


def test_tabulated_validation_and_domain():
    z = np.linspace(-1, 1, 5)
    with pytest.raises(ValidationError):
        GenericTabulated(z[::-1], z, np.zeros((5, 5)))
    with pytest.raises(ValidationError):
        GenericTabulated(z, z, np.full((5, 5), np.nan))
    tab = GenericTabulated.from_function(lambda a, b: a ** 2 + b ** 2, z, z)
    assert tab(0.5, 0.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        tab(2.0, 0.0)


def test_load_driver_csv(tmp_path):
    p = tmp_path / "g.csv"
    rows = ["z1,z2,g"] + [f"{a},{b},{0.5 * (a * a + b * b)}" for b in (-1, 0, 1) for a in (1, -1, 0)]
    p.write_text("\n".join(rows) + "\n")
    tab = load_driver_csv(p)
    assert tab(1.0, 1.0) == pytest.approx(1.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("z1,z2,g\n0,0,x\n")
    with pytest.raises(DataError, match=":2:"):
        load_driver_csv(bad)
    holes = tmp_path / "holes.csv"
    holes.write_text("z1,z2,g\n0,0,0\n1,1,1\n0,1,1\n")
    with pytest.raises(DataError):
        load_driver_csv(holes)


# conjugate

def test_conjugate_examples():
    c = ConjugateDriver(DistortedEntropic(0.5, 0.2))
    assert conjugate(c, 0.0, 0.0) == 0.0
    assert conjugate(c, -0.4, 0.3) == pytest.approx(0.1615, abs=1e-12)


def test_closed_mode_needs_distorted_driver():
    z = np.linspace(-1, 1, 5)
    tab = GenericTabulated.from_function(lambda a, b: a ** 2, z, z)
    with pytest.raises(ValidationError):
        ConjugateDriver(tab, mode="closed")


@pytest.mark.parametrize("gamma,eta", [(0.5, 0.0), (0.5, 0.2), (1.0, 0.4)])
def test_numeric_matches_closed_on_lattice(gamma, eta):
    d = DistortedEntropic(gamma, eta)
    zeta, z2 = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21), indexing="ij")
    num = conjugate(ConjugateDriver(d, mode="numeric"), zeta, z2)
    assert np.max(np.abs(num - closed_conjugate(gamma, eta, zeta, z2))) < 1e-6


def test_slope_at_zero():
    c = ConjugateDriver(DistortedEntropic(0.5, 0.2))
    assert conjugate_slope_at_zero(c, -0.54) == pytest.approx(0.108, abs=1e-14)
    assert conjugate_slope_at_zero(ConjugateDriver(DistortedEntropic(0.5, 0.0)), 0.7) == 0.0
    n = ConjugateDriver(DistortedEntropic(0.5, 0.2), mode="numeric")
    got = conjugate_slope_at_zero(n, np.array([-1.0, 0.0, 1.0]))
    assert np.allclose(got, [0.2, 0.0, -0.2], atol=1e-5)


@settings(max_examples=60)
@given(gammas, etas, reals, reals, reals)
def test_fenchel_young(gamma, eta, zeta, z1, z2):
    d = DistortedEntropic(gamma, eta)
    c = ConjugateDriver(d)
    assert zeta * z1 <= eval_driver(d, z1, z2) + conjugate(c, zeta, z2) + 1e-8
    # equality at the maximizer z1* = zeta/gamma - eta z2
    zs = zeta / gamma - eta * z2
    assert zeta * zs == pytest.approx(eval_driver(d, zs, z2) + conjugate(c, zeta, z2), abs=1e-8)


def test_double_conjugation():
    d = DistortedEntropic(0.7, 0.3)
    c = ConjugateDriver(d)
    for z1 in np.linspace(-1.5, 1.5, 7):
        for z2 in (-1.0, 0.0, 0.8):
            back = legendre_1d(lambda t: conjugate(c, t, np.full_like(t, z2)), z1, center=0.7 * z1, halfwidth=10)
            assert back == pytest.approx(eval_driver(d, z1, z2), abs=1e-4)


# admissibility

def test_distorted_driver_admissible():
    assert check_strictly_quadratic(DistortedEntropic(0.5, 0.2)).all_pass


def test_lipschitz_driver_fails_lower_bound():
    z = np.linspace(-5, 5, 41)
    tab = GenericTabulated.from_function(lambda a, b: np.abs(a) + np.abs(b), z, z)
    rep = check_strictly_quadratic(tab, Lattice())
    assert not rep.driver.lower_bound
    assert not rep.conjugate.all_pass


def test_flat_driver_convex_not_strict():
    z = np.linspace(-5, 5, 41)
    rep = check_strictly_quadratic(GenericTabulated.from_function(lambda a, b: 0 * a, z, z))
    assert rep.driver.convex
    assert not rep.driver.strictly_convex
