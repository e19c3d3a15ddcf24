import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from indiffskew.errors import ValidationError
from indiffskew.svmodels import (
    arctan_sigma,
    make_arctan_ou,
    make_constant_vol,
    make_hull_white,
    model_from_dict,
    sharpe,
    validate_assumptions,
    y_for_sigma,
)


def test_hull_white_readout():
    m = make_hull_white(6.0, 7.0)
    assert m.sigma(0.3) == pytest.approx(0.3)
    assert m.a(0.3) == pytest.approx(2.1)
    assert m.rho_prime == 1.0
    assert m.asymptotics_only
    assert sharpe(m, 0.3) == pytest.approx(0.54)


def test_arctan_readout():
    m = make_arctan_ou(5, 0, 1, -0.2)
    assert float(m.sigma(0.0)) == pytest.approx(0.2050, abs=5e-5)
    assert np.allclose(m.a(np.linspace(-3, 3, 7)), math.sqrt(10))
    assert y_for_sigma(m, 0.223) == pytest.approx(0.1504, abs=1e-3)
    assert m.rho ** 2 + m.rho_prime ** 2 == pytest.approx(1.0, abs=1e-15)


def test_sharpe_parametrizations():
    m = make_arctan_ou(mu0=2.0)
    assert sharpe(m, 0.0) == pytest.approx(2.0 * arctan_sigma(0.0))
    zero = make_arctan_ou(mu=lambda y: np.zeros_like(np.asarray(y, dtype=float)))
    assert np.all(sharpe(zero, np.linspace(-2, 2, 5)) == 0)


@given(st.floats(-20, 20))
def test_arctan_sigma_bounds_and_sharpe_identity(y):
    m = make_arctan_ou()
    s = float(m.sigma(y))
    assert 0.03 < s < 0.73
    assert float(sharpe(m, y)) * s == pytest.approx(float(m.mu(y)), rel=1e-14)


def test_arctan_sigma_increasing():
    s = arctan_sigma(np.linspace(-10, 10, 1001))
    assert np.all(np.diff(s) > 0)


def test_validation_reports():
    assert validate_assumptions(make_arctan_ou(), (-3, 3)).violations == ()
    hw = validate_assumptions(make_hull_white(6, 7), (0.01, 2))
    assert hw.violations and hw.known_violation
    assert any("away from zero" in v for v in hw.violations)
    cv = make_constant_vol(0.2)
    assert validate_assumptions(cv, (-2, 2)).violations == ()
    assert cv.sigma_low == cv.sigma_high == 0.2


def test_bad_inputs():
    with pytest.raises(ValidationError):
        make_arctan_ou(rho=1.0)
    with pytest.raises(ValidationError):
        model_from_dict({"family": "heston"})
    with pytest.raises(ValidationError):
        model_from_dict({"family": "arctan_ou", "bogus": 1})
    with pytest.raises(ValidationError):
        validate_assumptions(make_arctan_ou(), (1, -1))


def test_from_dict_roundtrip():
    m = model_from_dict({"family": "arctan_ou", "rho": -0.2, "mu_const": 0.1})
    assert m.rho == -0.2
    assert float(m.mu(0.3)) == pytest.approx(0.1)
