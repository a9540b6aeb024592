import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import lambertw

from bhwave.spectral import TrigField, norm
from bhwave.wave import (DiagonalSeries, NewtonDivergence, TravelingWave, continuation,
                         diagonal_series, eval_taylor, newton_refine, taylor_table,
                         wave_residual, wave_tangent)


@pytest.fixture(scope="module")
def table30():
    return taylor_table(30)


def lambert_coef(n):
    # coefficient of x^n in 2 W(x/2)
    return 2 * Fraction((-n) ** (n - 1), math.factorial(n) * 2 ** n)


def test_low_order_coefficients():
    t = taylor_table(6)
    assert t.exact
    assert t.u[1][1] == 1
    assert t.u[2][2] == Fraction(-1, 2)
    assert t.u[3][3] == Fraction(3, 8)
    assert t.v[:6] == [-1, 0, Fraction(-1, 4), 0, Fraction(-5, 32), 0]
    # u_{3,1} vanishes because a_1 = eps is pinned
    assert all(t.u[n][1] == 0 for n in range(2, 7))


def test_parity_of_table(table30):
    for n in range(1, 31):
        for k in range(1, n + 1):
            if (n - k) % 2:
                assert table30.u[n][k] == 0
        if n % 2 and n < len(table30.v):
            assert table30.v[n] == 0


def test_diagonal_is_lambert(table30):
    for n in range(1, 31):
        assert table30.u[n][n] == lambert_coef(n)


def test_diagonal_series_float():
    d = diagonal_series(60)
    for n in range(1, 31):
        ref = float(lambert_coef(n))
        assert d.coefs[n] == pytest.approx(ref, rel=1e-10)
    x = 0.3
    series = sum(d.coefs[n] * x ** n for n in range(1, 61))
    assert series == pytest.approx(2 * lambertw(x / 2).real, rel=1e-12)


def test_radius_estimates():
    d = diagonal_series(60)
    assert isinstance(d, DiagonalSeries)
    assert abs(d.radius / (2 / math.e) - 1) < 0.02
    # the uncorrected estimates are the slow ones
    assert abs(d.radius_root / (2 / math.e) - 1) > 0.05


def test_float_table_matches_exact(table30):
    f = taylor_table(30, exact=False)
    U = table30.u_array()
    assert np.max(np.abs(f.u_array() - U) / np.maximum(np.abs(U), 1)) < 1e-12
    assert np.allclose(f.v_array(), table30.v_array(), atol=1e-14)


def test_table_limits():
    with pytest.raises(ValueError):
        taylor_table(0)
    with pytest.raises(ValueError):
        taylor_table(250, exact=False)


def test_csv_render():
    t = taylor_table(3)
    lines = t.to_csv().splitlines()
    assert lines[0] == "n,k,u_nk"
    assert "2,2,-1/2" in lines
    assert "3,3,3/8" in lines


def test_taylor_residual_order():
    t = taylor_table(8)
    r1 = eval_taylor(t, 0.1, 32).residual_norm
    r2 = eval_taylor(t, 0.05, 32).residual_norm
    # truncation after eps^8 leaves an O(eps^9) residual
    assert math.log(r1 / r2, 2) == pytest.approx(9, abs=0.6)


def test_newton_matches_taylor(table30):
    w = newton_refine(None, 0.1, 64)
    assert w.residual_norm < 1e-12
    tw = eval_taylor(table30, 0.1, 64)
    assert norm(w.u - tw.u, "L2") < 1e-10
    assert w.v == pytest.approx(tw.v, abs=1e-14)


def test_speed_expansion():
    eps = 0.05
    w = newton_refine(None, eps, 32)
    assert w.v + 1 + eps ** 2 / 4 == pytest.approx(-5 / 32 * eps ** 4, rel=1e-2)


def test_eps_zero_is_trivial():
    w = newton_refine(None, 0.0, 16)
    assert not np.any(w.u.cos) and w.v == -1.0


def test_reflection_symmetry():
    a = newton_refine(None, 0.2, 48)
    b = newton_refine(None, -0.2, 48)
    assert b.v == pytest.approx(a.v, abs=1e-14)
    x = np.linspace(0, 2 * np.pi, 50)
    assert np.max(np.abs(b.u(x + np.pi) - a.u(x))) < 1e-13


@settings(max_examples=10, deadline=None)
@given(st.floats(0.02, 0.3), st.integers(2, 4))
def test_rescaled_wave_is_a_wave(eps, n):
    # u(nx)/n with speed v/n solves the same profile equation
    w = newton_refine(None, eps, 32)
    u = w.u.rescale(n) * (1.0 / n)
    assert norm(wave_residual(u, w.v / n), "L2") < 1e-12


def test_tangent_matches_difference():
    w = newton_refine(None, 0.1, 32, tol=1e-13)
    du, dv = wave_tangent(w)
    h = 1e-4
    p = newton_refine(w, 0.1 + h, 32, tol=1e-13)
    m = newton_refine(w, 0.1 - h, 32, tol=1e-13)
    assert np.max(np.abs(du.cos - (p.u.cos - m.u.cos) / (2 * h))) < 1e-7
    assert dv == pytest.approx((p.v - m.v) / (2 * h), abs=1e-7)
    assert dv == pytest.approx(-0.1 / 2, abs=2e-3)


def test_wave_json_roundtrip():
    w = newton_refine(None, 0.1, 16)
    w2 = TravelingWave.from_dict(w.to_dict())
    assert w2.to_dict() == w.to_dict()


def test_newton_divergence_reports_history():
    with pytest.raises(NewtonDivergence) as exc:
        newton_refine(None, 0.3, 8, tol=1e-15, max_iter=3)
    assert len(exc.value.history) >= 2


def test_continuation_small():
    res = continuation(0.1, 0.02, 32)
    assert res.stop_reason == "eps_max"
    assert res.last_eps == pytest.approx(0.1)
    assert all(w.residual_norm <= 1e-10 for w in res.waves)
    with pytest.raises(ValueError):
        continuation(0.1, 0.05, 32)


def test_continuation_reaches_branch_end_region():
    res = continuation(0.56, 0.005, 256)
    assert res.last_eps >= 0.45
    assert 0.50 <= res.last_eps <= 0.548
    w = res.waves[-1]
    x = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
    assert np.min(w.u(x) - w.v) > 0
