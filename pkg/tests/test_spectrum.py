import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhwave import spectrum as sp
from bhwave.spectral import TrigField
from bhwave.wave import newton_refine, taylor_table


def wave(eps, N=32):
    return newton_refine(None, eps, N, tol=1e-13)


def eigs(eps, N=128, M=8):
    w = wave(eps, N // 4)
    return sp.eigen_spectrum(sp.assemble_L(w, N), w, M)


@pytest.fixture(scope="module")
def eig01():
    w = wave(0.1, 64)
    mat = sp.assemble_L(w, 256)
    return w, mat, sp.eigen_spectrum(mat, w, 64)


def test_assemble_at_zero():
    w = wave(0.0, 8)
    mat = sp.assemble_L(w, 32)
    m = mat.modes
    assert np.array_equal(mat.entries, np.diag(1j * (m - np.sign(m))))
    e = sp.eigen_spectrum(mat, w, 8)
    assert e.lam[3] == 3j
    assert e.kernel == (0j, 0j)


def test_assemble_coupling_first_order():
    eps = 0.1
    mat = sp.assemble_L(wave(eps, 16), 64)
    for m in (1, 4, -3):
        entry = mat.entries[mat.index(m + 1), mat.index(m)]
        assert entry == pytest.approx(1j * (m + 1) * eps / 2, abs=eps ** 2)


def test_reality_symmetry():
    mat = sp.assemble_L(wave(0.2, 32), 128)
    A = mat.entries
    rev = A[::-1, ::-1]
    assert np.array_equal(rev, np.conj(A))


def test_preconditions():
    w = wave(0.1, 32)
    with pytest.raises(ValueError):
        sp.assemble_L(w, 64)
    mat = sp.assemble_L(w, 128)
    with pytest.raises(ValueError):
        sp.eigen_spectrum(mat, w, 65)


def test_operator_apply_matches_formula():
    # L g = -v g' + H g + (u g)'
    from bhwave.spectral import deriv, hilbert, multiply
    w = wave(0.15, 32)
    mat = sp.assemble_L(w, 128)
    g = TrigField.from_modes(128, cos={2: 1.0, 5: -0.3}, sin={3: 0.7})
    ref = deriv(g) * (-w.v) + hilbert(g) + deriv(multiply(w.u.truncate(128), g))
    assert np.max(np.abs(mat.apply(g).to_complex() - ref.to_complex())) < 1e-13


def test_c_eps():
    assert sp.c_eps(wave(0.0, 8)) == 1.0
    c = sp.c_eps(wave(0.1))
    assert c == pytest.approx(1 - 0.1 ** 2 / 4, abs=3e-4)
    assert abs(c - sp.c_eps(wave(-0.1))) < 1e-4
    bad = sp.TravelingWave(0.1, TrigField.from_modes(4, cos={1: 2.0}), 0.5, 0.0, "test")
    with pytest.raises(ValueError):
        sp.c_eps(bad)


def test_c_eps_taylor_coefficients():
    # c = 1 - eps²/4 - 11 eps⁴/32 - ..., by Richardson-combined 5-point stencils
    c = {}
    for h in (0.02, 0.01):
        f = {j: sp.c_eps(wave(j * h)) if j else 1.0 for j in (-2, -1, 1, 2, 0)}
        c[h] = ((-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h * h) / 2,
                (f[2] - 4 * f[1] + 6 * f[0] - 4 * f[-1] + f[-2]) / h ** 4 / 24)
    assert c[0.01][0] == pytest.approx(-0.25, rel=1e-4)
    c4 = (4 * c[0.01][1] - c[0.02][1]) / 3
    assert c4 == pytest.approx(-11 / 32, rel=1e-4)


def test_eigen_lambda1(eig01):
    _, _, e = eig01
    ref = 1j * (1 - 0.1 ** 2 / 2 - 11 * 0.1 ** 4 / 16 - 529 * 0.1 ** 6 / 384)
    assert abs(e.lam[1] - ref) < 5e-7
    assert not e.ambiguous


def test_eigen_lambda2(eig01):
    _, _, e = eig01
    # the expansion evaluated at eps = 0.1 is 1.99239482i
    assert abs(e.lam[2] - sp.lambda_taylor_closed(2, 0.1)) < 1e-6
    assert e.lam[2].imag == pytest.approx(1.9923948, abs=1e-6)


def test_spectrum_symmetry(eig01):
    _, _, e = eig01
    for n in range(1, 65):
        assert abs(e.lam[-n] - np.conj(e.lam[n])) < 1e-8
    assert max(abs(e.lam[n].real) for n in e.lam) < 1e-7
    assert max(abs(z) for z in e.kernel) < 1e-6


def test_lambda_closed_form():
    assert sp.lambda_taylor_closed(1, 0.0) == 1j
    assert sp.lambda_taylor_closed(1, 0.1).imag == pytest.approx(
        1 - 0.005 - 11e-4 / 16 - 529e-6 / 384)
    assert sp.lambda_taylor_closed(-2, 0.1) == np.conj(sp.lambda_taylor_closed(2, 0.1))
    with pytest.raises(ValueError):
        sp.lambda_taylor_closed(0, 0.1)


@pytest.mark.parametrize("n", [1, 2, 3, -1, -2, -3])
def test_kato_low_orders(n):
    s = 1 if n > 0 else -1
    assert sp.kato_coefficient(n, 1) == 0
    assert sp.kato_coefficient_exact(n, 2) == Fraction(-(n + s), 4)
    assert sp.kato_coefficient(n, 3) == 0
    assert sp.kato_coefficient_exact(n, 4) == Fraction(-11 * (n + s), 32)
    assert sp.kato_coefficient(n, 5) == 0


def test_kato_sixth_order():
    assert sp.kato_coefficient_exact(1, 6) == Fraction(-529, 384)
    assert sp.kato_coefficient_exact(2, 6) == Fraction(-527 * 3, 768)
    assert sp.kato_coefficient_exact(3, 6) == Fraction(-527 * 4, 768)
    assert sp.kato_coefficient(2, 2) == -0.75j


def test_kato_errors():
    with pytest.raises(ValueError):
        sp.kato_coefficient(0, 2)
    with pytest.raises(ValueError):
        sp.kato_coefficient(1, 7)
    t = taylor_table(5)
    assert sp.kato_coefficient_exact(2, 4, t) == Fraction(-33, 32)


def test_representatives_count():
    # one representative per rotation class: C(2p-2, p-1)/p
    for p in range(1, 6):
        assert len(list(sp._representatives(p))) == math.comb(2 * p - 2, p - 1) // p


def test_kato_against_eigenvalue_differences():
    h_vals = (0.02, 0.01)
    est = {}
    for n in (1, 2):
        for h in h_vals:
            f = {j: eigs(j * h).lam[n] if j else 1j * n for j in (-2, -1, 0, 1, 2)}
            d2 = (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h * h) / 2
            d4 = (f[2] - 4 * f[1] + 6 * f[0] - 4 * f[-1] + f[-2]) / h ** 4 / 24
            est[n, h] = (d2, d4)
        k2, k4, k6 = (sp.kato_coefficient(n, k) for k in (2, 4, 6))
        d2, d4 = est[n, 0.02]
        assert abs(d2 - k2) < 1e-4 * abs(k2)
        # plain stencil: the eps^6 term leaves a 5 h² λ6 bias in the fourth difference
        assert abs(d4 - (k4 + 5 * 0.02 ** 2 * k6)) < 1e-4 * abs(k4)
        rich = (4 * est[n, 0.01][1] - est[n, 0.02][1]) / 3
        assert abs(rich - k4) < 1e-4 * abs(k4)


def test_kato_equals_c_coefficients():
    c2, c4 = -0.25, -11 / 32
    for n in (1, 2, 3, -2):
        s = 1 if n > 0 else -1
        assert sp.kato_coefficient(n, 2) == pytest.approx(1j * c2 * (n + s))
        assert sp.kato_coefficient(n, 4) == pytest.approx(1j * c4 * (n + s))


def test_remainder_orders():
    e1, e2 = eigs(0.1), eigs(0.05)
    res = sp.remainder_check(e1, e2)
    r1, order = res[1]
    assert order == pytest.approx(6, abs=0.5)
    assert res[3][0] < 1e-8
    e0 = eigs(0.0)
    assert all(r == 0 for r, _ in sp.remainder_check(e0).values())


def test_remainder_n2_order():
    res = sp.remainder_check(eigs(0.2), eigs(0.1))
    assert res[2][1] >= 8 - 0.5


def test_nonres_scan():
    r = sp.nonres_scan(0.05, 32)
    assert r.nonres_min > 0.05 ** 2 / 5
    m, n, l = r.witness
    assert m + n + l == 0
    assert abs(np.sign(m) + np.sign(n) + np.sign(l)) == 1
    assert r.nonres_min == pytest.approx(0.05 ** 2 / 4, rel=0.2)
    assert r.pair_cancellation == 0.0
    assert sp.lambda_taylor_closed(3, 0.05) + sp.lambda_taylor_closed(-3, 0.05) == 0
    with pytest.raises(ValueError):
        sp.nonres_scan(0.05, 65)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.005, 0.1))
def test_nonres_gap_property(eps):
    assert sp.nonres_scan(eps, 16).nonres_min > eps ** 2 / 5


def test_nonres_with_matrix_eigenvalues(eig01):
    _, _, e = eig01
    lam = {n: e.lam[n] for n in e.lam if abs(n) <= 16}
    r = sp.nonres_scan(0.1, 16, lam)
    assert r.nonres_min > 0.1 ** 2 / 5
    assert r.pair_cancellation < 1e-12


def test_kernel_check():
    w = wave(0.1, 32)
    mat = sp.assemble_L(w, 128)
    d1, d2 = sp.kernel_check(w, mat)
    assert d1 < 1e-8 and d2 < 1e-6
    w0 = wave(0.0, 8)
    d1, d2 = sp.kernel_check(w0, sp.assemble_L(w0, 32))
    assert d1 == 0 and d2 < 1e-15


def test_report_roundtrip():
    rep = sp.spectrum_report(0.07, 64, scan_M=32)
    d = rep.to_dict()
    assert d["nonres_min"] > 0.07 ** 2 / 5
    assert len(d["spectrum"]) == len(rep.n) == 32
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,re_lambda,im_lambda,taylor_pred,remainder"
