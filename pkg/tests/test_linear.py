import numpy as np
import pytest

from busselab.linear import (
    dispersion_eigenvalues,
    integer_wavenumber,
    linearize,
    most_unstable_mode,
    turing_point,
    unstable_band,
)
from busselab.model import default_params, homogeneous_states


def brute_force_eigs(k, lin):
    """Independent oracle: eigenvalues of the explicit 2x2 symbol."""
    sym = np.diag([-lin.d1 * k * k, -lin.d2 * k * k]) + lin.A
    return sorted(np.linalg.eigvals(sym), key=lambda z: (-z.real, -z.imag))


class TestLinearization:
    def test_jacobian_entries(self):
        p = default_params(2.0)
        ub, vb = homogeneous_states(p).lower
        lin = linearize(p)
        assert lin.A[0, 0] == pytest.approx(-1 - vb**2)
        assert lin.A[0, 1] == pytest.approx(-2 * ub * vb)
        assert lin.A[1, 0] == pytest.approx(vb**2)
        assert lin.A[1, 1] == pytest.approx(-p.m + 2 * ub * vb)
        assert lin.Gamma == pytest.approx(lin.d1 * lin.A[1, 1] + lin.d2 * lin.A[0, 0])

    def test_no_vegetated_state_rejected(self):
        with pytest.raises(ValueError):
            linearize(default_params(0.5))


class TestDispersion:
    def test_k_zero_gives_reaction_eigenvalues(self):
        lin = linearize(default_params(1.7))
        got = dispersion_eigenvalues(0.0, lin)
        expected = sorted(np.linalg.eigvals(lin.A), key=lambda z: (-z.real, -z.imag))
        assert got[0] == pytest.approx(expected[0], abs=1e-12)
        assert got[1] == pytest.approx(expected[1], abs=1e-12)

    def test_matches_brute_force_eigensolver(self):
        lin = linearize(default_params(2.0))
        for k in (0.2, 0.05, 0.7, 3.0):
            got = dispersion_eigenvalues(k, lin)
            expected = brute_force_eigs(k, lin)
            for g, e in zip(got, expected):
                assert abs(g - e) < 1e-10 * (1 + abs(e))

    def test_large_k_asymptotics(self):
        lin = linearize(default_params(2.0))
        k = 10.0
        top = dispersion_eigenvalues(k, lin)[0].real
        predicted = -lin.d2 * k * k + lin.A[1, 1]
        assert abs(top - predicted) < 1e-3 * abs(predicted)

    def test_quadratic_residual_invariant(self):
        lin = linearize(default_params(1.4))
        rng = np.random.default_rng(2)
        for k in rng.uniform(0, 2, size=50):
            b = (lin.d1 + lin.d2) * k * k - lin.trace
            c = lin.d1 * lin.d2 * k**4 - lin.Gamma * k * k + lin.det
            for lam in dispersion_eigenvalues(k, lin):
                assert abs(lam * lam + b * lam + c) < 1e-10 * (1 + abs(lam) ** 2)


class TestMostUnstableMode:
    def test_stationarity_by_finite_difference(self):
        lin = linearize(default_params(2.0))
        k_mu, lam_mu = most_unstable_mode(lin)
        eps = 1e-4
        lam = lambda k: dispersion_eigenvalues(k, lin)[0].real
        d1 = (lam(k_mu + eps) - lam(k_mu - eps)) / (2 * eps)
        d2 = (lam(k_mu + eps) - 2 * lam(k_mu) + lam(k_mu - eps)) / eps**2
        assert abs(d1) < 1e-6 * abs(d2)
        assert lam(k_mu) == pytest.approx(lam_mu, abs=1e-10)

    def test_matches_dense_scan(self):
        lin = linearize(default_params(2.0))
        k_mu, _ = most_unstable_mode(lin)
        ks = np.linspace(0.0, 1.0, 100001)
        tops = np.array([dispersion_eigenvalues(k, lin)[0].real for k in ks])
        assert abs(ks[np.argmax(tops)] - k_mu) <= ks[1] - ks[0]

    def test_sign_flips_at_turing_point(self):
        tp = turing_point(0.45, 500.0, (1.0, 5.0))
        lo = most_unstable_mode(linearize(default_params(tp.a_T - 1e-4)))[1]
        hi = most_unstable_mode(linearize(default_params(tp.a_T + 1e-4)))[1]
        assert lo > 0 > hi

    def test_continuity_of_k_mu_branch(self):
        tp = turing_point(0.45, 500.0, (1.0, 5.0))
        step = 0.01
        a_values = np.arange(0.91, tp.a_T, step)
        ks = [most_unstable_mode(linearize(default_params(a)))[0] for a in a_values]
        jumps = np.abs(np.diff(ks))
        assert jumps.max() < 10 * step


class TestTuringPoint:
    def test_root_quality(self):
        tp = turing_point(0.45, 500.0, (1.0, 5.0))
        lam = most_unstable_mode(linearize(default_params(tp.a_T)))[1]
        assert abs(lam) < 1e-10
        assert tp.k_T > 0

    def test_max_growth_rate_vanishes_at_a_T(self):
        tp = turing_point(0.45, 500.0, (1.0, 5.0))
        lin = linearize(default_params(tp.a_T))
        ks = np.linspace(0.0, 1.0, 20001)
        top = max(dispersion_eigenvalues(k, lin)[0].real for k in ks)
        assert abs(top) < 1e-8

    def test_bad_bracket_reports_endpoint_values(self):
        with pytest.raises(ValueError, match="lambda_mu"):
            turing_point(0.45, 500.0, (1.0, 1.5))


class TestBandAndConversion:
    def test_integer_conversion(self):
        # wavelength 2pi/k; pulses = 2L/wavelength
        assert integer_wavenumber(2 * np.pi / 50.0, 250.0) == pytest.approx(10.0)

    def test_unstable_band_brackets_k_mu(self):
        lin = linearize(default_params(2.0))
        k_mu, lam_mu = most_unstable_mode(lin)
        lo, hi = unstable_band(lin)
        assert lo < k_mu < hi and lam_mu > 0
        # boundary: growth rate ~ 0 there
        for edge in (lo, hi):
            assert abs(dispersion_eigenvalues(edge, lin)[0].real) < 1e-8
