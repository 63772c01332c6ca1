import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anfdoa.doa import (
    ArrayConfig,
    CaponSpectrum,
    CovMatrix,
    capon_spectrum,
    default_grid,
    peak_angle,
    sample_cov,
    steering,
)

CFG = ArrayConfig()


def solve_gauss(a, b):
    """Plain Gaussian elimination with partial pivoting (complex)."""
    a = [list(map(complex, row)) + [complex(v)] for row, v in zip(a, b)]
    n = len(a)
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(a[r][c]))
        a[c], a[p] = a[p], a[c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            for k in range(c, n + 1):
                a[r][k] -= f * a[c][k]
    x = [0j] * n
    for r in reversed(range(n)):
        x[r] = (a[r][n] - sum(a[r][k] * x[k] for k in range(r + 1, n))) / a[r][r]
    return x


def capon_reference(r, angles, d_over_lambda=0.5):
    out = []
    m = np.arange(r.shape[0])
    for th in angles:
        a = np.exp(2j * np.pi * d_over_lambda * m * np.sin(np.deg2rad(th)))
        x = solve_gauss(r, a)
        out.append(1.0 / np.real(np.vdot(a, x)))
    return np.array(out)


def plane_wave(theta, n=256, seed=0, M=2):
    rng = np.random.default_rng(seed)
    s = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return np.outer(steering(theta, ArrayConfig(M)), s)


class TestSteering:
    def test_broadside(self):
        np.testing.assert_allclose(steering(0.0, CFG), [1, 1])

    def test_endfire(self):
        np.testing.assert_allclose(steering(90.0, CFG), [1, -1], atol=1e-15)

    def test_thirty(self):
        np.testing.assert_allclose(steering(30.0, CFG), [1, 1j], atol=1e-15)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            steering(91.0, CFG)


class TestCov:
    def test_zero_input_uses_absolute_loading(self):
        c = sample_cov(np.zeros((2, 16)), 1e-6)
        np.testing.assert_array_equal(c.r, 1e-6 * np.eye(2))
        assert c.loading == 1e-6

    def test_relative_loading(self):
        x = np.ones((2, 4), complex) * 2
        c = sample_cov(x, 1e-3)
        assert c.loading == pytest.approx(1e-3 * 4.0)

    def test_principal_eigvec_is_steering(self):
        x = plane_wave(40.0)
        w, v = np.linalg.eigh(sample_cov(x).r)
        a = steering(40.0, CFG)
        cos = abs(np.vdot(v[:, -1], a)) / np.linalg.norm(a)
        assert cos == pytest.approx(1.0, abs=1e-9)

    def test_hermitian(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 30)) + 1j * rng.normal(size=(3, 30))
        r = sample_cov(x).r
        assert r[0, 1] == np.conj(r[1, 0])
        np.testing.assert_array_equal(r, r.conj().T)


class TestCapon:
    def test_identity_flat(self):
        p = capon_spectrum(CovMatrix(np.eye(2, dtype=complex), 0.0), CFG).power
        np.testing.assert_allclose(p, 0.5, rtol=1e-14)

    def test_plane_wave_at_23(self):
        rng = np.random.default_rng(7)
        x = plane_wave(23.0, 512) + 0.1 / np.sqrt(2) * (rng.normal(size=(2, 512)) + 1j * rng.normal(size=(2, 512)))
        assert abs(peak_angle(capon_spectrum(sample_cov(x), CFG)) - 23.0) <= 0.5

    def test_scaling(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 40)) + 1j * rng.normal(size=(2, 40))
        c = sample_cov(x)
        s1 = capon_spectrum(c, CFG)
        s2 = capon_spectrum(CovMatrix(7.5 * c.r, c.loading), CFG)
        np.testing.assert_allclose(s2.power, 7.5 * s1.power, rtol=1e-12)
        assert peak_angle(s1) == peak_angle(s2)

    def test_singular_reports_condition(self):
        r = np.array([[1, 1], [1, 1]], dtype=complex)
        with pytest.raises(np.linalg.LinAlgError, match="condition"):
            capon_spectrum(CovMatrix(r, 0.0), CFG)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            capon_spectrum(CovMatrix(np.eye(3), 0.0), CFG)

    def test_generic_path_matches_gauss(self):
        rng = np.random.default_rng(11)
        cfg = ArrayConfig(4, 0.5, default_grid(2.0))
        x = rng.normal(size=(4, 50)) + 1j * rng.normal(size=(4, 50))
        c = sample_cov(x)
        got = capon_spectrum(c, cfg).power
        np.testing.assert_allclose(got, capon_reference(c.r, cfg.grid_deg), rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 0.5))
def test_closed_form_matches_elimination(seed, dl):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    r = a @ a.conj().T + 1e-3 * np.eye(2)
    cfg = ArrayConfig(2, dl, default_grid(1.0))
    got = capon_spectrum(CovMatrix(r, 1e-3), cfg).power
    np.testing.assert_allclose(got, capon_reference(r, cfg.grid_deg, dl), rtol=1e-10)
    assert np.all(got > 0)


class TestPeak:
    def test_flat_takes_smallest_angle(self):
        spec = CaponSpectrum(default_grid(), np.ones(361))
        assert peak_angle(spec) == -90.0

    def test_single_peak(self):
        g = default_grid()
        assert peak_angle(CaponSpectrum(g, np.exp(-((g - 12.5) ** 2)))) == 12.5

    def test_empty(self):
        with pytest.raises(ValueError):
            peak_angle(CaponSpectrum(np.array([]), np.array([])))

    def test_round_trip_every_grid_angle(self):
        for theta in default_grid():
            if not -80.0 < theta < 80.0:
                continue
            est = peak_angle(capon_spectrum(sample_cov(plane_wave(theta, 64)), CFG))
            assert abs(est - theta) <= 0.5, theta


class TestArrayConfig:
    @pytest.mark.parametrize("kw", [dict(M=0), dict(d_over_lambda=0.6), dict(grid_deg=np.array([1.0, 0.0])), dict(grid_deg=np.array([-95.0, 0.0]))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ArrayConfig(**kw)

    def test_grid(self):
        g = default_grid()
        assert g[0] == -90 and g[-1] == 90 and g.size == 361
        assert CFG.grid_step == pytest.approx(0.5)
