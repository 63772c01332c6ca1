import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anfdoa.anf import (
    AnfParams,
    NotchState,
    anf_run,
    anf_step,
    clip_freq,
    ema_power,
    initial_state,
    nlms_gradient,
    nlms_update,
    notch_response,
    notch_step,
)

PARAMS = AnfParams()


def _cost(omega, x, x_r_prev, k_a):
    # |y|^2 written out from scratch: y = x + k_a z x_r - z x_r
    z = cmath.exp(1j * omega)
    y = x + k_a * z * x_r_prev - z * x_r_prev
    return abs(y) ** 2


def fft_peak_freq(x, nfft=8192):
    """Normalised frequency (cycles/sample) of the FFT magnitude peak."""
    spec = np.abs(np.fft.fft(x, nfft))
    return float(np.fft.fftfreq(nfft)[np.argmax(spec)])


class TestNotchStep:
    def test_first_sample(self):
        y, s = notch_step(NotchState(0.0), 1 + 0j, PARAMS)
        assert y == 1 + 0j
        assert s.x_r_prev == 1 + 0j

    def test_second_sample(self):
        _, s = notch_step(NotchState(0.0), 1 + 0j, PARAMS)
        y, s = notch_step(s, 1 + 0j, PARAMS)
        assert s.x_r_prev == pytest.approx(1.7 + 0j, abs=1e-15)
        assert y == pytest.approx(0.7 + 0j, abs=1e-15)

    def test_constant_input_is_notched_at_dc(self):
        s = NotchState(0.0)
        for _ in range(200):
            y, s = notch_step(s, 1 + 0j, PARAMS)
        assert abs(y) < 1e-20

    def test_frozen_notch_suppresses_tone_120db(self):
        omega = 0.9
        n = np.arange(600)
        x = np.exp(1j * omega * n)
        s = NotchState(omega)
        out = []
        for xn in x:
            y, s = notch_step(s, xn, PARAMS)
            out.append(y)
        tail = np.asarray(out[-200:])
        # 10x the time constant is ~33 samples; the tail is far past it.
        ratio_db = 10 * np.log10(np.mean(np.abs(tail) ** 2) / np.mean(np.abs(x[-200:]) ** 2))
        assert ratio_db <= -120.0

    def test_far_band_gain_matches_closed_form(self):
        omega = 0.4
        w_tone = omega - math.pi
        n = np.arange(400)
        s = NotchState(omega)
        ys = []
        for xn in np.exp(1j * w_tone * n):
            y, s = notch_step(s, xn, PARAMS)
            ys.append(y)
        measured = np.sqrt(np.mean(np.abs(ys[-200:]) ** 2))
        expected = abs((1 - np.exp(1j * omega) * np.exp(-1j * w_tone)) / (1 - 0.7 * np.exp(1j * omega) * np.exp(-1j * w_tone)))
        assert measured == pytest.approx(expected, rel=0.2)
        assert abs(notch_response(w_tone, omega, 0.7)) == pytest.approx(expected, rel=1e-12)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            notch_step(NotchState(0.0), complex(float("nan"), 0), PARAMS)


class TestEma:
    def test_one_step(self):
        assert ema_power(1.0, 2 + 0j, 0.01, 1e-12) == pytest.approx(1.03, abs=1e-15)

    def test_decay(self):
        assert ema_power(5.0, 0j, 0.01, 1e-300) == pytest.approx(4.95, abs=1e-15)

    def test_floor_binds(self):
        assert ema_power(1e-12, 0j, 0.01, 1e-12) == 1e-12

    def test_rejects_inf(self):
        with pytest.raises(ValueError):
            ema_power(1.0, complex(math.inf, 0), 0.01, 1e-12)


class TestClip:
    @pytest.mark.parametrize("value, expected", [(3.5, math.pi), (-4.0, -math.pi), (0.1, 0.1), (math.pi, math.pi)])
    def test_examples(self, value, expected):
        assert clip_freq(value) == expected

    def test_clamp_not_wrap(self):
        assert clip_freq(2 * math.pi + 0.1) == math.pi

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            clip_freq(bad)


class TestNlms:
    def test_zero_error_leaves_omega(self):
        s = NotchState(0.3, 0.5 + 0.2j, 1.0)
        assert nlms_update(s, 0j, PARAMS).omega == 0.3

    def test_zero_state_leaves_omega(self):
        s = NotchState(0.3, 0j, 1.0)
        assert nlms_update(s, 1 + 1j, PARAMS).omega == 0.3

    def test_update_moves_toward_tone(self):
        # notch starts slightly below the tone and is pulled onto it
        w = 0.5
        s = initial_state(1 + 0j, w - 0.05, PARAMS)
        for n in range(50):
            _, s = anf_step(s, cmath.exp(1j * w * n), PARAMS)
        assert abs(s.omega - w) < 0.05

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(2024)
        h = 1e-6
        worst = 0.0
        for _ in range(1000):
            k_a = rng.uniform(0.05, 0.95)
            omega = rng.uniform(-math.pi, math.pi)
            x = complex(*rng.normal(size=2))
            xr = complex(*rng.normal(size=2))
            zx = cmath.exp(1j * omega) * xr
            y = x + k_a * zx - zx
            fd = (_cost(omega + h, x, xr, k_a) - _cost(omega - h, x, xr, k_a)) / (2 * h)
            # d|y|^2/domega = -2 (1 - k_a) G
            g = -fd / (2 * (1 - k_a))
            an = nlms_gradient(y, omega, xr)
            scale = max(abs(an), abs(y) * abs(zx))
            worst = max(worst, abs(an - g) / scale)
        assert worst <= 1e-6


class TestAnfRun:
    def test_tone_converges(self):
        n = np.arange(512)
        x = np.exp(2j * np.pi * 0.1 * n)
        _, trace = anf_run(x, PARAMS, 0.0)
        assert abs(trace[-1] / (2 * np.pi) - fft_peak_freq(x)) < 0.02

    def test_zeros(self):
        y, trace = anf_run(np.zeros(64, complex), PARAMS, 0.7)
        assert np.all(trace == 0.7)
        assert np.all(y == 0)

    def test_tone_at_start_is_removed(self):
        w = 2 * np.pi * 0.13
        x = np.exp(1j * w * np.arange(512))
        y, _ = anf_run(x, PARAMS, w)
        assert np.sum(np.abs(y[-256:]) ** 2) < 1e-3 * np.sum(np.abs(x[-256:]) ** 2)

    def test_matches_step_api_bit_for_bit(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=2000) + 1j * rng.normal(size=2000) + 3 * np.exp(0.7j * np.arange(2000))
        y_run, tr_run, p_run = anf_run(x, PARAMS, -1.0, with_power=True)
        s = initial_state(x[0], -1.0, PARAMS)
        for i, xn in enumerate(x):
            y, s = anf_step(s, xn, PARAMS)
            assert y == y_run[i]
            assert s.omega == tr_run[i]
            assert s.p_hat == p_run[i]

    def test_invariants_over_long_fuzz(self):
        rng = np.random.default_rng(99)
        n = 1_000_000
        x = rng.standard_normal(n) * np.exp(rng.uniform(-12, 6, n)) + 1j * rng.standard_normal(n)
        x[rng.integers(0, n, 5000)] = 0
        params = AnfParams(k_a=0.5, mu=1.0, alpha=0.2, p_floor=1e-9)
        _, trace, power = anf_run(x, params, 3.0, with_power=True)
        assert np.all(np.isfinite(trace)) and np.all(np.abs(trace) <= np.pi)
        assert np.all(np.isfinite(power)) and np.all(power >= params.p_floor)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            anf_run([], PARAMS)
        with pytest.raises(ValueError):
            anf_run([1, np.nan], PARAMS)
        with pytest.raises(ValueError):
            anf_run([1, 2], PARAMS, omega0=4.0)


@settings(max_examples=60, deadline=None)
@given(
    k_a=st.floats(0.05, 0.95),
    mu=st.floats(1e-3, 2.0),
    omega0=st.floats(-math.pi, math.pi),
    seed=st.integers(0, 2**32 - 1),
)
def test_trace_stays_in_band(k_a, mu, omega0, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=300) + 1j * rng.normal(size=300)
    _, trace = anf_run(x, AnfParams(k_a=k_a, mu=mu), omega0)
    assert np.all(np.abs(trace) <= math.pi)


@pytest.mark.parametrize("kw", [dict(k_a=1.0), dict(k_a=0.0), dict(mu=0.0), dict(alpha=0.0), dict(alpha=1.5), dict(p_floor=0.0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        AnfParams(**kw)
