import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hafit.noise_suppression import (
    NOISE_FLOOR,
    WienerConfig,
    estimate_noise_psd,
    wiener_enhance,
    wiener_gains,
)
from hafit.objective import spec_loss
from hafit.signal_core import SAMPLE_RATE, rms, stft
from hafit.synthetic import mix, noise


def projection_snr(clean, degraded):
    # residual after removing the least-squares scaled clean component
    a = np.dot(degraded, clean) / np.dot(clean, clean)
    return 10 * np.log10(np.sum(clean**2) / np.sum((degraded - a * clean) ** 2))


class TestWienerConfig:
    @pytest.mark.parametrize("beta", [0.0, 1.0, 1.5])
    def test_beta_range(self, beta):
        with pytest.raises(ValueError):
            WienerConfig(beta=beta)

    def test_floor_below_zero(self):
        with pytest.raises(ValueError):
            WienerConfig(gain_floor_db=0.0)

    def test_defaults(self):
        cfg = WienerConfig()
        assert (cfg.beta, cfg.gain_floor_db, cfg.noise_init_s) == (0.98, -18.0, 0.12)
        assert cfg.gain_floor == pytest.approx(10 ** (-18 / 20))


# ---------------------------------------------------------------------------
# Noise estimation
# ---------------------------------------------------------------------------


class TestNoiseEstimate:
    def test_white_noise_is_flat(self):
        x = 0.01 * noise("white", SAMPLE_RATE, seed=2)
        s = stft(x, WienerConfig().stft_config)
        est = estimate_noise_psd(s)[-1][5:-5]
        periodogram = np.mean(np.abs(s.frames[2:-2]) ** 2, axis=0)[5:-5]
        ratio_db = 10 * np.log10(est / periodogram)
        # smoothed over bins the estimate follows the flat periodogram
        smooth = 10 * np.log10(np.convolve(est, np.ones(32) / 32, "valid") / periodogram.mean())
        assert np.max(np.abs(smooth)) < 3.0
        assert np.median(np.abs(ratio_db)) < 3.0

    def test_tone_does_not_drag_noise_up(self):
        cfg = WienerConfig()
        n = SAMPLE_RATE
        x = 1e-4 * noise("white", n, seed=4)
        start = int(0.2 * SAMPLE_RATE)
        t = np.arange(n - start) / SAMPLE_RATE
        x[start:] += 0.1 * np.sin(2 * np.pi * 1000 * t)
        s = stft(x, cfg.stft_config)
        est = estimate_noise_psd(s, cfg)
        k = int(round(1000 / (SAMPLE_RATE / cfg.frame_len)))
        init = est[0, k - 1 : k + 2]
        assert np.all(np.abs(10 * np.log10(est[-1, k - 1 : k + 2] / init)) < 6.0)

    def test_zero_signal_positive(self):
        est = estimate_noise_psd(stft(np.zeros(SAMPLE_RATE // 2)))
        assert np.all(est >= NOISE_FLOOR)

    def test_too_short(self):
        with pytest.raises(ValueError):
            estimate_noise_psd(stft(np.zeros(1000)))

    def test_shape(self, speech):
        s = stft(speech)
        assert estimate_noise_psd(s).shape == s.frames.shape


# ---------------------------------------------------------------------------
# Enhancement
# ---------------------------------------------------------------------------


class TestWienerEnhance:
    def test_clean_transparency(self, speech_2s):
        y = wiener_enhance(speech_2s)
        assert abs(20 * np.log10(rms(y) / rms(speech_2s))) < 1.0
        assert spec_loss(y, speech_2s) < spec_loss(0.5 * speech_2s, speech_2s)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_white_noise_snr_improves(self, seed, speech_2s):
        noisy = mix(speech_2s, noise("white", len(speech_2s), seed=seed), 5.0)
        before = projection_snr(speech_2s, noisy)
        after = projection_snr(speech_2s, wiener_enhance(noisy))
        assert before == pytest.approx(5.0, abs=0.1)
        assert after - before >= 3.0

    def test_stationary_noise_removed(self):
        x = 0.01 * noise("white", 2 * SAMPLE_RATE, seed=6)
        y = wiener_enhance(x)
        mid = slice(SAMPLE_RATE // 2, -SAMPLE_RATE // 4)
        assert 20 * np.log10(rms(y[mid]) / rms(x[mid])) <= -10.0

    def test_length(self, speech):
        assert wiener_enhance(speech).shape == speech.shape

    def test_never_louder(self, speech_2s):
        noisy = mix(speech_2s, noise("traffic", len(speech_2s), seed=3), 0.0)
        assert 20 * np.log10(rms(wiener_enhance(noisy)) / rms(noisy)) < 1.0

    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 1000), st.floats(-5, 20))
    def test_gain_at_most_one(self, seed, snr_db):
        from hafit.synthetic import speech_like

        clean = speech_like(1.0, seed=seed)
        noisy = mix(clean, noise("white", len(clean), seed=seed + 1), snr_db)
        s = stft(noisy)
        g = wiener_gains(s, estimate_noise_psd(s))
        assert np.all(g <= 1.0 + 1e-6)
        assert np.all(g >= WienerConfig().gain_floor - 1e-12)
