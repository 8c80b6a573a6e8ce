import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hafit.objective import (
    SPEC_LOSS_FLOOR_DB,
    LossBreakdown,
    combine,
    spec_loss,
    spl_loss,
    total_loss,
    total_loss_jvp,
)
from hafit.signal_core import DEFAULT_CALIBRATION, HANN_STFT


def mean_abs_stft(x, window_len=1024, hop=256):
    """Loop-based centred Hann STFT, written independently of signal_core."""
    n = len(x)
    count = 1 + int(np.ceil(n / hop))
    padded = np.zeros((count - 1) * hop + window_len)
    padded[window_len // 2 : window_len // 2 + n] = x
    k = np.arange(window_len)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * k / window_len)
    total = 0.0
    for m in range(count):
        seg = padded[m * hop : m * hop + window_len] * win
        total += np.abs(np.fft.rfft(seg)).sum()
    return total / (count * (window_len // 2 + 1))


# ---------------------------------------------------------------------------
# Spectrogram loss
# ---------------------------------------------------------------------------


class TestSpecLoss:
    def test_identical_is_floored(self, speech):
        assert spec_loss(speech, speech) == SPEC_LOSS_FLOOR_DB

    def test_double_against_oracle(self, speech):
        y = speech[:20000]
        assert spec_loss(2 * y, y) == pytest.approx(20 * np.log10(mean_abs_stft(y)), abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            spec_loss(np.zeros(100), np.zeros(101))

    def test_default_config_is_hann_1024_256(self):
        assert (HANN_STFT.window_len, HANN_STFT.hop, HANN_STFT.window_kind) == (1024, 256, "hann")

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_homogeneous(self, a):
        rng = np.random.default_rng(0)
        y_p, y_r = rng.standard_normal((2, 3000))
        assert spec_loss(a * y_p, a * y_r) == pytest.approx(spec_loss(y_p, y_r) + 20 * np.log10(a), abs=1e-9)

    def test_not_symmetric_in_general_but_here_equal(self, rng):
        # |Yp - Yr| is symmetric, so spec_loss itself is; the combined loss is not
        y_p, y_r = rng.standard_normal((2, 2000))
        assert spec_loss(y_p, y_r) == pytest.approx(spec_loss(y_r, y_p))


# ---------------------------------------------------------------------------
# Level loss and combination
# ---------------------------------------------------------------------------


class TestSplLoss:
    def test_equal_level_absent(self, speech):
        assert spl_loss(speech, -speech) is None

    def test_quieter_absent(self, speech):
        assert spl_loss(0.5 * speech, speech) is None

    def test_hand_value(self):
        # rms 2 vs rms 1: 20 log10(1) = 0
        t = np.arange(4410) / 44100
        ref = np.sqrt(2) * np.sin(2 * np.pi * 1000 * t)
        assert spl_loss(2 * ref, ref) == pytest.approx(0.0, abs=1e-9)

    def test_excess_of_ten(self):
        assert spl_loss(np.full(10, 11.0), np.full(10, 1.0)) == pytest.approx(20.0)


class TestCombine:
    def test_penalty_applied(self):
        assert combine(-40.0, 2.0, 5.0).total == -30.0

    def test_absent_penalty(self):
        loss = combine(-40.0, None, 5.0)
        assert loss.total == -40.0
        assert not loss.spl_applied

    def test_negative_penalty_not_applied(self):
        loss = combine(-40.0, -3.0, 5.0)
        assert loss.total == -40.0
        assert loss.l_spl == -3.0
        assert not loss.spl_applied

    def test_zero_penalty_applied(self):
        assert combine(-40.0, 0.0, 5.0).spl_applied

    @settings(max_examples=50)
    @given(st.floats(-100, 100), st.one_of(st.none(), st.floats(-50, 50)), st.floats(0, 10))
    def test_branch_rule(self, l_spec, l_spl, alpha):
        loss = combine(l_spec, l_spl, alpha)
        if l_spl is not None and l_spl >= 0:
            assert loss.total == pytest.approx(l_spec + alpha * l_spl)
        else:
            assert loss.total == l_spec

    def test_alpha_linear(self, speech):
        # losses are taken in calibrated units, where the penalty can fire
        ref = speech / DEFAULT_CALIBRATION.ref_rms
        louder = 3 * ref
        a0, a5 = total_loss(louder, ref, 0.0), total_loss(louder, ref, 5.0)
        assert a5.spl_applied
        assert a5.total - a0.total == pytest.approx(5 * a5.l_spl)

    def test_asymmetric(self, speech):
        ref = speech / DEFAULT_CALIBRATION.ref_rms
        assert total_loss(3 * ref, ref).total != total_loss(ref, 3 * ref).total

    def test_breakdown_type(self, speech):
        assert isinstance(total_loss(speech, 0.5 * speech), LossBreakdown)


# ---------------------------------------------------------------------------
# Directional derivative
# ---------------------------------------------------------------------------


class TestLossJvp:
    @pytest.mark.parametrize("scale", [0.5, 3.0])
    def test_matches_finite_difference(self, scale, speech, rng):
        y_r = speech[10000:20000] / DEFAULT_CALIBRATION.ref_rms
        y_p = scale * y_r + 0.01 * rng.standard_normal(y_r.shape) * np.std(y_r)
        # one radial direction (large slope), one random (small slope)
        d = np.stack([y_p, rng.standard_normal(len(y_r)) * np.std(y_r)])
        loss, grad = total_loss_jvp(y_p, d, y_r)
        assert loss.total == pytest.approx(total_loss(y_p, y_r).total)
        assert loss.spl_applied == (scale > 1)
        # near-empty difference cells curve the loss; a tiny step is needed
        h = 1e-7
        for i in range(2):
            fd = (total_loss(y_p + h * d[i], y_r).total - total_loss(y_p - h * d[i], y_r).total) / (2 * h)
            assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-6)

    def test_floor_has_zero_gradient(self, speech):
        _, grad = total_loss_jvp(speech, np.ones((1, len(speech))), speech)
        np.testing.assert_array_equal(grad, 0.0)
