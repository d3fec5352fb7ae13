"""Channel physics and differentiability tests."""

import numpy as np
import pytest

from imdd_ae import autodiff as ad
from imdd_ae import channel as ch
from imdd_ae.autodiff import Tensor
from imdd_ae.baselines import pam2_modulate
from imdd_ae.channel import ChannelConfig, NoiseDraw, Waveform


def naive_dft(x):
    """O(N^2) DFT matrix product, independent of np.fft."""
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def tone(freq_ghz, n=336, fs=336.0):
    t = np.arange(n) / fs
    return np.cos(2 * np.pi * freq_ghz * t)


CFG = ChannelConfig(length_km=20.0)


class TestBrickwallLpf:
    def test_passband_tone_unchanged(self):
        w = Waveform(tone(10.0), 336.0)
        out = ch.brickwall_lpf(w, 32.0)
        np.testing.assert_allclose(out.samples, w.samples, atol=1e-12)

    def test_stopband_tone_annihilated(self):
        w = Waveform(tone(40.0), 336.0)
        out = ch.brickwall_lpf(w, 32.0)
        np.testing.assert_allclose(out.samples, 0.0, atol=1e-12)

    def test_masked_spectrum_oracle(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=96)
        out = ch.brickwall_lpf(Waveform(x, 336.0), 32.0).samples
        f = np.fft.fftfreq(96, d=1 / 336.0)
        expected_spectrum = naive_dft(x) * (np.abs(f) <= 32.0)
        np.testing.assert_allclose(naive_dft(out), expected_spectrum,
                                   atol=1e-9)

    def test_idempotent(self):
        rng = np.random.default_rng(21)
        x = Waveform(rng.normal(size=128), 336.0)
        once = ch.brickwall_lpf(x, 32.0)
        twice = ch.brickwall_lpf(once, 32.0)
        np.testing.assert_allclose(np.fft.fft(twice.samples),
                                   np.fft.fft(once.samples), atol=1e-12)

    def test_cutoff_at_or_above_nyquist_rejected(self):
        w = Waveform(np.zeros(64), 336.0)
        with pytest.raises(ValueError):
            ch.brickwall_lpf(w, 168.0)


class TestQuantizationNoise:
    def test_variance_matches_closed_form(self):
        delta = (np.pi / 4) / 2**6
        u = NoiseDraw(100).uniform("dac", 10**7, delta)
        assert abs(u.var() / (delta**2 / 12) - 1) < 0.01
        assert abs(u.mean()) < 1e-4
        assert u.min() >= -delta / 2 and u.max() < delta / 2

    def test_disabled_stage_is_identity(self):
        cfg = ChannelConfig(length_km=0.0).noiseless()
        x0 = 0.3
        w = Waveform(np.full(96, x0), cfg.sample_rate_gsa_s)
        out = ch.channel_forward(w, cfg, NoiseDraw(0))
        np.testing.assert_allclose(out.samples, np.sin(x0) ** 2, atol=1e-12)

    def test_same_draw_is_deterministic(self):
        w = Waveform(np.linspace(0, 0.5, 64), 336.0)
        a = ch.add_quantization_noise(w, 6, NoiseDraw(7))
        b = ch.add_quantization_noise(w, 6, NoiseDraw(7))
        np.testing.assert_array_equal(a.samples, b.samples)


class TestMzm:
    def test_fixed_points(self):
        w = Waveform(np.array([0.0, np.pi / 4]), 336.0)
        out = ch.mzm(w)
        assert out.domain == "optical"
        np.testing.assert_allclose(out.samples,
                                   [0.0, np.sqrt(2) / 2], atol=1e-15)

    def test_derivative_is_cosine(self):
        rng = np.random.default_rng(22)
        x = rng.uniform(0, np.pi / 4, size=32)
        w = rng.normal(size=32)
        t = Tensor(x, requires_grad=True)
        e = ch.mzm_t(t)
        e.backward(seed=w.astype(np.complex128))  # loss = sum w * Re(E)
        np.testing.assert_allclose(t.grad, w * np.cos(x), rtol=1e-12)

        h = 1e-6
        fd = (np.sin(x + h) - np.sin(x - h)) / (2 * h)
        np.testing.assert_allclose(t.grad / w, fd, rtol=1e-8)


class TestFiber:
    def test_zero_length_identity(self):
        rng = np.random.default_rng(23)
        e = Waveform(rng.normal(size=128) + 1j * rng.normal(size=128),
                     336.0, "optical")
        out = ch.fiber_propagate(e, ChannelConfig(length_km=0.0))
        np.testing.assert_array_equal(out.samples, e.samples)

    def test_lossless_fiber_conserves_energy(self):
        cfg = ChannelConfig(length_km=80.0, attenuation_db_km=0.0)
        rng = np.random.default_rng(24)
        e = Waveform(rng.normal(size=256) + 1j * rng.normal(size=256),
                     336.0, "optical")
        out = ch.fiber_propagate(e, cfg)
        assert abs(out.energy() / e.energy() - 1) < 1e-9

    def test_response_magnitude_is_attenuation(self):
        cfg = ChannelConfig(length_km=35.0)
        h = ch._fiber_response(512, 336.0, cfg)
        amp = 10 ** (-0.2 * 35.0 / 20)
        np.testing.assert_allclose(np.abs(h), amp, rtol=1e-12)

    def test_beta2_conversion(self):
        cfg = ChannelConfig(length_km=1.0)
        # independent unit path: ps^2/km directly from engineering units
        oracle = -17.0 * 1550.0**2 * 1e3 / (2 * np.pi * 299792458.0)
        got = cfg.beta2_s2_per_m * 1e27
        np.testing.assert_allclose(got, oracle, rtol=1e-9)
        np.testing.assert_allclose(got, -21.6826194, rtol=1e-6)

    def test_length_additivity(self):
        cfg = ChannelConfig(length_km=0.0)
        rng = np.random.default_rng(25)
        e = Waveform(rng.normal(size=200) + 1j * rng.normal(size=200),
                     336.0, "optical")
        a = ch.fiber_propagate(ch.fiber_propagate(e, cfg, 12.0), cfg, 30.0)
        b = ch.fiber_propagate(e, cfg, 42.0)
        np.testing.assert_allclose(a.samples, b.samples, rtol=1e-9,
                                   atol=1e-12)

    def test_rejects_electrical_input(self):
        with pytest.raises(ValueError):
            ch.fiber_propagate(Waveform(np.zeros(8), 336.0), CFG)


class TestPhotodiode:
    def test_examples(self):
        z = Waveform(np.zeros(8, dtype=complex), 336.0, "optical")
        np.testing.assert_array_equal(ch.photodiode(z).samples, 0.0)
        const = Waveform(np.full(8, 0.4 * np.exp(1j * 0.7)), 336.0, "optical")
        np.testing.assert_allclose(ch.photodiode(const).samples, 0.16,
                                   rtol=1e-12)

    def test_abs_square_oracle_and_nonnegative(self):
        rng = np.random.default_rng(26)
        e = rng.normal(size=100) + 1j * rng.normal(size=100)
        out = ch.photodiode(Waveform(e, 336.0, "optical")).samples
        np.testing.assert_allclose(out, np.abs(e) ** 2, rtol=1e-12)
        assert np.all(out >= 0)


class TestChannelForward:
    def test_impulse_energy_bookkeeping(self):
        cfg = ChannelConfig(length_km=20.0).noiseless()
        drive = np.zeros(512)
        drive[250:262] = np.pi / 4  # impulse-like burst
        w = ch.brickwall_lpf(Waveform(drive, cfg.sample_rate_gsa_s),
                             cfg.lpf_cutoff_ghz)
        e = ch.mzm(w)
        out = ch.fiber_propagate(e, cfg)
        pd_in = ch.photodiode(e).samples
        pd_out = ch.photodiode(out).samples
        scale = 10 ** (-2 * 0.2 * 20.0 / 20)
        assert abs(pd_out.sum() / (scale * pd_in.sum()) - 1) < 1e-9
        # dispersion spreads the pulse: lower peak, wider support
        assert pd_out.max() < scale * pd_in.max()

    def test_gradient_matches_finite_differences(self):
        cfg = ChannelConfig(length_km=20.0)
        rng = np.random.default_rng(27)
        x = rng.uniform(0.1, 0.6, size=48)
        w = rng.normal(size=48)
        noise = NoiseDraw(5)

        def loss_value(arr):
            y = ch.channel_forward(Waveform(arr, cfg.sample_rate_gsa_s),
                                   cfg, noise).samples
            return float(np.sum(w * y * y))

        t = Tensor(x.copy(), requires_grad=True)
        y = ch.channel_forward_t(t, cfg, noise)
        ad.dot(ad.mul(y, y), w).backward()

        h = 1e-5
        fd = np.zeros(48)
        for i in range(48):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (loss_value(xp) - loss_value(xm)) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(t.grad)), 1e-6)
        assert np.max(np.abs(t.grad - fd) / denom) < 1e-4

    def test_deterministic_under_frozen_noise(self):
        cfg = ChannelConfig(length_km=20.0)
        rng = np.random.default_rng(28)
        x = Waveform(rng.uniform(0, 0.7, size=96), cfg.sample_rate_gsa_s)
        a = ch.channel_forward(x, cfg, NoiseDraw(9)).samples
        b = ch.channel_forward(x, cfg, NoiseDraw(9)).samples
        np.testing.assert_array_equal(a, b)

    def test_graph_and_array_paths_agree(self):
        cfg = ChannelConfig(length_km=20.0)
        rng = np.random.default_rng(29)
        x = rng.uniform(0, 0.7, size=96)
        noise = NoiseDraw(11)
        a = ch.channel_forward(Waveform(x, cfg.sample_rate_gsa_s),
                               cfg, noise).samples
        b = ch.channel_forward_t(Tensor(x), cfg, noise).values
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ch.channel_forward(Waveform(np.zeros(16), 84.0), CFG, NoiseDraw(0))


class TestReceiverNoise:
    def test_variance(self):
        var = 2.455e-4
        g = NoiseDraw(200).normal("receiver", 10**7, np.sqrt(var))
        assert abs(g.var() / var - 1) < 0.01

    def test_zero_variance_identity(self):
        w = Waveform(np.linspace(0, 1, 32), 336.0)
        out = ch.add_receiver_noise(w, 0.0, NoiseDraw(1))
        np.testing.assert_array_equal(out.samples, w.samples)

    def test_negative_variance_rejected(self):
        w = Waveform(np.zeros(8), 336.0)
        with pytest.raises(ValueError):
            ch.add_receiver_noise(w, -1e-3, NoiseDraw(0))


class TestSnrBudget:
    def test_back_to_back_snr_matches_analytic_budget(self):
        """Measured output noise power vs the sigma_r2 + quantization budget.

        Receiver noise is shaped by the Rx LPF (fraction rho of the band),
        DAC noise reaches the output through the modulator/detector
        linearization sin(x+u)^2 ~ sin(x)^2 + u sin(2x) and the same LPF;
        ADC noise enters after the LPF at full strength.
        """
        cfg = ChannelConfig(length_km=0.0)
        rng_bits = np.random.default_rng(30)
        bits = rng_bits.integers(0, 2, size=1024)
        wave = pam2_modulate(bits, 8, cfg.sample_rate_gsa_s)
        clean = ch.channel_forward(wave, cfg.noiseless(), NoiseDraw(0)).samples

        n = wave.samples.size
        mask = ch._cached_mask(n, cfg.sample_rate_gsa_s, cfg.lpf_cutoff_ghz)
        rho = mask.sum() / n
        drive = ch.brickwall_lpf(wave, cfg.lpf_cutoff_ghz).samples
        delta2_12 = cfg.quantization_step**2 / 12
        analytic = (rho * (cfg.receiver_noise_var
                           + np.mean(np.sin(2 * drive) ** 2) * delta2_12)
                    + delta2_12)

        acc = 0.0
        reps = 60
        for r in range(reps):
            out = ch.channel_forward(wave, cfg, NoiseDraw(1000 + r)).samples
            acc += np.mean((out - clean) ** 2)
        measured = acc / reps

        sig = np.mean(clean**2)
        snr_emp = 10 * np.log10(sig / measured)
        snr_ana = 10 * np.log10(sig / analytic)
        assert abs(snr_emp - snr_ana) < 0.5
