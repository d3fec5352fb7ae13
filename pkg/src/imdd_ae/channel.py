"""Differentiable simulation of an un-amplified IM/DD fiber link.

Stage order: Tx low-pass filter -> DAC quantization noise -> Mach-Zehnder
modulator -> dispersive/attenuating fiber -> square-law photodiode ->
receiver Gaussian noise -> Rx low-pass filter -> ADC quantization noise.

Every stage exists twice: as a plain-numpy function over waveform arrays
(used for Monte-Carlo evaluation, last axis = time) and as a graph op on
autodiff tensors (used for training). Both share the same filter cores.
Noise realizations are additive constants, so gradients pass through them
untouched; a frozen `NoiseDraw` makes a full forward pass bit-reproducible
for finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, make_op, lift

C_LIGHT = 299792458.0  # m/s


@dataclass
class ChannelConfig:
    """Physical and converter parameters, in the units of the config file."""

    length_km: float = 0.0
    dispersion_ps_nm_km: float = 17.0
    attenuation_db_km: float = 0.2
    wavelength_nm: float = 1550.0
    lpf_cutoff_ghz: float = 32.0
    dac_rate_gsa_s: float = 84.0
    oversampling: int = 4
    enob: int = 6
    receiver_noise_var: float = 2.455e-4
    dac_noise: bool = True
    adc_noise: bool = True
    receiver_noise: bool = True

    def __post_init__(self):
        if self.oversampling < 1:
            raise ValueError("oversampling factor must be >= 1")
        if self.length_km < 0:
            raise ValueError("fiber length must be >= 0")
        if self.receiver_noise_var < 0:
            raise ValueError("receiver noise variance must be >= 0")
        if self.lpf_cutoff_ghz > self.sample_rate_gsa_s / 2:
            raise ValueError("LPF cutoff must not exceed the simulation Nyquist")

    @property
    def sample_rate_gsa_s(self) -> float:
        return self.dac_rate_gsa_s * self.oversampling

    @property
    def beta2_s2_per_m(self) -> float:
        """Group-velocity dispersion from the engineering dispersion parameter."""
        d_si = self.dispersion_ps_nm_km * 1e-6  # ps/nm/km -> s/m^2
        lam = self.wavelength_nm * 1e-9
        return -d_si * lam**2 / (2.0 * np.pi * C_LIGHT)

    @property
    def quantization_step(self) -> float:
        """Converter LSB for a full scale equal to the Tx drive range [0, pi/4]."""
        return (np.pi / 4) / 2**self.enob

    def noiseless(self) -> "ChannelConfig":
        return replace(self, dac_noise=False, adc_noise=False, receiver_noise=False)


@dataclass
class Waveform:
    """A sampled signal plus the bookkeeping the channel stages validate."""

    samples: np.ndarray
    sample_rate_gsa_s: float
    domain: Literal["electrical", "optical"] = "electrical"

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        want = np.complex128 if self.domain == "optical" else np.float64
        if self.samples.dtype != want:
            self.samples = self.samples.astype(want)

    @property
    def nyquist_ghz(self) -> float:
        return self.sample_rate_gsa_s / 2

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


class NoiseDraw:
    """Deterministic per-stage noise streams for one channel traversal.

    The same (seed, stage) pair always reproduces the same realization,
    which is what freezes the noise during gradient checks. Training uses a
    fresh seed per optimization step.
    """

    _STAGES = {"dac": 0, "receiver": 1, "adc": 2}

    def __init__(self, seed: int):
        self.seed = int(seed)

    def _rng(self, stage: str) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed,
                                   spawn_key=(self._STAGES[stage],)))

    def uniform(self, stage: str, shape, width: float) -> np.ndarray:
        """Zero-mean uniform on [-width/2, width/2)."""
        return self._rng(stage).uniform(-width / 2, width / 2, size=shape)

    def normal(self, stage: str, shape, std: float) -> np.ndarray:
        return self._rng(stage).normal(0.0, std, size=shape)


# ------------------------------------------------------------- filter cores

def _lpf_mask(n: int, sample_rate_gsa_s: float, cutoff_ghz: float) -> np.ndarray:
    if cutoff_ghz >= sample_rate_gsa_s / 2:
        raise ValueError("LPF cutoff must be below Nyquist")
    f = np.fft.fftfreq(n, d=1.0 / sample_rate_gsa_s)  # GHz
    return (np.abs(f) <= cutoff_ghz).astype(np.float64)


def _fiber_response(n: int, sample_rate_gsa_s: float, cfg: ChannelConfig,
                    length_km: float | None = None) -> np.ndarray:
    """H(f) = 10^(-alpha L / 20) * exp(-j (beta2/2) (2 pi f)^2 L)."""
    length = cfg.length_km if length_km is None else length_km
    f_hz = np.fft.fftfreq(n, d=1.0 / (sample_rate_gsa_s * 1e9))
    amp = 10.0 ** (-cfg.attenuation_db_km * length / 20.0)
    phase = -(cfg.beta2_s2_per_m / 2.0) * (2.0 * np.pi * f_hz) ** 2 * (length * 1e3)
    return amp * np.exp(1j * phase)


_FILTER_CACHE: dict[tuple, np.ndarray] = {}


def _cached_mask(n, rate, cutoff):
    key = ("mask", n, rate, cutoff)
    if key not in _FILTER_CACHE:
        _FILTER_CACHE[key] = _lpf_mask(n, rate, cutoff)
    return _FILTER_CACHE[key]


def _cached_response(n, rate, cfg, length):
    key = ("fiber", n, rate, cfg.dispersion_ps_nm_km, cfg.attenuation_db_km,
           cfg.wavelength_nm, length)
    if key not in _FILTER_CACHE:
        _FILTER_CACHE[key] = _fiber_response(n, rate, cfg, length)
    return _FILTER_CACHE[key]


def _apply_real_mask(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(x, axis=-1) * mask, axis=-1).real


def _apply_response(e: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(e, axis=-1) * h, axis=-1)


# ------------------------------------------------------- waveform-array API

def brickwall_lpf(wave: Waveform, cutoff_ghz: float) -> Waveform:
    """Zero every spectral bin beyond the cutoff, pass the rest unchanged."""
    mask = _cached_mask(wave.samples.shape[-1], wave.sample_rate_gsa_s, cutoff_ghz)
    return Waveform(_apply_real_mask(wave.samples, mask),
                    wave.sample_rate_gsa_s, wave.domain)


def add_quantization_noise(wave: Waveform, enob: int, rng: NoiseDraw,
                           stage: str = "dac") -> Waveform:
    delta = (np.pi / 4) / 2**enob
    u = rng.uniform(stage, wave.samples.shape, delta)
    return Waveform(wave.samples + u, wave.sample_rate_gsa_s, wave.domain)


def mzm(wave: Waveform) -> Waveform:
    """Sinusoidal drive-to-field conversion; linear on drives in [0, pi/4]."""
    return Waveform(np.sin(wave.samples).astype(np.complex128),
                    wave.sample_rate_gsa_s, "optical")


def fiber_propagate(wave: Waveform, cfg: ChannelConfig,
                    length_km: float | None = None) -> Waveform:
    if wave.domain != "optical":
        raise ValueError("fiber input must be an optical-field waveform")
    length = cfg.length_km if length_km is None else length_km
    if length == 0:  # keep the zero-length link an exact identity
        return Waveform(wave.samples.copy(), wave.sample_rate_gsa_s, "optical")
    h = _cached_response(wave.samples.shape[-1], wave.sample_rate_gsa_s,
                         cfg, length)
    return Waveform(_apply_response(wave.samples, h), wave.sample_rate_gsa_s,
                    "optical")


def photodiode(wave: Waveform) -> Waveform:
    return Waveform(np.abs(wave.samples) ** 2, wave.sample_rate_gsa_s,
                    "electrical")


def add_receiver_noise(wave: Waveform, variance: float, rng: NoiseDraw) -> Waveform:
    if variance < 0:
        raise ValueError("noise variance must be >= 0")
    g = rng.normal("receiver", wave.samples.shape, np.sqrt(variance))
    return Waveform(wave.samples + g, wave.sample_rate_gsa_s, wave.domain)


def channel_forward(wave: Waveform, cfg: ChannelConfig, rng: NoiseDraw) -> Waveform:
    """Full link traversal on a waveform array (no gradient tape)."""
    if wave.sample_rate_gsa_s != cfg.sample_rate_gsa_s:
        raise ValueError("waveform rate does not match the simulation rate")
    w = brickwall_lpf(wave, cfg.lpf_cutoff_ghz)
    if cfg.dac_noise:
        w = add_quantization_noise(w, cfg.enob, rng, "dac")
    e = mzm(w)
    if cfg.length_km > 0:
        e = fiber_propagate(e, cfg)
    w = photodiode(e)
    if cfg.receiver_noise:
        w = add_receiver_noise(w, cfg.receiver_noise_var, rng)
    w = brickwall_lpf(w, cfg.lpf_cutoff_ghz)
    if cfg.adc_noise:
        w = add_quantization_noise(w, cfg.enob, rng, "adc")
    return w


# --------------------------------------------------------- graph (training)

def brickwall_lpf_t(x: Tensor, cfg: ChannelConfig) -> Tensor:
    """Graph LPF; the spectral mask is real and symmetric, so it is its own
    adjoint and the backward pass reapplies it to the gradient."""
    mask = _cached_mask(x.values.shape[-1], cfg.sample_rate_gsa_s,
                        cfg.lpf_cutoff_ghz)
    out = _apply_real_mask(x.values, mask)

    def backward(g):
        if x.requires_grad:
            x.ensure_grad()
            x.grad += _apply_real_mask(g, mask)

    return make_op(out, (x,), backward)


def mzm_t(x: Tensor) -> Tensor:
    cos_x = np.cos(x.values)
    out = np.sin(x.values).astype(np.complex128)

    def backward(g):
        if x.requires_grad:
            x.ensure_grad()
            x.grad += g.real * cos_x  # imaginary part of the field is constant 0

    return make_op(out, (x,), backward)


def fiber_propagate_t(e: Tensor, cfg: ChannelConfig) -> Tensor:
    h = _cached_response(e.values.shape[-1], cfg.sample_rate_gsa_s, cfg,
                         cfg.length_km)
    out = _apply_response(e.values, h)
    h_adj = np.conj(h)

    def backward(g):
        if e.requires_grad:
            e.ensure_grad()
            e.grad += _apply_response(g, h_adj)

    return make_op(out, (e,), backward)


def photodiode_t(e: Tensor) -> Tensor:
    ev = e.values
    out = ev.real**2 + ev.imag**2

    def backward(g):
        if e.requires_grad:
            e.ensure_grad()
            e.grad += 2.0 * ev * g

    return make_op(out, (e,), backward)


def channel_forward_t(x: Tensor, cfg: ChannelConfig, rng: NoiseDraw) -> Tensor:
    """Full link traversal on the training graph (noise enters as constants)."""
    shape = x.values.shape
    w = brickwall_lpf_t(x, cfg)
    if cfg.dac_noise:
        w = w + lift(rng.uniform("dac", shape, cfg.quantization_step))
    e = mzm_t(w)
    if cfg.length_km > 0:
        e = fiber_propagate_t(e, cfg)
    w = photodiode_t(e)
    if cfg.receiver_noise:
        w = w + lift(rng.normal("receiver", shape, np.sqrt(cfg.receiver_noise_var)))
    w = brickwall_lpf_t(w, cfg)
    if cfg.adc_noise:
        w = w + lift(rng.uniform("adc", shape, cfg.quantization_step))
    return w
