"""Reference systems: block feed-forward autoencoder and PAM2 + FFNN receiver.

The feed-forward autoencoder maps each message block independently (no
recurrence, so it cannot see inter-block interference). The PAM2 system uses
a fixed transmitter (binary levels {0, pi/4}, raised-cosine pulses) and a
trainable multi-layer receiver that estimates the central one of Z symbols
from the Z*g samples around it, sliding one symbol at a time.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import nn
from .autodiff import Tensor
from .channel import Waveform

PAM2_LEVELS = (0.0, np.pi / 4)
RC_SPAN_SYMBOLS = 16  # truncation; zero-crossing error < 1e-9 at this span


@dataclass(frozen=True)
class Pam2Config:
    samples_per_symbol: int = 8          # 8 -> 42 Gb/s, 4 -> 84 Gb/s
    roll_off: float = 0.25
    window_z: int = 61
    layers: int = 9

    def __post_init__(self):
        if self.window_z % 2 == 0:
            raise ValueError("symbol window Z must be odd (central estimation)")
        if not 0.0 <= self.roll_off <= 1.0:
            raise ValueError("roll-off must lie in [0, 1]")


def rc_kernel(roll_off: float, g: int, span: int = RC_SPAN_SYMBOLS) -> np.ndarray:
    """Raised-cosine impulse response sampled at g points per symbol.

    Peak-normalized (h(0) = 1) with exact zeros at nonzero integer symbol
    offsets, so symbol-center samples are ISI-free.
    """
    t = np.arange(-span * g, span * g + 1) / g  # in symbol periods
    h = np.empty_like(t)
    denom = 1.0 - (2.0 * roll_off * t) ** 2
    singular = np.isclose(denom, 0.0, atol=1e-12)
    ok = ~singular
    h[ok] = np.sinc(t[ok]) * np.cos(np.pi * roll_off * t[ok]) / denom[ok]
    if roll_off > 0:
        h[singular] = (np.pi / 4) * np.sinc(1.0 / (2.0 * roll_off))
    return h


def rc_filter(impulses: np.ndarray, roll_off: float, g: int) -> np.ndarray:
    """Pulse-shape a sample-rate impulse train ('same' length, centered)."""
    kernel = rc_kernel(roll_off, g)
    n = impulses.shape[-1]
    m = kernel.size
    full = np.fft.irfft(
        np.fft.rfft(impulses, n + m - 1) * np.fft.rfft(kernel, n + m - 1),
        n + m - 1)
    start = (m - 1) // 2
    return full[..., start : start + n]


def pam2_modulate(bits: np.ndarray, g: int,
                  sample_rate_gsa_s: float = 336.0,
                  roll_off: float = 0.25) -> Waveform:
    """Map bits to levels {0, pi/4} and shape with the raised-cosine filter.

    Symbol k's nominal center lands on sample index k*g.
    """
    bits = np.asarray(bits)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0/1")
    levels = np.asarray(PAM2_LEVELS)[bits]
    impulses = np.zeros(bits.shape[:-1] + (bits.shape[-1] * g,))
    impulses[..., ::g] = levels
    return Waveform(rc_filter(impulses, roll_off, g), sample_rate_gsa_s)


def symbol_windows(samples: np.ndarray, Z: int, g: int) -> np.ndarray:
    """Stack the Z*g-sample context around every fully covered symbol.

    Input (..., n_sym*g) -> output (..., n_sym - Z + 1, Z*g), one row per
    estimated (central) symbol.
    """
    n_sym = samples.shape[-1] // g
    if n_sym < Z:
        raise ValueError("need at least Z symbols of samples")
    view = np.lib.stride_tricks.sliding_window_view(samples, Z * g, axis=-1)
    return view[..., ::g, :][..., : n_sym - Z + 1, :]


def pam2_hidden_sizes(Z: int, g: int, layers: int) -> list[int]:
    """Hidden widths floor(Z*g / 2^(l-1)) for l = 1..layers-2."""
    return [(Z * g) // 2 ** (l - 1) for l in range(1, layers - 1)]


def pam2_node_count(Z: int, g: int, layers: int) -> int:
    """Input width + hidden widths + the 2-way output."""
    return Z * g + sum(pam2_hidden_sizes(Z, g, layers)) + 2


class RxFfnn:
    """Sliding central-symbol equalizer: Z*g samples in, binary posterior out."""

    def __init__(self, cfg: Pam2Config, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        zg = cfg.window_z * cfg.samples_per_symbol
        sizes = [zg] + pam2_hidden_sizes(cfg.window_z, cfg.samples_per_symbol,
                                         cfg.layers) + [2]
        self.layers = [
            nn.DenseLayer(sizes[i + 1], sizes[i],
                          "softmax" if i == len(sizes) - 2 else "relu",
                          rng, f"eq.l{i + 1}")
            for i in range(len(sizes) - 1)
        ]

    def parameters(self) -> OrderedDict:
        out = OrderedDict()
        for layer in self.layers:
            out.update(layer.parameters())
        return out

    def forward(self, windows: Tensor) -> Tensor:
        h = windows
        for layer in self.layers:
            h = layer(h)
        return h

    def forward_np(self, windows: np.ndarray) -> np.ndarray:
        h = windows
        for layer in self.layers:
            h = layer.forward_np(h)
        return h

    def equalize(self, samples: np.ndarray) -> np.ndarray:
        """Posteriors (..., n_sym - Z + 1, 2) for a received sample stream."""
        cfg = self.cfg
        wins = symbol_windows(samples, cfg.window_z, cfg.samples_per_symbol)
        flat = wins.reshape(-1, wins.shape[-1]).T  # (Zg, N)
        post = self.forward_np(flat).T
        return post.reshape(wins.shape[:-1] + (2,))


def ffnn_hidden_sizes(M: int) -> tuple[list[int], list[int]]:
    """Symmetric 2M-wide hidden pair on each side.

    Total node-layer widths (inputs included) then come to 10 M + 2 n.
    """
    return [2 * M, 2 * M], [2 * M, 2 * M]


def ffnn_node_count(M: int, n: int) -> int:
    tx_hidden, rx_hidden = ffnn_hidden_sizes(M)
    return M + sum(tx_hidden) + n + n + sum(rx_hidden) + M


class FfnnAutoencoder:
    """Block-independent transceiver: 3 feed-forward layers on each side."""

    def __init__(self, M: int = 64, n: int = 48, seed: int = 0):
        self.M = M
        self.n = n
        rng = np.random.default_rng(seed)
        tx_hidden, rx_hidden = ffnn_hidden_sizes(M)
        tx_sizes = [M] + tx_hidden + [n]
        rx_sizes = [n] + rx_hidden + [M]
        self.tx_layers = [
            nn.DenseLayer(tx_sizes[i + 1], tx_sizes[i],
                          "clip_tx" if i == len(tx_sizes) - 2 else "relu",
                          rng, f"tx.l{i + 1}")
            for i in range(len(tx_sizes) - 1)
        ]
        self.rx_layers = [
            nn.DenseLayer(rx_sizes[i + 1], rx_sizes[i],
                          "softmax" if i == len(rx_sizes) - 2 else "relu",
                          rng, f"rx.l{i + 1}")
            for i in range(len(rx_sizes) - 1)
        ]

    def parameters(self) -> OrderedDict:
        out = OrderedDict()
        for layer in self.tx_layers + self.rx_layers:
            out.update(layer.parameters())
        return out

    def _onehot(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages)
        if messages.min() < 1 or messages.max() > self.M:
            raise ValueError("messages must lie in {1..M}")
        flat = messages.reshape(-1)
        x = np.zeros((self.M, flat.size))
        x[flat - 1, np.arange(flat.size)] = 1.0
        return x

    def encode(self, messages: np.ndarray) -> Tensor:
        """One block per message: (k,) messages -> (n, k) drive blocks."""
        h = Tensor(self._onehot(messages))
        for layer in self.tx_layers:
            h = layer(h)
        return h

    def decode(self, blocks: Tensor) -> Tensor:
        h = blocks
        for layer in self.rx_layers:
            h = layer(h)
        return h

    def encode_np(self, messages: np.ndarray) -> np.ndarray:
        h = self._onehot(messages)
        for layer in self.tx_layers:
            h = layer.forward_np(h)
        return h

    def decode_np(self, blocks: np.ndarray) -> np.ndarray:
        h = blocks
        for layer in self.rx_layers:
            h = layer.forward_np(h)
        return h
