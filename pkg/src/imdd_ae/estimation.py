"""Sliding-window sequence estimation, decisions and error metrics.

A received stream of T + W - 1 blocks is decoded W blocks at a time with
stride one; every slot therefore collects up to W posterior estimates,
one per window that covers it. The fused posterior of slot i is the plain
average of its covering windows' outputs (the first W - 1 slots see fewer
windows, the final W - 1 slots are never fully covered and are dropped).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ErrorReport:
    bler: float
    ber: float
    block_errors: int
    bit_errors: int
    message_count: int

    def __post_init__(self):
        if not (self.ber <= self.bler + 1e-12):
            raise ValueError("BER cannot exceed BLER")


def fuse_posteriors(windows: np.ndarray) -> np.ndarray:
    """Average per-slot posteriors across covering windows.

    `windows` has shape (K, W, M, ...) where window k (0-based) covers
    slots k..k+W-1 of the stream. Returns the fused (T, M, ...) posteriors
    for the first T = K slots; the trailing W - 1 stream slots are excluded
    because no full set of windows covers them.
    """
    K, W = windows.shape[0], windows.shape[1]
    acc = np.zeros((K + W - 1,) + windows.shape[2:])
    count = np.zeros(K + W - 1)
    for k in range(K):
        acc[k : k + W] += windows[k]
        count[k : k + W] += 1
    shape = (K,) + (1,) * (windows.ndim - 2)
    return acc[:K] / count[:K].reshape(shape)


def sliding_estimate(transceiver, blocks: np.ndarray, window: int,
                     carry: str = "fwd") -> np.ndarray:
    """Estimate fused posteriors for a received block stream.

    `blocks` is (T_total, n, S); returns (T, M, S) with
    T = T_total - window + 1. Decoding re-runs the receiver on every
    shifted window; the forward-direction state entering window k+1 is the
    output the forward pass produced at window k's first slot
    (carry="fwd"), optionally together with a reused backward-pass
    terminal output (carry="fwd+bwd"), or nothing at all (carry="none").
    """
    T_total = blocks.shape[0]
    if T_total < window:
        raise ValueError("need at least `window` received blocks")
    if carry not in ("fwd", "fwd+bwd", "none"):
        raise ValueError(f"unknown carry mode {carry!r}")
    K = T_total - window + 1
    M = transceiver.cfg.M
    S = blocks.shape[2]
    acc = np.zeros((T_total, M, S))
    count = np.zeros(T_total)
    state_f = None
    state_b = None
    for k in range(K):
        post, edges = transceiver.rx_decode_np(blocks[k : k + window],
                                               state_f, state_b)
        acc[k : k + window] += post
        count[k : k + window] += 1
        if carry in ("fwd", "fwd+bwd"):
            state_f = edges.fwd_first
        if carry == "fwd+bwd":
            state_b = edges.bwd_first
    return acc[:K] / count[:K, None, None]


def decide(p: np.ndarray) -> np.ndarray:
    """Most probable message (1-based); ties resolve to the lowest index."""
    return np.argmax(p, axis=-2) + 1 if p.ndim > 1 else int(np.argmax(p)) + 1


def bler(truth: np.ndarray, decisions: np.ndarray) -> float:
    truth, decisions = np.asarray(truth), np.asarray(decisions)
    if truth.shape != decisions.shape:
        raise ValueError("truth/decision length mismatch")
    return float(np.mean(truth != decisions))


def gray_code(m: int | np.ndarray, M: int) -> np.ndarray | int:
    """Reflected binary Gray code of message m in {1..M} (zero-based index)."""
    if M & (M - 1):
        raise ValueError("M must be a power of two")
    m_arr = np.asarray(m)
    if np.any(m_arr < 1) or np.any(m_arr > M):
        raise ValueError("message out of range")
    i = m_arr - 1
    return i ^ (i >> 1)


def gray_bits(m, M: int) -> np.ndarray:
    """Gray code as a bit array, most significant bit first."""
    g = np.asarray(gray_code(m, M))
    width = int(np.log2(M))
    return (g[..., None] >> np.arange(width - 1, -1, -1)) & 1


_POPCOUNT = np.array([bin(i).count("1") for i in range(65536)], dtype=np.int64)


def ber(truth: np.ndarray, decisions: np.ndarray, M: int) -> float:
    """Bit error rate under the Gray labeling of messages."""
    truth, decisions = np.asarray(truth), np.asarray(decisions)
    if truth.shape != decisions.shape:
        raise ValueError("truth/decision length mismatch")
    diff = gray_code(truth, M) ^ gray_code(decisions, M)
    bits_per_block = int(np.log2(M))
    return float(_POPCOUNT[diff].sum() / (truth.size * bits_per_block))


def error_report(truth: np.ndarray, decisions: np.ndarray, M: int) -> ErrorReport:
    truth, decisions = np.asarray(truth), np.asarray(decisions)
    if truth.shape != decisions.shape:
        raise ValueError("truth/decision length mismatch")
    diff = gray_code(truth, M) ^ gray_code(decisions, M)
    bit_errors = int(_POPCOUNT[diff].sum())
    block_errors = int(np.count_nonzero(truth != decisions))
    count = truth.size
    bits_per_block = int(np.log2(M))
    return ErrorReport(
        bler=block_errors / count,
        ber=bit_errors / (count * bits_per_block),
        block_errors=block_errors,
        bit_errors=bit_errors,
        message_count=count,
    )
