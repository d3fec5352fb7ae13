"""Bidirectional recurrent transceiver.

The transmitter maps each message (one of M, fed as a one-hot selection)
to a block of n drive samples bounded to [0, pi/4]; the receiver maps each
received n-sample block to a posterior over the M messages. Both sides run
one recurrent cell per direction over the block sequence; the transmitter
averages the two directions per slot, the receiver concatenates them and
applies a softmax readout.

Cells come in two kinds:

* ``vanilla``  -- h_t = act(W [x_t; h_{t-1}] + b)
* ``lstm-gru`` -- two sigmoid gates choose what to keep of the previous
  output and what to admit of the candidate update:
      ga = sigm(W1 [x; h] + b1)
      gb = sigm(W2 [x; h] + b2)
      h' = (1 - gb) * h + gb * act(W3 [x; ga * h] + b3)

Each graph method has a plain-numpy twin (``*_np``) used on the
Monte-Carlo evaluation path; tests pin the two paths to each other.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor

CELL_KINDS = ("vanilla", "lstm-gru")


@dataclass(frozen=True)
class TransceiverConfig:
    M: int = 64
    n: int = 48
    cell: str = "vanilla"
    window: int = 10

    def __post_init__(self):
        if self.cell not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.cell!r}")
        if self.M < 2 or self.n < 1 or self.window < 1:
            raise ValueError("need M >= 2, n >= 1, window >= 1")


def _affine(W: Tensor, b: Tensor, x, h: Tensor, x_dim: int) -> Tensor:
    """W [x; h] + b where x is either a tensor or a one-hot column selection.

    Integer-message inputs pick columns of the x-block of W directly, which
    equals the one-hot matrix product at a fraction of the work.
    """
    if isinstance(x, Tensor):
        return ad.matmul(W, ad.concat_rows([x, h])) + b
    x_part = ad.gather_cols(ad.cols(W, 0, x_dim), x)
    h_part = ad.matmul(ad.cols(W, x_dim, W.shape[1]), h)
    return x_part + h_part + b


def _affine_np(W: np.ndarray, b: np.ndarray, x, h: np.ndarray,
               x_dim: int) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.ndim == 2:
        return W @ np.concatenate([x, h], axis=0) + b
    return W[:, x_dim:] @ h + W[:, :x_dim][:, x] + b


class RecurrentCell:
    """One direction's recurrent cell (state size = output size)."""

    def __init__(self, kind: str, out_dim: int, x_dim: int, activation: str,
                 rng: np.random.Generator, name: str):
        self.kind = kind
        self.out_dim = out_dim
        self.x_dim = x_dim
        self.activation = activation
        self.name = name
        in_dim = x_dim + out_dim
        n_layers = 1 if kind == "vanilla" else 3
        self._weights = []
        for i in range(n_layers):
            W = Tensor(nn.glorot_uniform(rng, out_dim, in_dim), requires_grad=True)
            b = Tensor(np.zeros((out_dim, 1)), requires_grad=True)
            self._weights.append((W, b))

    def parameters(self) -> OrderedDict:
        out = OrderedDict()
        if self.kind == "vanilla":
            out[f"{self.name}.W"] = self._weights[0][0]
            out[f"{self.name}.b"] = self._weights[0][1]
        else:
            for i, (W, b) in enumerate(self._weights, start=1):
                out[f"{self.name}.W{i}"] = W
                out[f"{self.name}.b{i}"] = b
        return out

    def step(self, x, h_prev: Tensor) -> Tensor:
        act = nn.ACTIVATIONS[self.activation]
        if self.kind == "vanilla":
            W, b = self._weights[0]
            return act(_affine(W, b, x, h_prev, self.x_dim))
        (W1, b1), (W2, b2), (W3, b3) = self._weights
        ga = ad.sigmoid(_affine(W1, b1, x, h_prev, self.x_dim))
        gb = ad.sigmoid(_affine(W2, b2, x, h_prev, self.x_dim))
        cand = act(_affine(W3, b3, x, ad.mul(ga, h_prev), self.x_dim))
        return ad.mul(1.0 - gb, h_prev) + ad.mul(gb, cand)

    def step_np(self, x, h_prev: np.ndarray) -> np.ndarray:
        act = self.activation
        if self.kind == "vanilla":
            W, b = self._weights[0]
            return nn.apply_activation_np(
                act, _affine_np(W.values, b.values, x, h_prev, self.x_dim))
        (W1, b1), (W2, b2), (W3, b3) = self._weights
        ga = nn.apply_activation_np(
            "sigmoid", _affine_np(W1.values, b1.values, x, h_prev, self.x_dim))
        gb = nn.apply_activation_np(
            "sigmoid", _affine_np(W2.values, b2.values, x, h_prev, self.x_dim))
        cand = nn.apply_activation_np(
            act, _affine_np(W3.values, b3.values, x, ga * h_prev, self.x_dim))
        return (1.0 - gb) * h_prev + gb * cand


@dataclass
class CarryValues:
    """Detached per-direction cell outputs captured at the sequence edges.

    ``fwd_first``/``fwd_last`` are the forward pass outputs at the first and
    last slot; ``bwd_first``/``bwd_last`` the backward pass outputs at the
    first (its terminal step) and last (its initial step) slot.
    """

    fwd_first: np.ndarray
    fwd_last: np.ndarray
    bwd_first: np.ndarray
    bwd_last: np.ndarray


def zero_state(dim: int, batch: int) -> np.ndarray:
    return np.zeros((dim, batch))


class BrnnTransceiver:
    """Transmitter + receiver pair sharing one configuration."""

    def __init__(self, cfg: TransceiverConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        M, n = cfg.M, cfg.n
        self.tx_fwd = RecurrentCell(cfg.cell, n, M, "clip_tx", rng, "txf")
        self.tx_bwd = RecurrentCell(cfg.cell, n, M, "clip_tx", rng, "txb")
        self.rx_fwd = RecurrentCell(cfg.cell, 2 * M, n, "relu", rng, "rxf")
        self.rx_bwd = RecurrentCell(cfg.cell, 2 * M, n, "relu", rng, "rxb")
        self.readout = nn.DenseLayer(M, 4 * M, "softmax", rng, "softmax")

    def parameters(self) -> OrderedDict:
        out = OrderedDict()
        for part in (self.tx_fwd, self.tx_bwd, self.rx_fwd, self.rx_bwd,
                     self.readout):
            out.update(part.parameters())
        return out

    # ------------------------------------------------------------- encoding

    def tx_encode(self, messages: np.ndarray,
                  state_fwd: np.ndarray | None = None,
                  state_bwd: np.ndarray | None = None
                  ) -> tuple[list[Tensor], CarryValues]:
        """Encode a (T, B) message window into T blocks of shape (n, B).

        Messages are 1-based; each output slot is the average of the
        forward and backward cell outputs and lies in [0, pi/4]^n.
        """
        messages = np.asarray(messages)
        if messages.min() < 1 or messages.max() > self.cfg.M:
            raise ValueError("messages must lie in {1..M}")
        idx = messages - 1
        T, B = idx.shape
        n = self.cfg.n
        hf = Tensor(zero_state(n, B) if state_fwd is None else state_fwd)
        hb = Tensor(zero_state(n, B) if state_bwd is None else state_bwd)
        fwd, bwd = [], [None] * T
        for t in range(T):
            hf = self.tx_fwd.step(idx[t], hf)
            fwd.append(hf)
        for t in reversed(range(T)):
            hb = self.tx_bwd.step(idx[t], hb)
            bwd[t] = hb
        blocks = [ad.scale(fwd[t] + bwd[t], 0.5) for t in range(T)]
        carry = CarryValues(fwd[0].detach(), fwd[-1].detach(),
                            bwd[0].detach(), bwd[-1].detach())
        return blocks, carry

    def tx_encode_np(self, messages: np.ndarray,
                     state_fwd: np.ndarray | None = None,
                     state_bwd: np.ndarray | None = None
                     ) -> tuple[np.ndarray, CarryValues]:
        """Inference twin of `tx_encode`; returns a (T, n, B) array."""
        messages = np.asarray(messages)
        if messages.min() < 1 or messages.max() > self.cfg.M:
            raise ValueError("messages must lie in {1..M}")
        idx = messages - 1
        T, B = idx.shape
        n = self.cfg.n
        hf = zero_state(n, B) if state_fwd is None else state_fwd
        hb = zero_state(n, B) if state_bwd is None else state_bwd
        fwd = np.empty((T, n, B))
        bwd = np.empty((T, n, B))
        for t in range(T):
            hf = self.tx_fwd.step_np(idx[t], hf)
            fwd[t] = hf
        for t in reversed(range(T)):
            hb = self.tx_bwd.step_np(idx[t], hb)
            bwd[t] = hb
        carry = CarryValues(fwd[0].copy(), fwd[-1].copy(),
                            bwd[0].copy(), bwd[-1].copy())
        return 0.5 * (fwd + bwd), carry

    # ------------------------------------------------------------- decoding

    def rx_decode(self, blocks: list[Tensor],
                  state_fwd: np.ndarray | None = None,
                  state_bwd: np.ndarray | None = None
                  ) -> tuple[list[Tensor], CarryValues]:
        """Decode T received blocks (n, B) into T posteriors (M, B)."""
        T = len(blocks)
        B = blocks[0].values.shape[1]
        dim = 2 * self.cfg.M
        hf = Tensor(zero_state(dim, B) if state_fwd is None else state_fwd)
        hb = Tensor(zero_state(dim, B) if state_bwd is None else state_bwd)
        fwd, bwd = [], [None] * T
        for t in range(T):
            hf = self.rx_fwd.step(blocks[t], hf)
            fwd.append(hf)
        for t in reversed(range(T)):
            hb = self.rx_bwd.step(blocks[t], hb)
            bwd[t] = hb
        posteriors = [self.readout(ad.concat_rows([fwd[t], bwd[t]]))
                      for t in range(T)]
        carry = CarryValues(fwd[0].detach(), fwd[-1].detach(),
                            bwd[0].detach(), bwd[-1].detach())
        return posteriors, carry

    def rx_decode_np(self, blocks: np.ndarray,
                     state_fwd: np.ndarray | None = None,
                     state_bwd: np.ndarray | None = None
                     ) -> tuple[np.ndarray, CarryValues]:
        """Inference twin of `rx_decode`: (T, n, B) -> (T, M, B)."""
        T, _, B = blocks.shape
        dim = 2 * self.cfg.M
        hf = zero_state(dim, B) if state_fwd is None else state_fwd
        hb = zero_state(dim, B) if state_bwd is None else state_bwd
        fwd = np.empty((T, dim, B))
        bwd = np.empty((T, dim, B))
        for t in range(T):
            hf = self.rx_fwd.step_np(blocks[t], hf)
            fwd[t] = hf
        for t in reversed(range(T)):
            hb = self.rx_bwd.step_np(blocks[t], hb)
            bwd[t] = hb
        posteriors = np.empty((T, self.cfg.M, B))
        for t in range(T):
            posteriors[t] = self.readout.forward_np(
                np.concatenate([fwd[t], bwd[t]], axis=0))
        carry = CarryValues(fwd[0].copy(), fwd[-1].copy(),
                            bwd[0].copy(), bwd[-1].copy())
        return posteriors, carry


def node_count(cell: str, M: int, n: int) -> int:
    """Architecture node count (per-layer inputs plus outputs summed).

    Vanilla: 15 M + 6 n; gated cell: 35 M + 18 n.
    """
    if cell == "vanilla":
        return 15 * M + 6 * n
    if cell == "lstm-gru":
        return 35 * M + 18 * n
    raise ValueError(f"unknown cell kind {cell!r}")
