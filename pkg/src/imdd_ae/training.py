"""Training loop, Monte-Carlo evaluation, sweeps and gradient checking.

One optimization step processes a window of W messages from each of B
independent sequences: encode all windows (carrying recurrent state from
the previous step), interleave the blocks into one long series, push the
series through the channel, split it back, decode, and take one Adam step
on the batch-mean cross entropy. Carried states are plain values (no
gradient flows between steps) and are zeroed every `reset_period` steps.

Evaluation transmits full test sequences drawn from the tausworthe
generator (training messages come from the Mersenne twister), then decodes
with the sliding-window estimator and reports pooled block/bit error rates.
"""

from __future__ import annotations

import csv
import time
import warnings
from collections import OrderedDict
from dataclasses import dataclass, replace, field

import numpy as np

from . import autodiff as ad
from . import baselines, channel, checkpoint, config, estimation, transceiver
from .autodiff import Tensor
from .channel import ChannelConfig, NoiseDraw, Waveform
from .config import AppConfig, EvalConfig, TrainConfig
from .estimation import ErrorReport
from .nn import Adam
from .rng import MessageStream, derive_seed

# Sub-seed address tags; training and evaluation never share one.
TAG_INIT, TAG_MSG, TAG_NOISE, TAG_EVAL_MSG, TAG_EVAL_NOISE, TAG_RUN = range(6)

_SYSTEM_CODES = {"vanilla": 0, "lstm-gru": 1, "ffnn": 2, "pam2-ffnn": 3}
_SYSTEM_NAMES = {v: k for k, v in _SYSTEM_CODES.items()}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class RunRecord:
    config_text: str
    losses: np.ndarray          # recorded every `stride` steps, starting at step `stride`
    stride: int
    wallclock_s: float
    final_report: ErrorReport | None = None

    def loss_steps(self) -> np.ndarray:
        return (np.arange(self.losses.size) + 1) * self.stride


@dataclass
class TrainResult:
    model: object
    record: RunRecord
    train_cfg: TrainConfig


# ------------------------------------------------------------ construction

def build_model(tcfg: TrainConfig):
    seed = derive_seed(tcfg.seed, TAG_INIT)
    if tcfg.system in ("vanilla", "lstm-gru"):
        cfg = transceiver.TransceiverConfig(tcfg.M, tcfg.n, tcfg.system,
                                            tcfg.window)
        return transceiver.BrnnTransceiver(cfg, seed=seed)
    if tcfg.system == "ffnn":
        return baselines.FfnnAutoencoder(tcfg.M, tcfg.n, seed=seed)
    g = tcfg.n // tcfg.bits_per_symbol
    return baselines.RxFfnn(
        baselines.Pam2Config(g, 0.25, tcfg.pam2_z, tcfg.pam2_layers), seed=seed)


def save_checkpoint(path: str, model, tcfg: TrainConfig) -> None:
    tensors: OrderedDict = OrderedDict()
    tensors["meta.system"] = np.float64(_SYSTEM_CODES[tcfg.system])
    tensors["meta.M"] = np.float64(tcfg.M)
    tensors["meta.n"] = np.float64(tcfg.n)
    tensors["meta.window"] = np.float64(tcfg.window)
    tensors["meta.seed"] = np.float64(tcfg.seed)
    tensors["meta.distance_km"] = np.float64(tcfg.distance_km)
    tensors["meta.pam2_z"] = np.float64(tcfg.pam2_z)
    tensors["meta.pam2_layers"] = np.float64(tcfg.pam2_layers)
    for name, p in model.parameters().items():
        tensors[name] = p.values
    checkpoint.save(path, tensors)


def load_checkpoint_model(path: str) -> tuple[object, TrainConfig]:
    tensors = checkpoint.load(path)

    def meta(key):
        return float(np.asarray(tensors[key]).reshape(-1)[0])

    tcfg = TrainConfig(
        system=_SYSTEM_NAMES[int(meta("meta.system"))],
        M=int(meta("meta.M")),
        n=int(meta("meta.n")),
        window=int(meta("meta.window")),
        seed=int(meta("meta.seed")),
        distance_km=meta("meta.distance_km"),
        pam2_z=int(meta("meta.pam2_z")),
        pam2_layers=int(meta("meta.pam2_layers")),
    )
    model = build_model(tcfg)
    params = model.parameters()
    stored = {k: v for k, v in tensors.items() if not k.startswith("meta.")}
    if set(stored) != set(params):
        raise ValueError(f"{path}: parameter names do not match the "
                         f"{tcfg.system} architecture")
    for name, p in params.items():
        if p.values.shape != stored[name].shape:
            raise ValueError(f"{path}: shape mismatch for {name}")
        p.values[...] = stored[name]
    return model, tcfg


# ---------------------------------------------------------- training steps

def _zero_carries(tcfg: TrainConfig) -> dict:
    B = tcfg.batch
    return {
        "txf": transceiver.zero_state(tcfg.n, B),
        "txb": transceiver.zero_state(tcfg.n, B),
        "rxf": transceiver.zero_state(2 * tcfg.M, B),
        "rxb": transceiver.zero_state(2 * tcfg.M, B),
    }


def _series_through_channel(blocks: list[Tensor], ch: ChannelConfig,
                            noise: NoiseDraw, tcfg: TrainConfig
                            ) -> list[Tensor]:
    W = len(blocks)
    n, B = blocks[0].values.shape
    series = ad.blocks_to_series(blocks)
    if tcfg.interleave == "independent":
        series = ad.reshape(series, (B, W * n))
    rx = channel.channel_forward_t(series, ch, noise)
    return [ad.slot_from_series(rx, t, W, n, B) for t in range(W)]


def brnn_training_step(model, ch: ChannelConfig, msgs: np.ndarray,
                       carries: dict, noise: NoiseDraw, tcfg: TrainConfig
                       ) -> tuple[Tensor, dict]:
    """One forward pass; returns the loss tensor and next-step carries."""
    blocks, tx_edges = model.tx_encode(msgs, carries["txf"], carries["txb"])
    rx_blocks = _series_through_channel(blocks, ch, noise, tcfg)
    posteriors, rx_edges = model.rx_decode(rx_blocks, carries["rxf"],
                                           carries["rxb"])
    loss = ad.cross_entropy(posteriors, msgs - 1)
    nxt = _zero_carries(tcfg)
    if tcfg.carry in ("fwd", "fwd+bwd"):
        nxt["txf"] = tx_edges.fwd_last
        nxt["rxf"] = rx_edges.fwd_last
    if tcfg.carry == "fwd+bwd":
        nxt["txb"] = tx_edges.bwd_first
        nxt["rxb"] = rx_edges.bwd_first
    return loss, nxt


def ffnn_training_step(model, ch: ChannelConfig, msgs: np.ndarray,
                       noise: NoiseDraw, tcfg: TrainConfig) -> Tensor:
    """Block-independent encode/decode around the shared series plumbing."""
    blocks = [model.encode(msgs[t]) for t in range(msgs.shape[0])]
    rx_blocks = _series_through_channel(blocks, ch, noise, tcfg)
    posteriors = [model.decode(b) for b in rx_blocks]
    return ad.cross_entropy(posteriors, msgs - 1)


def pam2_training_step(model, ch: ChannelConfig, bits: np.ndarray,
                       noise: NoiseDraw) -> Tensor:
    """Rx-only optimization: the PAM2 transmitter is fixed, so the channel
    runs outside the graph and only the equalizer stack is differentiated."""
    cfg = model.cfg
    g = cfg.samples_per_symbol
    wave = baselines.pam2_modulate(bits, g, ch.sample_rate_gsa_s, cfg.roll_off)
    rx = channel.channel_forward(wave, ch, noise).samples  # (B, n_sym*g)
    wins = baselines.symbol_windows(rx, cfg.window_z, g)   # (B, n_est, Zg)
    half = (cfg.window_z - 1) // 2
    labels = bits[:, half : bits.shape[1] - half].reshape(-1)
    flat = Tensor(wins.reshape(-1, wins.shape[-1]).T)      # (Zg, B*n_est)
    posteriors = model.forward(flat)
    return ad.cross_entropy(posteriors, labels)


def train(app: AppConfig, quiet: bool = True) -> TrainResult:
    """Run the full optimization; returns the model and its RunRecord."""
    t0 = time.time()
    tcfg = app.train
    ch = replace(app.channel, length_km=tcfg.distance_km)
    model = build_model(tcfg)
    opt = Adam(model.parameters(), lr=tcfg.learning_rate,
               beta1=tcfg.adam_beta1, beta2=tcfg.adam_beta2,
               eps=tcfg.adam_eps)

    if tcfg.system == "pam2-ffnn":
        g = tcfg.n // tcfg.bits_per_symbol
        sym_per_member = max(tcfg.pam2_z + 39, (tcfg.window * tcfg.n) // g)
    streams = [
        MessageStream("mersenne", derive_seed(tcfg.seed, TAG_MSG, i), tcfg.M)
        for i in range(tcfg.batch)
    ]
    carries = _zero_carries(tcfg)
    losses = []
    for step in range(1, tcfg.iterations + 1):
        if step % tcfg.reset_period == 0:
            carries = _zero_carries(tcfg)
        noise = NoiseDraw(derive_seed(tcfg.seed, TAG_NOISE, step))
        if tcfg.system == "pam2-ffnn":
            bits = np.stack([s.draw_bits(sym_per_member) for s in streams])
            loss = pam2_training_step(model, ch, bits, noise)
        else:
            msgs = np.stack([s.draw(tcfg.window) for s in streams], axis=1)
            if tcfg.system == "ffnn":
                loss = ffnn_training_step(model, ch, msgs, noise, tcfg)
            else:
                loss, carries = brnn_training_step(model, ch, msgs, carries,
                                                   noise, tcfg)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss {value} at step {step} "
                f"(system={tcfg.system}, distance={tcfg.distance_km} km)")
        loss.backward()
        opt.step()
        opt.zero_grad()
        if step % tcfg.logging_stride == 0:
            losses.append(value)
        if not quiet and step % 500 == 0:
            print(f"  step {step:6d}  loss {value:.4f}", flush=True)

    record = RunRecord(config.to_text(app), np.asarray(losses),
                       tcfg.logging_stride, time.time() - t0)
    return TrainResult(model, record, tcfg)


# -------------------------------------------------------------- evaluation

@dataclass
class EvalResult:
    report: ErrorReport
    per_sequence: list[ErrorReport] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [vars(r) for r in self.per_sequence]


def _test_messages(ecfg: EvalConfig, M: int) -> np.ndarray:
    cols = [
        MessageStream(ecfg.rng_kind, derive_seed(ecfg.seed, TAG_EVAL_MSG, i),
                      M).draw(ecfg.sequence_length)
        for i in range(ecfg.sequences)
    ]
    return np.stack(cols, axis=1)  # (T_total, S)


def evaluate(model, tcfg: TrainConfig, ecfg: EvalConfig,
             ch_cfg: ChannelConfig) -> EvalResult:
    ch = replace(ch_cfg, length_km=tcfg.distance_km)
    if tcfg.system == "pam2-ffnn":
        return _evaluate_pam2(model, tcfg, ecfg, ch)
    if tcfg.system in ("vanilla", "lstm-gru") and ecfg.window != tcfg.window:
        warnings.warn(
            f"inference window {ecfg.window} differs from the training "
            f"window {tcfg.window} (allowed, used by window sweeps)",
            RuntimeWarning, stacklevel=2)

    M, n = tcfg.M, tcfg.n
    msgs = _test_messages(ecfg, M)
    T_total, S = msgs.shape

    if tcfg.system == "ffnn":
        blocks = model.encode_np(msgs.reshape(-1)).reshape(n, T_total, S)
        blocks = np.ascontiguousarray(blocks.transpose(1, 0, 2))
    else:
        blocks, _ = model.tx_encode_np(msgs)  # (T, n, S)

    series = blocks.transpose(2, 0, 1).reshape(S, T_total * n)
    noise = NoiseDraw(derive_seed(ecfg.seed, TAG_EVAL_NOISE))
    rx = channel.channel_forward(Waveform(series, ch.sample_rate_gsa_s),
                                 ch, noise).samples
    rx_blocks = np.ascontiguousarray(
        rx.reshape(S, T_total, n).transpose(1, 2, 0))  # (T, n, S)

    if tcfg.system == "ffnn":
        fused = model.decode_np(
            rx_blocks.transpose(1, 0, 2).reshape(n, -1)
        ).reshape(M, T_total, S).transpose(1, 0, 2)
    else:
        fused = estimation.sliding_estimate(model, rx_blocks, ecfg.window,
                                            ecfg.carry)
    decisions = estimation.decide(fused)  # (T, S)
    truth = msgs[: decisions.shape[0]]

    per_seq = [estimation.error_report(truth[:, s], decisions[:, s], M)
               for s in range(S)]
    pooled = estimation.error_report(truth.T.reshape(-1),
                                     decisions.T.reshape(-1), M)
    return EvalResult(pooled, per_seq)


def _evaluate_pam2(model, tcfg: TrainConfig, ecfg: EvalConfig,
                   ch: ChannelConfig) -> EvalResult:
    bits_per = tcfg.bits_per_symbol
    g = tcfg.n // bits_per
    n_bits = ecfg.sequence_length * bits_per
    bits = np.stack([
        MessageStream(ecfg.rng_kind, derive_seed(ecfg.seed, TAG_EVAL_MSG, i),
                      2).draw(n_bits) - 1
        for i in range(ecfg.sequences)
    ])  # (S, n_bits)
    wave = baselines.pam2_modulate(bits, g, ch.sample_rate_gsa_s,
                                   model.cfg.roll_off)
    noise = NoiseDraw(derive_seed(ecfg.seed, TAG_EVAL_NOISE))
    rx = channel.channel_forward(wave, ch, noise).samples
    post = model.equalize(rx)  # (S, n_est, 2)
    half = (model.cfg.window_z - 1) // 2
    decided = np.argmax(post, axis=-1)
    truth = bits[:, half : bits.shape[1] - half]

    # Group fully estimated bits into blocks for a BLER-comparable figure.
    n_est = truth.shape[1]
    n_blocks = n_est // bits_per
    t_blk = truth[:, : n_blocks * bits_per].reshape(-1, n_blocks, bits_per)
    d_blk = decided[:, : n_blocks * bits_per].reshape(-1, n_blocks, bits_per)
    per_seq = []
    for s in range(bits.shape[0]):
        bit_err = int(np.count_nonzero(t_blk[s] != d_blk[s]))
        blk_err = int(np.count_nonzero(np.any(t_blk[s] != d_blk[s], axis=-1)))
        per_seq.append(ErrorReport(
            bler=blk_err / n_blocks,
            ber=bit_err / (n_blocks * bits_per),
            block_errors=blk_err, bit_errors=bit_err,
            message_count=n_blocks))
    total_bits = len(per_seq) * n_blocks * bits_per
    pooled = ErrorReport(
        bler=sum(r.block_errors for r in per_seq) / (len(per_seq) * n_blocks),
        ber=sum(r.bit_errors for r in per_seq) / total_bits,
        block_errors=sum(r.block_errors for r in per_seq),
        bit_errors=sum(r.bit_errors for r in per_seq),
        message_count=len(per_seq) * n_blocks)
    return EvalResult(pooled, per_seq)


# ------------------------------------------------------------------ sweeps

CSV_FIELDS = ["system", "distance_km", "W", "ber", "bler",
              "block_errors", "bit_errors", "messages", "seed"]


def _csv_row(tcfg: TrainConfig, window: int, report: ErrorReport,
             seed: int) -> dict:
    return {
        "system": tcfg.system,
        "distance_km": tcfg.distance_km,
        "W": window,
        "ber": f"{report.ber:.10g}",
        "bler": f"{report.bler:.10g}",
        "block_errors": report.block_errors,
        "bit_errors": report.bit_errors,
        "messages": report.message_count,
        "seed": seed,
    }


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def sweep_distance(app: AppConfig, distances: list[float], runs: int = 1,
                   quiet: bool = True) -> list[dict]:
    """Train (best of `runs` seeds) and evaluate one model per distance."""
    rows = []
    for d in distances:
        best = None
        best_seed = None
        for r in range(runs):
            seed = app.train.seed if runs == 1 else \
                derive_seed(app.train.seed, TAG_RUN, r)
            app_r = replace(app, train=replace(app.train, distance_km=d,
                                               seed=seed))
            result = train(app_r, quiet=quiet)
            res = evaluate(result.model, app_r.train, app.eval, app.channel)
            result.record.final_report = res.report
            if best is None or res.report.ber < best.report.ber:
                best, best_seed = res, seed
            if not quiet:
                print(f"distance {d} km seed {seed}: "
                      f"BER {res.report.ber:.3e}", flush=True)
        rows.append(_csv_row(replace(app.train, distance_km=d),
                             app.eval.window, best.report, best_seed))
    return rows


def sweep_window(app: AppConfig, model, tcfg: TrainConfig,
                 windows: list[int]) -> list[dict]:
    """Evaluate one trained checkpoint under varying inference windows."""
    rows = []
    for w in windows:
        ecfg = replace(app.eval, window=w)
        res = evaluate(model, tcfg, ecfg, app.channel)
        rows.append(_csv_row(tcfg, w, res.report, tcfg.seed))
    return rows


# ------------------------------------------------------------ grad checking

def finite_difference(loss_fn, arrays: list[np.ndarray],
                      h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of a scalar function of the given arrays."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gf[i] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """Worst-case elementwise relative error with an absolute floor for
    near-zero gradients."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _grad_check_cell(kind: str, seed: int = 7) -> float:
    tcfg = TrainConfig(system=kind, M=4, n=6, window=3, batch=2, iterations=1,
                       seed=seed)
    ch = ChannelConfig(length_km=20.0)
    model = build_model(tcfg)
    rng = np.random.default_rng(seed)
    msgs = rng.integers(1, tcfg.M + 1, size=(tcfg.window, tcfg.batch))
    noise = NoiseDraw(derive_seed(seed, TAG_NOISE, 0))
    carries = _zero_carries(tcfg)

    def run():
        loss, _ = brnn_training_step(model, ch, msgs, carries, noise, tcfg)
        return loss

    loss = run()
    loss.backward()
    params = model.parameters()
    analytic = {k: p.grad.copy() if p.grad is not None else
                np.zeros_like(p.values) for k, p in params.items()}
    worst = 0.0
    for k, p in params.items():
        fd = finite_difference(lambda: run().item(), [p.values])[0]
        worst = max(worst, max_relative_error(analytic[k], fd))
    for p in params.values():
        p.zero_grad()
    return worst


def _grad_check_channel(seed: int = 7) -> float:
    ch = ChannelConfig(length_km=20.0)
    rng = np.random.default_rng(seed)
    x = Tensor(rng.uniform(0.05, ad.TX_CLIP_MAX - 0.05, size=36),
               requires_grad=True)
    w = rng.normal(size=36)
    noise = NoiseDraw(derive_seed(seed, TAG_NOISE, 1))

    def run():
        y = channel.channel_forward_t(x, ch, noise)
        return ad.dot(ad.mul(y, y), w)

    loss = run()
    loss.backward()
    analytic = x.grad.copy()
    fd = finite_difference(lambda: run().item(), [x.values])[0]
    return max_relative_error(analytic, fd)


def grad_check(seed: int = 7) -> dict[str, float]:
    """End-to-end analytic vs central finite-difference gradients on small
    dimensions (frozen noise). Values are worst-case relative errors."""
    return {
        "vanilla": _grad_check_cell("vanilla", seed),
        "lstm-gru": _grad_check_cell("lstm-gru", seed),
        "channel": _grad_check_channel(seed),
    }


# -------------------------------------------------------------- run record

def write_run_record(path: str, record: RunRecord) -> None:
    """Plain-text record: config snapshot, wall clock, final metrics."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(record.config_text)
        fh.write(f"\n[run]\nwallclock seconds = {record.wallclock_s:.3f}\n")
        fh.write(f"loss samples = {record.losses.size}\n")
        if record.final_report is not None:
            r = record.final_report
            fh.write(f"ber = {r.ber:.10g}\nbler = {r.bler:.10g}\n")


def write_loss_trace(path: str, record: RunRecord) -> None:
    """Two-column CSV (step, loss) for plotting convergence curves."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for s, v in zip(record.loss_steps(), record.losses):
            writer.writerow([int(s), f"{v:.10g}"])


def split_series(series: np.ndarray, T: int, n: int, B: int) -> np.ndarray:
    """Inverse of the block interleaving: (B*T*n,) -> (T, n, B)."""
    return series.reshape(B, T, n).transpose(1, 2, 0)
