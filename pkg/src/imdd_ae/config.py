"""Flat text configuration (INI sections per subsystem) and run settings.

The [simulation] section carries the physical/system parameters under their
human-readable names; [training] and [evaluation] carry run control. Any
key can be overridden from the command line.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .channel import ChannelConfig
from .transceiver import TransceiverConfig

SYSTEMS = ("vanilla", "lstm-gru", "ffnn", "pam2-ffnn")

SIMULATION_KEYS = {
    "M": ("M", int),
    "n": ("n", int),
    "Test sequence length": ("test_sequence_length", int),
    "Processing window W": ("window", int),
    "DAC/ADC rate": ("dac_rate_gsa_s", float),
    "Simulation oversampling": ("oversampling", int),
    "LPF bandwidth": ("lpf_cutoff_ghz", float),
    "DAC/ADC ENOB": ("enob", int),
    "Fiber dispersion parameter": ("dispersion_ps_nm_km", float),
    "Fiber attenuation parameter": ("attenuation_db_km", float),
    "Noise variance": ("receiver_noise_var", float),
    "Carrier wavelength": ("wavelength_nm", float),
}


@dataclass
class TrainConfig:
    system: str = "vanilla"
    M: int = 64
    n: int = 48
    window: int = 10
    batch: int = 25
    iterations: int = 10_000
    reset_period: int = 100
    logging_stride: int = 1
    distance_km: float = 20.0
    seed: int = 1
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    carry: str = "fwd+bwd"            # state hand-off between training windows
    interleave: str = "single-series"  # or "independent": one channel per member
    pam2_z: int = 61
    pam2_layers: int = 9

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.iterations <= 0:
            raise ValueError("iterations must be > 0")
        if self.logging_stride < 1 or self.reset_period % self.logging_stride:
            raise ValueError("logging stride must divide the state-reset period")
        if self.carry not in ("fwd", "fwd+bwd", "none"):
            raise ValueError(f"unknown carry mode {self.carry!r}")
        if self.interleave not in ("single-series", "independent"):
            raise ValueError(f"unknown interleave mode {self.interleave!r}")

    @property
    def bits_per_symbol(self) -> int:
        return int(self.M).bit_length() - 1


@dataclass
class EvalConfig:
    sequences: int = 100
    sequence_length: int = 1000
    window: int = 10
    rng_kind: str = "tausworthe"
    seed: int = 1_000_003
    carry: str = "fwd"
    checkpoint: str | None = None

    def __post_init__(self):
        if self.rng_kind != "tausworthe":
            raise ValueError("evaluation messages must come from the tausworthe "
                             "generator (training uses the Mersenne twister)")
        if self.sequence_length <= self.window:
            raise ValueError("sequence length must exceed the processing window")
        if self.carry not in ("fwd", "fwd+bwd", "none"):
            raise ValueError(f"unknown carry mode {self.carry!r}")


@dataclass
class AppConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.train.seed == self.eval.seed:
            raise ValueError("training and evaluation seeds must differ")

    def transceiver(self) -> TransceiverConfig:
        cell = self.train.system if self.train.system in ("vanilla", "lstm-gru") \
            else "vanilla"
        return TransceiverConfig(self.train.M, self.train.n, cell,
                                 self.train.window)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep verbatim key spelling
    return cp


def to_text(cfg: AppConfig) -> str:
    """Render a config in the file format (also the RunRecord snapshot)."""
    cp = _parser()
    ch = cfg.channel
    cp["simulation"] = {}
    sim = cp["simulation"]
    sim["M"] = str(cfg.train.M)
    sim["n"] = str(cfg.train.n)
    sim["Test sequence length"] = str(cfg.eval.sequence_length)
    sim["Processing window W"] = str(cfg.train.window)
    sim["DAC/ADC rate"] = str(ch.dac_rate_gsa_s)
    sim["Simulation oversampling"] = str(ch.oversampling)
    sim["Simulation sampling rate"] = str(ch.sample_rate_gsa_s)
    sim["Symbol rate"] = str(ch.sample_rate_gsa_s / cfg.train.n)
    sim["Information rate"] = str(cfg.train.bits_per_symbol)
    sim["LPF bandwidth"] = str(ch.lpf_cutoff_ghz)
    sim["DAC/ADC ENOB"] = str(ch.enob)
    sim["Fiber dispersion parameter"] = str(ch.dispersion_ps_nm_km)
    sim["Fiber attenuation parameter"] = str(ch.attenuation_db_km)
    sim["Noise variance"] = str(ch.receiver_noise_var)
    sim["Carrier wavelength"] = str(ch.wavelength_nm)
    cp["training"] = {
        "system": cfg.train.system,
        "distance": str(cfg.train.distance_km),
        "batch size B": str(cfg.train.batch),
        "iterations": str(cfg.train.iterations),
        "state reset period": str(cfg.train.reset_period),
        "logging stride": str(cfg.train.logging_stride),
        "seed": str(cfg.train.seed),
        "learning rate": str(cfg.train.learning_rate),
        "adam beta1": str(cfg.train.adam_beta1),
        "adam beta2": str(cfg.train.adam_beta2),
        "adam epsilon": str(cfg.train.adam_eps),
        "carry": cfg.train.carry,
        "interleave": cfg.train.interleave,
        "PAM2 window Z": str(cfg.train.pam2_z),
        "PAM2 layers": str(cfg.train.pam2_layers),
    }
    cp["evaluation"] = {
        "test sequences": str(cfg.eval.sequences),
        "sequence length": str(cfg.eval.sequence_length),
        "processing window W": str(cfg.eval.window),
        "rng": cfg.eval.rng_kind,
        "seed": str(cfg.eval.seed),
        "carry": cfg.eval.carry,
    }
    if cfg.eval.checkpoint:
        cp["evaluation"]["checkpoint"] = cfg.eval.checkpoint
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_text(text: str) -> AppConfig:
    cp = _parser()
    cp.read_string(text)
    cfg = AppConfig()

    if cp.has_section("simulation"):
        sim = cp["simulation"]
        ch_kwargs = {}
        for key, (attr, conv) in SIMULATION_KEYS.items():
            if key in sim:
                val = conv(sim[key])
                if attr in ("M", "n", "window", "test_sequence_length"):
                    continue
                ch_kwargs[attr] = val
        cfg.channel = ChannelConfig(length_km=cfg.channel.length_km, **ch_kwargs)
        if "M" in sim:
            cfg.train.M = int(sim["M"])
        if "n" in sim:
            cfg.train.n = int(sim["n"])
        if "Processing window W" in sim:
            cfg.train.window = int(sim["Processing window W"])
            cfg.eval.window = cfg.train.window
        if "Test sequence length" in sim:
            cfg.eval.sequence_length = int(sim["Test sequence length"])
        if "Simulation sampling rate" in sim:
            stated = float(sim["Simulation sampling rate"])
            if abs(stated - cfg.channel.sample_rate_gsa_s) > 1e-9:
                raise ValueError("stated sampling rate contradicts "
                                 "DAC/ADC rate x oversampling")

    if cp.has_section("training"):
        tr = cp["training"]
        t = cfg.train
        t.system = tr.get("system", t.system)
        t.distance_km = tr.getfloat("distance", t.distance_km)
        t.batch = tr.getint("batch size B", t.batch)
        t.iterations = tr.getint("iterations", t.iterations)
        t.reset_period = tr.getint("state reset period", t.reset_period)
        t.logging_stride = tr.getint("logging stride", t.logging_stride)
        t.seed = tr.getint("seed", t.seed)
        t.learning_rate = tr.getfloat("learning rate", t.learning_rate)
        t.adam_beta1 = tr.getfloat("adam beta1", t.adam_beta1)
        t.adam_beta2 = tr.getfloat("adam beta2", t.adam_beta2)
        t.adam_eps = tr.getfloat("adam epsilon", t.adam_eps)
        t.carry = tr.get("carry", t.carry)
        t.interleave = tr.get("interleave", t.interleave)
        t.pam2_z = tr.getint("PAM2 window Z", t.pam2_z)
        t.pam2_layers = tr.getint("PAM2 layers", t.pam2_layers)
        t.__post_init__()

    if cp.has_section("evaluation"):
        ev = cp["evaluation"]
        e = cfg.eval
        e.sequences = ev.getint("test sequences", e.sequences)
        e.sequence_length = ev.getint("sequence length", e.sequence_length)
        e.window = ev.getint("processing window W", e.window)
        e.rng_kind = ev.get("rng", e.rng_kind)
        e.seed = ev.getint("seed", e.seed)
        e.carry = ev.get("carry", e.carry)
        e.checkpoint = ev.get("checkpoint", e.checkpoint)
        e.__post_init__()

    cfg.__post_init__()
    return cfg


def load(path: str) -> AppConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return from_text(fh.read())


def rate_point(gbps: int) -> tuple[int, int]:
    """(M, n) for the two supported information rates."""
    if gbps == 42:
        return 64, 48
    if gbps == 84:
        return 64, 24
    raise ValueError("supported rate points: 42, 84")
