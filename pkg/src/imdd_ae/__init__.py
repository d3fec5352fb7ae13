"""End-to-end learned transceivers for dispersive IM/DD fiber links."""

from .autodiff import Tensor
from .channel import ChannelConfig, NoiseDraw, Waveform
from .config import AppConfig, EvalConfig, TrainConfig
from .estimation import ErrorReport
from .transceiver import BrnnTransceiver, TransceiverConfig

__version__ = "0.1.0"

__all__ = [
    "Tensor", "ChannelConfig", "NoiseDraw", "Waveform",
    "AppConfig", "EvalConfig", "TrainConfig", "ErrorReport",
    "BrnnTransceiver", "TransceiverConfig", "__version__",
]
