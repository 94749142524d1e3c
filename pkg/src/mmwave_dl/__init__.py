"""Dictionary learning for compressive channel estimation with impaired mmWave arrays."""

from .arrays import (
    IDEAL_PROFILE,
    DEFAULT_PROFILE,
    ArraySpec,
    ImpairmentProfile,
    ImpairmentRealization,
    sample_impairments,
    steering_vector,
)
from .channel import ChannelConfig, generate_channel, iarm_dictionaries, virtual_dictionary
from .dictionary import Dictionary
from .measurement import TrainingConfig, make_frames, simulate_training, stack_locations
from .sparse import admm_l21, estimate_channel, omp, swomp

__version__ = "0.1.0"

__all__ = [
    "ArraySpec",
    "ImpairmentProfile",
    "ImpairmentRealization",
    "DEFAULT_PROFILE",
    "IDEAL_PROFILE",
    "sample_impairments",
    "steering_vector",
    "ChannelConfig",
    "generate_channel",
    "virtual_dictionary",
    "iarm_dictionaries",
    "Dictionary",
    "TrainingConfig",
    "make_frames",
    "simulate_training",
    "stack_locations",
    "omp",
    "swomp",
    "admm_l21",
    "estimate_channel",
]
