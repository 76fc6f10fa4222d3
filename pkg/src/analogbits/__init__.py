"""Discrete data generation by continuous diffusion over soft binary codes.

Symbols become vectors of real-valued bits in {-b, +b}, a Gaussian
diffusion is trained (or solved exactly) to denoise them, and decoding
thresholds the final prediction back to integers. The package covers the
full loop: codecs, noise schedule, exact and learned denoisers,
deterministic and stochastic samplers with self-conditioning, training,
evaluation on enumerable toy tasks, and a config-driven command line.
"""

from .codec import CodecSpec, decode, encode, hamming_correlation, uint8_rand_spec
from .errors import ConfigError, InvariantViolation
from .evaluation import DiscreteDistribution, exact_denoiser, total_variation
from .mlp import MlpConfig, MlpDenoiser
from .oracle import OracleDenoiser
from .sampling import SamplerConfig, ddim_step, ddpm_step, generate
from .schedule import Schedule, forward_diffuse, gamma
from .training import TrainConfig, train, training_loss

__version__ = "0.1.0"

__all__ = [
    "CodecSpec", "decode", "encode", "hamming_correlation", "uint8_rand_spec",
    "ConfigError", "InvariantViolation",
    "DiscreteDistribution", "exact_denoiser", "total_variation",
    "MlpConfig", "MlpDenoiser", "OracleDenoiser",
    "SamplerConfig", "ddim_step", "ddpm_step", "generate",
    "Schedule", "forward_diffuse", "gamma",
    "TrainConfig", "train", "training_loss",
    "__version__",
]
