"""Room impulse response generation and far-field speech augmentation toolkit."""

__version__ = "0.1.0"

# Bumped whenever the CLI surface or a serialized format changes shape.
INTERFACE_VERSION = 1

from .env import (  # noqa: E402
    AcousticEnv,
    NormalizationConfig,
    build_embedding,
    invert_embedding,
    sabine_absorption,
    sample_environment,
)
from .synthesis import (  # noqa: E402
    Provenance,
    Rir,
    SynthConfig,
    diffuse_tail,
    generate_reference_rir,
    image_method_rir,
)
from .analysis import (  # noqa: E402
    EnergyDecayCurve,
    crop_at_t60,
    estimate_t60,
    schroeder_edc,
    t60_error,
    t60_loss_with_grad,
)

__all__ = [
    "AcousticEnv",
    "NormalizationConfig",
    "build_embedding",
    "invert_embedding",
    "sabine_absorption",
    "sample_environment",
    "Provenance",
    "Rir",
    "SynthConfig",
    "image_method_rir",
    "diffuse_tail",
    "generate_reference_rir",
    "EnergyDecayCurve",
    "schroeder_edc",
    "estimate_t60",
    "t60_error",
    "crop_at_t60",
    "t60_loss_with_grad",
    "INTERFACE_VERSION",
]
