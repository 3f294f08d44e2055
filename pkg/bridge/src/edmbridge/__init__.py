"""Bridge from latent files (CSLT) to image files (CSIM).

Reads latent batches produced by the dataset toolkit, pushes them
through a score-based generative model with a deterministic
probability-flow sampler, and writes the resulting images back in the
toolkit's image format.  The two sides share nothing but the byte-exact
file formats.
"""

from .bridge import BridgeConfig, generate, preview_grid
from .errors import BridgeError, FormatError, InvalidArgumentError, ModelError
from .formats import read_latents, read_images, validate_file, write_images
from .model import load_checkpoint, make_demo_checkpoint
from .sampler import heun_sample, sigma_schedule

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "FormatError",
    "InvalidArgumentError",
    "ModelError",
    "generate",
    "preview_grid",
    "read_latents",
    "read_images",
    "validate_file",
    "write_images",
    "load_checkpoint",
    "make_demo_checkpoint",
    "heun_sample",
    "sigma_schedule",
    "__version__",
]
