"""Score network with noise-dependent preconditioning, plus checkpoint IO.

The denoiser D(x, sigma) wraps a small convolutional core F with the
standard variance-preserving skip scalings

    D(x, sigma) = c_skip * x + c_out * F(c_in * x, c_noise, y)
    c_skip = sd^2 / (sigma^2 + sd^2)        c_out = sigma * sd / sqrt(sigma^2 + sd^2)
    c_in   = 1 / sqrt(sigma^2 + sd^2)       c_noise = ln(sigma) / 4

with sd the data standard deviation.  Images live in [-1, 1] inside the
model and are mapped to [0, 1] only at the file boundary.
"""

from __future__ import annotations

import math
import pickle
import zipfile
from pathlib import Path

import torch
from torch import nn

from .errors import ModelError

CHECKPOINT_KIND = "edm-bridge-checkpoint"
CHECKPOINT_VERSION = 1
SIGMA_DATA = 0.5


class ScoreCore(nn.Module):
    """Three-layer conv core with additive noise/class conditioning."""

    def __init__(self, channels: int, n_classes: int, base_channels: int = 32,
                 emb_dim: int = 32):
        super().__init__()
        self.noise_embed = nn.Linear(1, emb_dim)
        self.class_embed = nn.Embedding(n_classes, emb_dim)
        self.cond_proj = nn.Linear(emb_dim, base_channels)
        self.conv_in = nn.Conv2d(channels, base_channels, 3, padding=1)
        self.norm1 = nn.GroupNorm(4, base_channels)
        self.conv_mid = nn.Conv2d(base_channels, base_channels, 3, padding=1)
        self.norm2 = nn.GroupNorm(4, base_channels)
        self.conv_out = nn.Conv2d(base_channels, channels, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x: torch.Tensor, c_noise: torch.Tensor,
                labels: torch.Tensor) -> torch.Tensor:
        emb = self.act(self.noise_embed(c_noise[:, None]) + self.class_embed(labels))
        cond = self.cond_proj(emb)[:, :, None, None]
        h = self.act(self.norm1(self.conv_in(x) + cond))
        h = self.act(self.norm2(self.conv_mid(h)))
        return self.conv_out(h)


class Denoiser(nn.Module):
    """Preconditioned denoiser; callable as D(x, sigma, labels)."""

    def __init__(self, core: ScoreCore, sigma_data: float = SIGMA_DATA):
        super().__init__()
        self.core = core
        self.sigma_data = sigma_data

    def forward(self, x: torch.Tensor, sigma: float,
                labels: torch.Tensor) -> torch.Tensor:
        sd2 = self.sigma_data ** 2
        denom = sigma * sigma + sd2
        c_skip = sd2 / denom
        c_out = sigma * self.sigma_data / math.sqrt(denom)
        c_in = 1.0 / math.sqrt(denom)
        c_noise = torch.full((x.shape[0],), math.log(sigma) / 4.0,
                             dtype=x.dtype, device=x.device)
        return c_skip * x + c_out * self.core(c_in * x, c_noise, labels)


def make_demo_checkpoint(path, seed: int = 0, height: int = 32, width: int = 32,
                         channels: int = 3, n_classes: int = 10,
                         base_channels: int = 32) -> dict:
    """Write a checkpoint with seeded random weights.

    A stand-in for a trained model: the weights carry no learned
    structure, but the latent-to-image mapping is still a fixed,
    deterministic, continuous function, which is all the pipeline
    contract needs.  Returns the metadata stored alongside the weights.
    """
    torch.manual_seed(seed)
    core = ScoreCore(channels, n_classes, base_channels=base_channels)
    meta = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "height": height,
        "width": width,
        "channels": channels,
        "n_classes": n_classes,
        "base_channels": base_channels,
        "sigma_data": SIGMA_DATA,
    }
    torch.save({**meta, "state_dict": core.state_dict()}, str(path))
    return meta


def load_checkpoint(path, device: str = "cpu") -> tuple[Denoiser, dict]:
    """Load a checkpoint onto a device; returns (denoiser, metadata)."""
    path = Path(path)
    if not path.exists():
        raise ModelError(f"checkpoint not found: {path}")
    try:
        dev = torch.device(device)
        blob = torch.load(str(path), map_location=dev, weights_only=True)
    except (RuntimeError, ValueError, OSError, pickle.UnpicklingError,
            zipfile.BadZipFile, EOFError) as exc:
        raise ModelError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("kind") != CHECKPOINT_KIND:
        raise ModelError(f"{path} is not a bridge checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {blob.get('version')}")

    core = ScoreCore(blob["channels"], blob["n_classes"],
                     base_channels=blob["base_channels"])
    try:
        core.load_state_dict(blob["state_dict"])
    except RuntimeError as exc:
        raise ModelError(f"checkpoint weights do not fit the architecture: {exc}") from exc
    denoiser = Denoiser(core, sigma_data=blob["sigma_data"]).to(dev)
    denoiser.eval()
    meta = {k: v for k, v in blob.items() if k != "state_dict"}
    return denoiser, meta
