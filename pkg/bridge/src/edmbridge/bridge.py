"""Latents-to-images pipeline: read CSLT, sample, write CSIM."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import InvalidArgumentError, ModelError
from .formats import read_images, read_latents, write_images
from .model import load_checkpoint
from .sampler import (
    RHO_DEFAULT,
    SIGMA_MAX_DEFAULT,
    SIGMA_MIN_DEFAULT,
    STEPS_DEFAULT,
    heun_sample,
    sigma_schedule,
)

TRUNCATION_FAMILY_CODE = 3
TRUNCATION_ARTIFACT_RADIUS = 1.0


@dataclass
class BridgeConfig:
    checkpoint: Path
    latents_in: Path
    images_out: Path
    steps: int = STEPS_DEFAULT
    batch_size: int = 64
    device: str = "cpu"
    sigma_min: float = SIGMA_MIN_DEFAULT
    sigma_max: float = SIGMA_MAX_DEFAULT
    rho: float = RHO_DEFAULT
    deterministic: bool = True
    extra_warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        # steps/sigma bounds are validated by the schedule constructor
        sigma_schedule(self.steps, self.sigma_min, self.sigma_max, self.rho)


def _content_hash(path) -> str:
    return hashlib.blake2b(Path(path).read_bytes(), digest_size=8).hexdigest()


def generate(cfg: BridgeConfig) -> dict:
    """Materialize one image per latent, order and labels preserved.

    Returns a report dict (also written as a JSON sidecar next to the
    output) with the output hash and any warnings.  With
    ``deterministic`` set, the torch runtime is pinned to single-thread
    deterministic kernels so reruns are bitwise identical.
    """
    if cfg.deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)

    denoiser, meta = load_checkpoint(cfg.checkpoint, cfg.device)
    latent = read_latents(cfg.latents_in)

    h, w, c = meta["height"], meta["width"], meta["channels"]
    expected_dim = h * w * c
    if latent.dim != expected_dim:
        raise InvalidArgumentError(
            f"latent dimension {latent.dim} does not match the model's "
            f"{h}x{w}x{c} = {expected_dim}")
    if int(latent.labels.max()) >= meta["n_classes"]:
        raise InvalidArgumentError(
            f"label {int(latent.labels.max())} outside the model's "
            f"{meta['n_classes']} classes")

    warnings = list(cfg.extra_warnings)
    if (latent.family_code == TRUNCATION_FAMILY_CODE
            and latent.param > TRUNCATION_ARTIFACT_RADIUS):
        warnings.append(
            f"truncation radius {latent.param:g} amplifies the prior beyond "
            f"its training range; expect strong artifacts")

    try:
        device = torch.device(cfg.device)
        torch.empty(1, device=device)
    except (RuntimeError, AssertionError) as exc:
        raise ModelError(f"device {cfg.device!r} unavailable: {exc}") from exc

    sigmas = sigma_schedule(cfg.steps, cfg.sigma_min, cfg.sigma_max, cfg.rho)
    out_chunks = []
    for start in range(0, latent.count, cfg.batch_size):
        stop = min(start + cfg.batch_size, latent.count)
        z = latent.values[start:stop].reshape(stop - start, h, w, c)
        z = torch.from_numpy(np.ascontiguousarray(z.transpose(0, 3, 1, 2))).to(device)
        labels = torch.from_numpy(latent.labels[start:stop]).to(device)
        x = heun_sample(denoiser, z, labels, sigmas)
        images = (x.clamp(-1.0, 1.0) + 1.0) * 0.5  # model range [-1,1] -> file range [0,1]
        out_chunks.append(images.permute(0, 2, 3, 1).cpu().numpy())

    images = np.concatenate(out_chunks, axis=0)
    n_clamped = write_images(images, latent.labels, cfg.images_out)
    if n_clamped:
        warnings.append(f"{n_clamped} values clamped into [0, 1] on write")

    report = {
        "n": latent.count,
        "height": h,
        "width": w,
        "channels": c,
        "family": latent.family,
        "param": latent.param,
        "steps": cfg.steps,
        "out": str(cfg.images_out),
        "out_hash": _content_hash(cfg.images_out),
        "warnings": warnings,
    }
    sidecar = Path(cfg.images_out).with_suffix(
        Path(cfg.images_out).suffix + ".report.json")
    sidecar.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def preview_grid(csim_path, rows: int, cols: int, out_path) -> None:
    """Tile the first rows*cols images into a PNG for visual inspection.

    PNG compression is lossless on the 8-bit grid; the quantization from
    float32 is the only precision loss, acceptable for a human-facing
    preview (the CSIM file remains the exact record).
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError("rows and cols must be >= 1")
    images, _ = read_images(csim_path)
    n, h, w, c = images.shape
    if n < rows * cols:
        raise InvalidArgumentError(
            f"grid needs {rows * cols} images, file has {n}")
    if c not in (1, 3):
        raise InvalidArgumentError(f"preview supports 1 or 3 channels, got {c}")

    tiles = images[: rows * cols].reshape(rows, cols, h, w, c)
    grid = tiles.transpose(0, 2, 1, 3, 4).reshape(rows * h, cols * w, c)
    raster = np.round(grid * 255.0).astype(np.uint8)
    if c == 1:
        raster = raster[:, :, 0]
    Image.fromarray(raster).save(Path(out_path), format="PNG")
