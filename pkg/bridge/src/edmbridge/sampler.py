"""Deterministic probability-flow sampling with Heun's method.

No fresh noise enters after the initial latent, so the sampler realizes
a deterministic function from latent (and label) to image.  The noise
scales follow the standard rho-warped schedule ending at exactly zero.
"""

from __future__ import annotations

import numpy as np
import torch

from .errors import InvalidArgumentError

SIGMA_MIN_DEFAULT = 0.002
SIGMA_MAX_DEFAULT = 80.0
RHO_DEFAULT = 7.0
STEPS_DEFAULT = 18


def sigma_schedule(steps: int = STEPS_DEFAULT, sigma_min: float = SIGMA_MIN_DEFAULT,
                   sigma_max: float = SIGMA_MAX_DEFAULT,
                   rho: float = RHO_DEFAULT) -> np.ndarray:
    """Decreasing noise levels: steps values from sigma_max to sigma_min,
    then a final exact 0 (length steps + 1)."""
    if steps < 2:
        raise InvalidArgumentError(f"steps must be >= 2, got {steps}")
    if not 0.0 < sigma_min < sigma_max:
        raise InvalidArgumentError("need 0 < sigma_min < sigma_max")
    if rho <= 0.0:
        raise InvalidArgumentError(f"rho must be > 0, got {rho}")
    i = np.arange(steps, dtype=np.float64)
    inv = sigma_max ** (1.0 / rho) + i / (steps - 1) * (
        sigma_min ** (1.0 / rho) - sigma_max ** (1.0 / rho))
    return np.append(inv ** rho, 0.0)


@torch.no_grad()
def heun_sample(denoise, latents: torch.Tensor, labels: torch.Tensor,
                sigmas: np.ndarray) -> torch.Tensor:
    """Integrate dx/dsigma = (x - D(x, sigma)) / sigma from sigma_max to 0.

    ``denoise(x, sigma, labels)`` is the preconditioned model.  The
    latent is scaled by the first noise level to form the initial state.
    Second-order (trapezoid) correction everywhere except the final step
    to sigma = 0, where the slope is evaluated only at the current
    level.
    """
    x = latents * float(sigmas[0])
    for sigma, sigma_next in zip(sigmas[:-1], sigmas[1:]):
        sigma = float(sigma)
        sigma_next = float(sigma_next)
        slope = (x - denoise(x, sigma, labels)) / sigma
        x_next = x + (sigma_next - sigma) * slope
        if sigma_next > 0.0:
            slope_next = (x_next - denoise(x_next, sigma_next, labels)) / sigma_next
            x_next = x + (sigma_next - sigma) * 0.5 * (slope + slope_next)
        x = x_next
    return x
