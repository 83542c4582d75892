"""Observation channels for hidden Potts fields.

Two families: a K-color switch channel (keep the latent color with
probability ``e^a / (e^a + (K-1) e^-a)``, otherwise pick one of the other
colors uniformly; ``K = 2`` is the plain pixel-flip channel) and additive
homoscedastic Gaussian noise around the integer colors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class KColorSwitch:
    alpha: float
    n_colors: int

    def __post_init__(self):
        if int(self.n_colors) < 2:
            raise ValueError(f"switch noise needs at least 2 colors, got {self.n_colors}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    @property
    def keep_probability(self) -> float:
        return keep_probability(self.alpha, self.n_colors)

    @property
    def change_probability(self) -> float:
        return 1.0 - self.keep_probability


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def _log_normalizer(alpha: float, n_colors: int) -> float:
    # log(e^a + (K-1) e^-a), computed stably for large |alpha|
    return float(np.logaddexp(alpha, -alpha + math.log(n_colors - 1)))


def keep_probability(alpha: float, n_colors: int) -> float:
    return math.exp(alpha - _log_normalizer(alpha, n_colors))


def other_color_probability(alpha: float, n_colors: int) -> float:
    """Probability of observing one given color different from the latent one."""
    return math.exp(-alpha - _log_normalizer(alpha, n_colors))


def apply_kcolor_noise(x, alpha: float, n_colors: int, rng: np.random.Generator) -> np.ndarray:
    """Pass a discrete field through the K-color switch channel."""
    if int(n_colors) < 2:
        raise ValueError(f"switch noise needs at least 2 colors, got {n_colors}")
    x = np.asarray(x)
    if x.size and (x.min() < 0 or x.max() >= n_colors):
        raise ValueError("latent colors out of range")
    p_keep = keep_probability(alpha, n_colors)
    u = rng.random(x.shape)
    shift = rng.integers(1, n_colors, size=x.shape)
    return np.where(u < p_keep, x, (x + shift) % n_colors).astype(np.int64)


def apply_gaussian_noise(x, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x)
    return x.astype(float) + sigma * rng.standard_normal(x.shape)


def apply_noise(x, channel, rng: np.random.Generator) -> np.ndarray:
    if isinstance(channel, KColorSwitch):
        return apply_kcolor_noise(x, channel.alpha, channel.n_colors, rng)
    if isinstance(channel, GaussianNoise):
        return apply_gaussian_noise(x, channel.sigma, rng)
    raise TypeError(f"unknown noise channel {channel!r}")


def noise_log_density(y, x, channel) -> float:
    """Log of the per-site observation density ``P(y | x)``."""
    if isinstance(channel, KColorSwitch):
        if isinstance(y, (float, np.floating)) and not float(y).is_integer():
            raise ValueError("switch noise observes discrete colors")
        y, x = int(y), int(x)
        if not (0 <= y < channel.n_colors and 0 <= x < channel.n_colors):
            raise ValueError("color out of range")
        sign = 1.0 if y == x else -1.0
        return sign * channel.alpha - _log_normalizer(channel.alpha, channel.n_colors)
    if isinstance(channel, GaussianNoise):
        z = (float(y) - float(x)) / channel.sigma
        return -0.5 * z * z - math.log(channel.sigma * math.sqrt(2 * math.pi))
    raise TypeError(f"unknown noise channel {channel!r}")


# -- continuous fields as CSV -------------------------------------------------


def write_field_csv(path, values) -> None:
    values = np.asarray(values, dtype=float)
    lines = [",".join(repr(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> np.ndarray:
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values")
    return values
