"""Competing hidden Potts models and their priors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gibbsel.lattice import GRAPH_KINDS
from gibbsel.noise import GaussianNoise, KColorSwitch

NOISE_KINDS = ("switch", "gaussian")


@dataclass(frozen=True)
class NoisePrior:
    """Uniform prior on the noise parameter (alpha for switch, sigma for Gaussian).

    ``low == high`` encodes a fixed, known parameter.
    """

    kind: str
    low: float
    high: float
    n_colors: int = 2

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.high < self.low:
            raise ValueError(f"empty noise prior interval ({self.low}, {self.high})")
        if self.kind == "gaussian" and self.low <= 0:
            raise ValueError("sigma prior must be positive")
        if self.kind == "switch" and self.n_colors < 2:
            raise ValueError("switch noise needs at least 2 colors")

    @property
    def fixed(self) -> bool:
        return self.low == self.high

    def sample(self, rng: np.random.Generator) -> float:
        # always consume one draw so record streams do not depend on the prior shape
        u = rng.random()
        return float(self.low + (self.high - self.low) * u)

    def channel(self, value: float):
        if self.kind == "switch":
            return KColorSwitch(value, self.n_colors)
        return GaussianNoise(value)

    def nodes(self, n: int) -> np.ndarray:
        if self.fixed:
            return np.array([self.low])
        return self.low + (self.high - self.low) * (np.arange(n) + 0.5) / n

    def to_dict(self) -> dict:
        return {"kind": self.kind, "low": self.low, "high": self.high, "n_colors": self.n_colors}

    @classmethod
    def from_dict(cls, d: dict) -> "NoisePrior":
        if "value" in d:
            low = high = float(d["value"])
        else:
            low, high = float(d["low"]), float(d["high"])
        return cls(d["kind"], low, high, int(d.get("n_colors", 2)))


@dataclass(frozen=True)
class ModelSpec:
    """One competing model: latent graph, beta prior, noise prior, prior weight."""

    index: int
    graph: str
    beta_low: float
    beta_high: float
    noise: NoisePrior
    n_colors: int = 2
    weight: float = 0.5

    def __post_init__(self):
        if self.graph not in GRAPH_KINDS:
            raise ValueError(f"graph must be one of {GRAPH_KINDS}, got {self.graph!r}")
        if not 0 <= self.beta_low < self.beta_high:
            raise ValueError(f"beta prior must satisfy 0 <= low < high, got ({self.beta_low}, {self.beta_high})")
        if self.n_colors < 2:
            raise ValueError("Potts models need at least 2 colors")
        if self.noise.kind == "switch" and self.noise.n_colors != self.n_colors:
            raise ValueError("switch noise must act on the latent colors")
        if not self.weight > 0:
            raise ValueError("model prior weight must be positive")

    def sample_beta(self, rng: np.random.Generator) -> float:
        return float(self.beta_low + (self.beta_high - self.beta_low) * rng.random())

    def beta_nodes(self, n: int) -> np.ndarray:
        return self.beta_low + (self.beta_high - self.beta_low) * (np.arange(n) + 0.5) / n

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "graph": self.graph,
            "n_colors": self.n_colors,
            "beta": [self.beta_low, self.beta_high],
            "noise": self.noise.to_dict(),
            "weight": self.weight,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        n_colors = int(d.get("n_colors", 2))
        noise = dict(d["noise"])
        noise.setdefault("n_colors", n_colors)
        return cls(
            index=int(d["index"]),
            graph=d["graph"],
            beta_low=float(d["beta"][0]),
            beta_high=float(d["beta"][1]),
            noise=NoisePrior.from_dict(noise),
            n_colors=n_colors,
            weight=float(d.get("weight", 0.5)),
        )


def check_models(models) -> list[ModelSpec]:
    models = list(models)
    if not models:
        raise ValueError("at least one model is required")
    indices = [m.index for m in models]
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate model indices {indices}")
    total = sum(m.weight for m in models)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"model prior weights must sum to 1, got {total}")
    return models


def sample_prior(spec: ModelSpec, rng: np.random.Generator) -> tuple[float, float]:
    """Draw ``(noise parameter, beta)`` from the model's uniform priors."""
    noise_param = spec.noise.sample(rng)
    beta = spec.sample_beta(rng)
    return noise_param, beta


def preset_models(experiment: int) -> list[ModelSpec]:
    """G4-vs-G8 model pairs of the three reference experiments."""
    if experiment == 1:
        noise = NoisePrior("switch", 0.42, 2.3, 2)
        return [ModelSpec(1, "G4", 0.0, 1.0, noise, 2, 0.5), ModelSpec(2, "G8", 0.0, 0.35, noise, 2, 0.5)]
    if experiment == 2:
        noise = NoisePrior("switch", 1.78, 4.8, 16)
        return [ModelSpec(1, "G4", 0.0, 2.4, noise, 16, 0.5), ModelSpec(2, "G8", 0.0, 1.0, noise, 16, 0.5)]
    if experiment == 3:
        noise = NoisePrior("gaussian", 0.39, 0.39)
        return [ModelSpec(1, "G4", 0.0, 1.0, noise, 2, 0.5), ModelSpec(2, "G8", 0.0, 0.35, noise, 2, 0.5)]
    raise ValueError(f"experiment must be 1, 2 or 3, got {experiment}")
