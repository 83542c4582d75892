"""Potts model simulation and exact small-lattice oracles.

The Potts distribution on a graph G with K colors puts mass proportional to
``exp(beta * R(G, x))`` on each configuration, ``R`` counting monochrome
edges. Simulation uses Swendsen-Wang cluster sweeps. On lattices small
enough to enumerate (``K**N`` at most ``ENUMERATION_CAP``) the partition
function, the full distribution and exact model posteriors are available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from gibbsel import _kernels
from gibbsel.exceptions import CapacityError, UnsupportedChannelError
from gibbsel.lattice import NeighborhoodGraph, build_graph
from gibbsel.models import ModelSpec, check_models
from gibbsel.noise import keep_probability, other_color_probability

ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class PottsSpec:
    graph: NeighborhoodGraph
    n_colors: int
    beta: float

    def __post_init__(self):
        if int(self.n_colors) < 2:
            raise ValueError(f"Potts model needs K >= 2, got {self.n_colors}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be a finite nonnegative number, got {self.beta}")

    @property
    def bond_probability(self) -> float:
        return -math.expm1(-self.beta)


def default_sweeps(n_sites: int) -> int:
    return int(max(1000, round(2 * math.sqrt(n_sites) * 100)))


def _edge_arrays(graph: NeighborhoodGraph):
    return np.ascontiguousarray(graph.edges[:, 0]), np.ascontiguousarray(graph.edges[:, 1])


def swendsen_wang_sample(spec: PottsSpec, iterations: int, rng: np.random.Generator, size: int | None = None):
    """Draw a field by ``iterations`` Swendsen-Wang sweeps from a uniform start.

    With ``size`` given, returns ``size`` independent chains stacked as
    ``(size, height, width)``.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    n = spec.graph.n_sites
    m = 1 if size is None else int(size)
    states = rng.integers(0, spec.n_colors, size=(m, n)).astype(np.int64)
    swendsen_wang_sweep(spec, states, rng, iterations)
    shape = spec.graph.shape.as_tuple()
    if size is None:
        return states.reshape(shape)
    return states.reshape((m,) + shape)


def swendsen_wang_sweep(spec: PottsSpec, states: np.ndarray, rng: np.random.Generator, n_sweeps: int = 1) -> None:
    """Apply sweeps in place to a ``(chains, sites)`` int64 array."""
    eu, ev = _edge_arrays(spec.graph)
    _kernels.sw_sweeps(states, eu, ev, spec.bond_probability, int(spec.n_colors), int(n_sweeps), rng)


# -- exact enumeration -----------------------------------------------------------


def _check_cap(n_sites: int, n_colors: int, cap: int) -> None:
    # compare in logs to avoid building huge integers for large lattices
    if n_sites * math.log(n_colors) > math.log(cap) + 1e-9:
        raise CapacityError(
            f"{n_colors}**{n_sites} configurations exceed the enumeration cap of {cap}"
        )


@lru_cache(maxsize=16)
def _edge_counts(height: int, width: int, kind: str, n_colors: int) -> np.ndarray:
    graph = build_graph((height, width), kind)
    eu, ev = _edge_arrays(graph)
    counts = _kernels.enumerate_edge_counts(graph.n_sites, n_colors, eu, ev)
    counts.setflags(write=False)
    return counts


def edge_counts(graph: NeighborhoodGraph, n_colors: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``R(G, x)`` for every configuration, in base-K enumeration order."""
    _check_cap(graph.n_sites, n_colors, cap)
    return _edge_counts(graph.shape.height, graph.shape.width, graph.kind, int(n_colors))


def edge_count_spectrum(graph: NeighborhoodGraph, n_colors: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Number of configurations with each monochrome edge count 0..|E|."""
    return np.bincount(edge_counts(graph, n_colors, cap), minlength=graph.n_edges + 1)


def log_partition_function(spec: PottsSpec, cap: int = ENUMERATION_CAP) -> float:
    spectrum = edge_count_spectrum(spec.graph, spec.n_colors, cap)
    r = np.nonzero(spectrum)[0]
    return float(logsumexp(spec.beta * r, b=spectrum[r]))


def partition_function(spec: PottsSpec, cap: int = ENUMERATION_CAP) -> float:
    """Partition function by exhaustive enumeration of all K**N configurations."""
    return math.exp(log_partition_function(spec, cap))


def config_to_field(index, n_colors: int, shape) -> np.ndarray:
    """Decode configuration indices (site 0 = least significant digit)."""
    index = np.asarray(index, dtype=np.int64)
    h, w = shape
    powers = n_colors ** np.arange(h * w, dtype=np.int64)
    digits = (index[..., None] // powers) % n_colors
    return digits.reshape(index.shape + (h, w))


def field_to_config(field, n_colors: int) -> np.ndarray:
    field = np.asarray(field, dtype=np.int64)
    n = field.shape[-2] * field.shape[-1]
    flat = field.reshape(field.shape[:-2] + (n,))
    powers = n_colors ** np.arange(n, dtype=np.int64)
    return flat @ powers


@dataclass(frozen=True, eq=False)
class ExactPottsTable:
    spec: PottsSpec
    probabilities: np.ndarray
    log_z: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Exact iid draws by inverse CDF, as ``(size, height, width)`` fields."""
        cdf = np.cumsum(self.probabilities)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        idx = np.minimum(idx, cdf.size - 1)
        return config_to_field(idx, self.spec.n_colors, self.spec.graph.shape.as_tuple())

    def expected_edge_count(self) -> float:
        r = edge_counts(self.spec.graph, self.spec.n_colors)
        return float(self.probabilities @ r)


def exact_distribution(spec: PottsSpec, cap: int = ENUMERATION_CAP) -> ExactPottsTable:
    r = edge_counts(spec.graph, spec.n_colors, cap)
    log_z = log_partition_function(spec, cap)
    probs = np.exp(spec.beta * r - log_z)
    return ExactPottsTable(spec, probs, log_z)


# -- exact model posterior ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExactPosterior:
    models: tuple[int, ...]
    probabilities: np.ndarray
    log_evidence: np.ndarray
    quadrature_delta: float | None = None

    @property
    def map_model(self) -> int:
        # ties go to the first listed model
        return self.models[int(np.argmax(self.probabilities))]


def _log_evidence(model: ModelSpec, shape, agree: np.ndarray, nodes: int, cap: int) -> float:
    graph = build_graph(shape, model.graph)
    n = graph.n_sites
    r = edge_counts(graph, model.n_colors, cap)
    hist = np.bincount(r.astype(np.int64) * (n + 1) + agree, minlength=(graph.n_edges + 1) * (n + 1))
    hist = hist.reshape(graph.n_edges + 1, n + 1)
    with np.errstate(divide="ignore"):
        log_hist = np.log(hist)
    spectrum = hist.sum(axis=1)
    r_vals = np.arange(graph.n_edges + 1)
    support = spectrum > 0

    betas = model.beta_nodes(nodes)
    # log Z(beta) for each node from the edge-count spectrum
    log_z = logsumexp(betas[:, None] * r_vals[None, support], b=spectrum[None, support], axis=1)
    latent = betas[:, None] * r_vals[None, :] - log_z[:, None]  # (beta node, r)
    by_beta = logsumexp(latent[:, :, None] + log_hist[None, :, :], axis=1)  # (beta node, a)

    alphas = model.noise.nodes(nodes)
    a_vals = np.arange(n + 1)
    log_keep = np.log([keep_probability(a, model.n_colors) for a in alphas])
    log_other = np.log([other_color_probability(a, model.n_colors) for a in alphas])
    obs = log_keep[:, None] * a_vals[None, :] + log_other[:, None] * (n - a_vals)[None, :]  # (alpha node, a)

    total = logsumexp(by_beta[:, None, :] + obs[None, :, :])
    return float(total - math.log(len(betas) * len(alphas)))


def exact_model_posterior(
    y_obs,
    models,
    nodes: int = 32,
    cap: int = ENUMERATION_CAP,
    check_convergence: bool = False,
) -> ExactPosterior:
    """Posterior model probabilities by enumeration of the latent field.

    Each evidence integrates the hidden Potts likelihood over the uniform
    (noise, beta) prior with a midpoint rule of ``nodes`` points per axis.
    With ``check_convergence`` the computation is repeated at twice the node
    count and the largest posterior change is reported.
    """
    models = check_models(models)
    y = np.asarray(y_obs)
    if not np.issubdtype(y.dtype, np.integer):
        raise UnsupportedChannelError("exact posterior requires a discrete observation")
    for m in models:
        if m.noise.kind != "switch":
            raise UnsupportedChannelError(f"model {m.index}: continuous noise is not supported by the exact oracle")
    n_colors = {m.n_colors for m in models}
    if len(n_colors) != 1:
        raise ValueError("all models must share the number of colors")
    (k,) = n_colors
    if y.min() < 0 or y.max() >= k:
        raise ValueError("observed colors out of range")
    _check_cap(y.size, k, cap)
    agree = _kernels.enumerate_agreements(k, np.ascontiguousarray(y.ravel(), dtype=np.int64)).astype(np.int64)

    def posterior(n_nodes):
        log_ev = np.array([_log_evidence(m, y.shape, agree, n_nodes, cap) for m in models])
        log_w = np.log([m.weight for m in models]) + log_ev
        return np.exp(log_w - logsumexp(log_w)), log_ev

    probs, log_ev = posterior(nodes)
    delta = None
    if check_convergence:
        probs2, _ = posterior(2 * nodes)
        delta = float(np.max(np.abs(probs2 - probs)))
    return ExactPosterior(tuple(m.index for m in models), probs, log_ev, delta)
