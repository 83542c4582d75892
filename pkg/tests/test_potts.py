import itertools
import math

import numpy as np
import pytest
from scipy import stats

from gibbsel.exceptions import CapacityError, UnsupportedChannelError
from gibbsel.lattice import build_graph, monochrome_edge_count
from gibbsel.models import ModelSpec, NoisePrior, preset_models
from gibbsel.noise import KColorSwitch, noise_log_density
from gibbsel.potts import (
    PottsSpec,
    config_to_field,
    default_sweeps,
    edge_count_spectrum,
    exact_distribution,
    exact_model_posterior,
    field_to_config,
    partition_function,
    swendsen_wang_sample,
    swendsen_wang_sweep,
)


def brute_force_weights(shape, kind, k, beta):
    """Unnormalized Potts weights by itertools enumeration, site 0 least significant."""
    g = build_graph(shape, kind)
    n = g.n_sites
    weights = {}
    for digits in itertools.product(range(k), repeat=n):
        colors = np.array(digits).reshape(shape)
        idx = sum(int(c) * k**i for i, c in enumerate(colors.ravel()))
        weights[idx] = math.exp(beta * monochrome_edge_count(g, colors))
    return np.array([weights[i] for i in range(k**n)])


def test_partition_closed_forms():
    g4, g8 = build_graph((2, 2), "G4"), build_graph((2, 2), "G8")
    assert partition_function(PottsSpec(g4, 2, 0.0)) == pytest.approx(16, abs=1e-12)
    z4 = 2 * math.e**2 + 12 * math.e + 2
    z8 = 2 * math.e**3 + 8 * math.e**1.5 + 6 * math.e
    assert partition_function(PottsSpec(g4, 2, 0.5)) == pytest.approx(z4, abs=1e-9)
    assert partition_function(PottsSpec(g8, 2, 0.5)) == pytest.approx(z8, abs=1e-9)
    assert z4 == pytest.approx(49.397, abs=1e-3)
    assert z8 == pytest.approx(92.334, abs=1e-3)


def test_spectra():
    assert edge_count_spectrum(build_graph((2, 2), "G4"), 2).tolist() == [2, 0, 12, 0, 2]
    assert edge_count_spectrum(build_graph((2, 2), "G8"), 2).tolist() == [0, 0, 6, 8, 0, 0, 2]


@pytest.mark.parametrize("shape, kind, k", [((2, 2), "G4", 2), ((2, 3), "G8", 2), ((2, 2), "G8", 3), ((1, 3), "G4", 4)])
def test_z_at_zero_is_k_to_n(shape, kind, k):
    spec = PottsSpec(build_graph(shape, kind), k, 0.0)
    assert partition_function(spec) == pytest.approx(k ** (shape[0] * shape[1]), rel=1e-12)


@pytest.mark.parametrize("shape, kind, k, beta", [((2, 2), "G4", 2, 0.5), ((2, 3), "G8", 3, 0.3), ((3, 3), "G4", 2, 0.4)])
def test_exact_distribution_matches_brute_force(shape, kind, k, beta):
    table = exact_distribution(PottsSpec(build_graph(shape, kind), k, beta))
    w = brute_force_weights(shape, kind, k, beta)
    assert np.allclose(table.probabilities, w / w.sum(), rtol=1e-12, atol=0)
    assert table.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert table.z == pytest.approx(w.sum(), rel=1e-12)


def test_all_equal_probability():
    table = exact_distribution(PottsSpec(build_graph((2, 2), "G4"), 2, 0.5))
    assert table.probabilities[0] == pytest.approx(math.e**2 / 49.397, rel=1e-4)
    assert table.probabilities[0] == pytest.approx(0.14958, abs=1e-5)


def test_uniform_at_zero_beta():
    table = exact_distribution(PottsSpec(build_graph((2, 3), "G8"), 3, 0.0))
    assert np.allclose(table.probabilities, 3.0**-6)


def test_capacity_error():
    spec = PottsSpec(build_graph((5, 5), "G4"), 2, 0.3)
    with pytest.raises(CapacityError, match="cap"):
        partition_function(spec)
    with pytest.raises(CapacityError):
        exact_distribution(PottsSpec(build_graph((2, 2), "G4"), 2, 0.3), cap=8)


def test_expected_edge_count_monotone_in_beta():
    g = build_graph((3, 3), "G8")
    means = [exact_distribution(PottsSpec(g, 2, b)).expected_edge_count() for b in np.linspace(0, 2, 21)]
    assert np.all(np.diff(means) >= 0)


def test_config_roundtrip():
    idx = np.arange(3**4)
    fields = config_to_field(idx, 3, (2, 2))
    assert np.array_equal(field_to_config(fields, 3), idx)
    assert fields[1].ravel().tolist() == [1, 0, 0, 0]


def test_invalid_spec():
    g = build_graph((2, 2), "G4")
    with pytest.raises(ValueError):
        PottsSpec(g, 1, 0.1)
    with pytest.raises(ValueError):
        PottsSpec(g, 2, -0.1)
    with pytest.raises(ValueError):
        swendsen_wang_sample(PottsSpec(g, 2, 0.1), 0, np.random.default_rng(0))


def test_sw_beta_zero_is_uniform():
    spec = PottsSpec(build_graph((20, 20), "G8"), 4, 0.0)
    field = swendsen_wang_sample(spec, 3, np.random.default_rng(1))
    freq = np.bincount(field.ravel(), minlength=4) / field.size
    assert np.all(np.abs(freq - 0.25) < 0.06)
    many = swendsen_wang_sample(spec, 1, np.random.default_rng(2), size=200)
    freq = np.bincount(many.ravel(), minlength=4) / many.size
    assert np.all(np.abs(freq - 0.25) < 0.005)


def test_sw_deterministic():
    spec = PottsSpec(build_graph((16, 16), "G4"), 2, 0.7)
    a = swendsen_wang_sample(spec, 50, np.random.default_rng(42))
    b = swendsen_wang_sample(spec, 50, np.random.default_rng(42))
    assert np.array_equal(a, b)
    assert a.shape == (16, 16) and set(np.unique(a)) <= {0, 1}


@pytest.mark.parametrize("shape, kind, beta", [((2, 2), "G4", 0.8), ((2, 2), "G8", 0.5), ((3, 3), "G4", 0.4)])
def test_sw_one_sweep_stationary(shape, kind, beta):
    spec = PottsSpec(build_graph(shape, kind), 2, beta)
    table = exact_distribution(spec)
    n_draws = 60_000
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        states = table.sample(n_draws, rng).reshape(n_draws, -1).astype(np.int64)
        swendsen_wang_sweep(spec, states, rng, 1)
        counts = np.bincount(field_to_config(states.reshape((n_draws,) + shape), 2), minlength=table.probabilities.size)
        expected = n_draws * table.probabilities
        # pool sparse cells so the chi-square approximation holds
        sparse = expected < 5
        obs = np.append(counts[~sparse], counts[sparse].sum())
        exp = np.append(expected[~sparse], expected[sparse].sum())
        if exp[-1] == 0:
            obs, exp = obs[:-1], exp[:-1]
        assert stats.chisquare(obs, exp).pvalue > 0.001


def test_default_sweeps():
    assert default_sweeps(100) == 2000
    assert default_sweeps(16) == 1000
    assert default_sweeps(100 * 100) == 20000


# -- exact posterior ----------------------------------------------------------------


def brute_force_evidence(y, model, nodes):
    shape = y.shape
    g = build_graph(shape, model.graph)
    k = model.n_colors
    configs = list(itertools.product(range(k), repeat=y.size))
    r = np.array([monochrome_edge_count(g, np.array(c).reshape(shape)) for c in configs])
    total = 0.0
    for beta in model.beta_nodes(nodes):
        w = np.exp(beta * r)
        pi = w / w.sum()
        for alpha in model.noise.nodes(nodes):
            ch = KColorSwitch(alpha, k)
            lik = np.array(
                [math.exp(sum(noise_log_density(yi, xi, ch) for yi, xi in zip(y.ravel(), c))) for c in configs]
            )
            total += pi @ lik
    return total / (len(model.beta_nodes(nodes)) * len(model.noise.nodes(nodes)))


def test_posterior_matches_brute_force():
    models = preset_models(1)
    y = np.array([[0, 1], [1, 1]])
    post = exact_model_posterior(y, models, nodes=3)
    ev = np.array([brute_force_evidence(y, m, 3) for m in models])
    assert np.allclose(np.exp(post.log_evidence), ev, rtol=1e-10)
    assert np.allclose(post.probabilities, ev / ev.sum(), rtol=1e-10)


def test_posterior_identical_models():
    m = preset_models(1)[0]
    models = [m, ModelSpec(2, m.graph, m.beta_low, m.beta_high, m.noise, 2, 0.5)]
    post = exact_model_posterior(np.array([[0, 1, 1], [0, 0, 1]]), models, nodes=8)
    assert np.allclose(post.probabilities, [0.5, 0.5], atol=1e-12)
    assert post.map_model == 1


def test_posterior_sums_to_one_and_relabel_invariant():
    models = preset_models(1)
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = rng.integers(0, 2, size=(3, 3))
        post = exact_model_posterior(y, models, nodes=16)
        assert post.probabilities.sum() == pytest.approx(1.0, abs=1e-10)
        swapped = [
            ModelSpec(7, models[1].graph, models[1].beta_low, models[1].beta_high, models[1].noise, 2, 0.5),
            ModelSpec(3, models[0].graph, models[0].beta_low, models[0].beta_high, models[0].noise, 2, 0.5),
        ]
        post2 = exact_model_posterior(y, swapped, nodes=16)
        assert np.allclose(post.probabilities, post2.probabilities[::-1], atol=1e-14)


def test_posterior_quadrature_converges():
    post = exact_model_posterior(np.array([[0, 0, 1], [0, 1, 1], [1, 1, 1]]), preset_models(1), check_convergence=True)
    assert post.quadrature_delta < 1e-3


def test_posterior_rejects_continuous():
    with pytest.raises(UnsupportedChannelError):
        exact_model_posterior(np.array([[0, 1], [1, 0]]), preset_models(3))
    with pytest.raises(UnsupportedChannelError):
        exact_model_posterior(np.array([[0.2, 1.1], [1.0, 0.0]]), preset_models(1))


def test_posterior_k_colors():
    noise = NoisePrior("switch", 1.0, 2.0, 3)
    models = [ModelSpec(1, "G4", 0.0, 1.0, noise, 3, 0.3), ModelSpec(2, "G8", 0.0, 0.5, noise, 3, 0.7)]
    y = np.array([[0, 2], [1, 1]])
    post = exact_model_posterior(y, models, nodes=2)
    ev = np.array([brute_force_evidence(y, m, 2) for m in models])
    w = np.array([0.3, 0.7]) * ev
    assert np.allclose(post.probabilities, w / w.sum(), rtol=1e-10)
