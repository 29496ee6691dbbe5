"""Graph simulation: conditional moments, masking, determinism."""

import math

import numpy as np
import pytest

from sbmiss.model import Assignment, is_c_regular, params_from_means
from sbmiss.sampling import MaskDesign
from sbmiss.simulate import sample_assignment, sample_graph, simulate_observed


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.fixture
def bern():
    return params_from_means("bernoulli", [0.5, 0.5], [[0.7, 0.2], [0.2, 0.7]])


def test_degenerate_proportions_give_constant_labels():
    z = sample_assignment([1.0, 0.0], 50, rng(0))
    assert np.all(z.labels == 0)


def test_assignment_frequencies_match_proportions():
    z = sample_assignment([0.5, 0.5], 10_000, rng(1))
    assert abs(z.proportions()[0] - 0.5) < 0.02


def test_assignment_regular_with_high_probability():
    props = np.array([0.3, 0.7])
    z = sample_assignment(props, 400, rng(2))
    assert is_c_regular(z, float(props.min()) / 2)


def test_saturated_bernoulli_is_deterministic_block_pattern():
    params = params_from_means("bernoulli", [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    z = Assignment(np.repeat([0, 1], 20), 2)
    vals = sample_graph(params, z, rng(3))
    same = z.labels[:, None] == z.labels[None, :]
    off = ~np.eye(40, dtype=bool)
    assert np.all(vals[same & off] == 1.0)
    assert np.all(vals[~same] == 0.0)
    assert np.all(np.isnan(np.diag(vals)))


def test_poisson_cell_means_within_clt_band():
    params = params_from_means("poisson", [0.5, 0.5], [[8.0, 1.0], [1.0, 8.0]])
    z = Assignment(np.repeat([0, 1], 150), 2)
    vals = sample_graph(params, z, rng(4))
    off = ~np.eye(300, dtype=bool)
    for q in range(2):
        for l in range(2):
            cell = (z.labels[:, None] == q) & (z.labels[None, :] == l) & off
            mean = params.mean_matrix()[q, l]
            draws = vals[cell]
            se = math.sqrt(mean / draws.size)
            assert abs(draws.mean() - mean) <= 4 * se


def test_gaussian_cell_variance_is_unit():
    params = params_from_means("gaussian", [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    z = Assignment(np.repeat([0, 1], 100), 2)
    vals = sample_graph(params, z, rng(5))
    off = ~np.eye(200, dtype=bool)
    cell = (z.labels[:, None] == 0) & (z.labels[None, :] == 0) & off
    assert abs(vals[cell].var(ddof=1) - 1.0) < 0.1


def test_symmetric_graph_mode():
    params = params_from_means("gaussian", [1.0], [[0.5]])
    z = Assignment(np.zeros(20, dtype=int), 1)
    vals = sample_graph(params, z, rng(6), symmetric=True)
    off = ~np.eye(20, dtype=bool)
    assert np.array_equal(vals[off], vals.T[off])


def test_full_observation_reproduces_graph(bern):
    g, truth = simulate_observed(bern, MaskDesign.random_dyad(1.0), 30, seed=7)
    off = ~np.eye(30, dtype=bool)
    assert np.array_equal(g.values[off], truth.full_values[off])


def test_simulation_is_deterministic(bern):
    g1, t1 = simulate_observed(bern, MaskDesign.random_dyad(0.4), 25, seed=42)
    g2, t2 = simulate_observed(bern, MaskDesign.random_dyad(0.4), 25, seed=42)
    assert np.array_equal(t1.z_star.labels, t2.z_star.labels)
    assert np.array_equal(g1.mask.observed, g2.mask.observed)
    assert np.array_equal(
        g1.values[g1.mask.observed], g2.values[g2.mask.observed]
    )


def test_unobserved_values_are_nan(bern):
    g, _ = simulate_observed(bern, MaskDesign.random_dyad(0.3), 20, seed=8)
    assert np.all(np.isnan(g.values[~g.mask.observed]))
    assert np.all(np.isnan(np.diag(g.values)))
    assert np.all(np.isfinite(g.values[g.mask.observed]))


def test_double_standard_biases_observed_density(bern):
    # observing edges more often than non-edges inflates the observed
    # density relative to the full graph: the non-ignorable signature
    design = MaskDesign.double_standard(0.2, 0.9)
    diffs = []
    for rep in range(100):
        g, truth = simulate_observed(bern, design, 40, seed=(9, rep))
        off = ~np.eye(40, dtype=bool)
        full_density = truth.full_values[off].mean()
        obs_density = g.values[g.mask.observed].mean()
        diffs.append(obs_density - full_density)
    assert np.mean(diffs) > 0.1


def test_dyad_mask_uncorrelated_with_values(bern):
    # the random dyad design never reads the graph
    corrs = []
    for rep in range(200):
        g, truth = simulate_observed(bern, MaskDesign.random_dyad(0.5), 30, seed=(10, rep))
        off = ~np.eye(30, dtype=bool)
        r = g.mask.observed[off].astype(float)
        y = truth.full_values[off]
        corrs.append(np.corrcoef(r, y)[0, 1])
    se = np.std(corrs, ddof=1) / math.sqrt(len(corrs))
    assert abs(np.mean(corrs)) <= 4 * se


def test_cell_values_serially_uncorrelated(bern):
    g, truth = simulate_observed(bern, MaskDesign.random_dyad(1.0), 80, seed=11)
    z = truth.z_star.labels
    off = ~np.eye(80, dtype=bool)
    cell = (z[:, None] == 0) & (z[None, :] == 0) & off
    seq = truth.full_values[cell]
    lag1 = np.corrcoef(seq[:-1], seq[1:])[0, 1]
    assert abs(lag1) < 0.1


def test_observed_cell_counts_concentrate_on_their_limit(bern):
    # the normalizer sum_{i!=j} r_ij z_iq z_jl / (n(n-1)) drives the
    # connectivity limit variance; its deviation from rho p_q p_l halves
    # as n quadruples
    rho = 0.4
    params = params_from_means("bernoulli", [0.3, 0.7], [[0.7, 0.2], [0.2, 0.7]])
    target = rho * np.outer(params.props, params.props)
    mean_dev = {}
    for n in (40, 160):
        devs = []
        for rep in range(60):
            g, truth = simulate_observed(
                params, MaskDesign.random_dyad(rho), n, seed=(99, n, rep)
            )
            z = truth.z_star.one_hot()
            den = z.T @ g.mask.observed.astype(float) @ z
            devs.append(np.abs(den / (n * (n - 1)) - target).max())
        mean_dev[n] = float(np.mean(devs))
    assert mean_dev[160] < 0.03
    assert mean_dev[160] <= 0.6 * mean_dev[40]
