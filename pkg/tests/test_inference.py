"""Estimators: closed forms against brute-force oracles, bound
monotonicity, and the exact-enumeration inequalities."""

import math

import numpy as np
import pytest

from oracles import (
    brute_complete_loglik,
    enum_observed_loglik,
    mean_field_kl_to_posterior,
    posterior_over_assignments,
)
from sbmiss.errors import ConfigError, EstimationError, EstimationWarning, SizeError
from sbmiss.families import get_family
from sbmiss.inference import (
    FitConfig,
    complete_log_likelihood,
    complete_mle,
    e_step,
    elbo,
    exact_observed_loglik,
    m_step,
    map_assignment,
    vem_fit,
)
from sbmiss.model import (
    Assignment,
    SbmParams,
    align,
    apply_permutation,
    hamming_distance_up_to_perm,
    param_distance,
    params_from_means,
)
from sbmiss.sampling import Mask, MaskDesign
from sbmiss.simulate import ObservedGraph, simulate_observed


def rng(seed=0):
    return np.random.default_rng(seed)


def bern(props, means):
    return params_from_means("bernoulli", props, means)


def empty_graph(n, family="bernoulli"):
    return ObservedGraph(
        np.full((n, n), np.nan), Mask(np.zeros((n, n), dtype=bool)), family_id=family
    )


def random_instance(seed, n=12, family="bernoulli", rho=0.6):
    gen = rng(seed)
    ranges = {"bernoulli": (0.15, 0.85), "poisson": (0.5, 6.0), "gaussian": (-1.5, 1.5)}
    lo, hi = ranges[family]
    params = params_from_means(
        family, [0.5, 0.5], gen.uniform(lo, hi, (2, 2))
    )
    g, truth = simulate_observed(params, MaskDesign.random_dyad(rho), n, seed=int(gen.integers(1 << 30)))
    tau = gen.dirichlet(np.ones(2), size=n)
    return g, truth, params, tau


# --------------------------------------------------------------------------
# complete log-likelihood
# --------------------------------------------------------------------------


def test_loglik_empty_mask_reduces_to_label_part():
    params = bern([0.3, 0.7], [[0.6, 0.4], [0.2, 0.8]])
    z = Assignment(np.array([0, 1, 1, 0, 1]), 2)
    expected = sum(math.log(params.props[l]) for l in z.labels)
    assert complete_log_likelihood(empty_graph(5), z, params) == pytest.approx(
        expected, abs=1e-12
    )


def test_loglik_single_dyad_hand_expansion():
    params = bern([0.3, 0.7], [[0.6, 0.4], [0.2, 0.8]])
    obs = np.zeros((2, 2), dtype=bool)
    obs[0, 1] = True
    vals = np.full((2, 2), np.nan)
    vals[0, 1] = 1.0
    g = ObservedGraph(vals, Mask(obs), family_id="bernoulli")
    z = Assignment(np.array([0, 1]), 2)
    expected = math.log(0.3) + math.log(0.7) + math.log(0.4)
    assert complete_log_likelihood(g, z, params) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("family", ["bernoulli", "poisson", "gaussian"])
def test_loglik_matches_term_by_term_oracle(family):
    for seed in range(5):
        g, truth, params, _ = random_instance(seed, n=6, family=family)
        got = complete_log_likelihood(g, truth.z_star, params)
        assert got == pytest.approx(brute_complete_loglik(g, truth.z_star, params), abs=1e-12)


# --------------------------------------------------------------------------
# complete-data MLE
# --------------------------------------------------------------------------


def test_mle_constant_cells_recover_exact_parameters():
    fam = get_family("gaussian")
    z = Assignment(np.repeat([0, 1], 3), 2)
    means = np.array([[0.5, -1.0], [2.0, 0.0]])
    vals = means[z.labels[:, None], z.labels[None, :]].astype(float)
    np.fill_diagonal(vals, np.nan)
    obs = ~np.eye(6, dtype=bool)
    g = ObservedGraph(vals, Mask(obs), family_id="gaussian")
    fit = complete_mle(g, z)
    assert np.allclose(fit.conn, fam.natural_from_mean(means), atol=1e-12)
    assert np.allclose(fit.props, [0.5, 0.5])


def test_mle_hand_counted_partial_cell():
    z = Assignment(np.array([0, 0, 1, 1]), 2)
    obs = np.zeros((4, 4), dtype=bool)
    vals = np.full((4, 4), np.nan)
    entries = {
        (0, 1): 1.0, (1, 0): 0.0,          # cell (0,0): mean 1/2
        (2, 3): 1.0, (3, 2): 0.0,          # cell (1,1): mean 1/2
        (2, 0): 1.0, (2, 1): 0.0, (3, 0): 1.0, (3, 1): 1.0,  # cell (1,0): 3/4
        (0, 2): 1.0, (1, 3): 0.0,          # cell (0,1): 2 of 4 dyads observed
    }
    for (i, j), v in entries.items():
        obs[i, j] = True
        vals[i, j] = v
    g = ObservedGraph(vals, Mask(obs), family_id="bernoulli")
    fit = complete_mle(g, z)
    means = fit.mean_matrix()
    assert means[0, 1] == pytest.approx(0.5, abs=1e-9)
    assert means[1, 0] == pytest.approx(0.75, abs=1e-9)
    assert means[0, 0] == pytest.approx(0.5, abs=1e-9)


def test_mle_beats_mean_grid():
    g, truth, _, _ = random_instance(3, n=6)
    fit = complete_mle(g, truth.z_star)
    best = complete_log_likelihood(g, truth.z_star, fit)
    fam = get_family("bernoulli")
    grid = np.arange(0.05, 0.951, 0.05)
    # the likelihood separates over cells, so the best grid matrix is the
    # per-cell argmax
    one_hot = truth.z_star.one_hot()
    obsf = g.mask.observed.astype(float)
    num = one_hot.T @ (g.filled_values() * obsf) @ one_hot
    den = one_hot.T @ obsf @ one_hot
    best_grid_conn = np.empty((2, 2))
    for q in range(2):
        for l in range(2):
            a = fam.natural_from_mean(grid)
            scores = num[q, l] * a - den[q, l] * fam.psi(a)
            best_grid_conn[q, l] = a[np.argmax(scores)]
    grid_params = SbmParams(fit.props, best_grid_conn, "bernoulli")
    assert best >= complete_log_likelihood(g, truth.z_star, grid_params) - 1e-12


def test_mle_empty_cell_falls_back_to_global_mean():
    z = Assignment(np.array([0, 0, 1, 1]), 2)
    obs = np.zeros((4, 4), dtype=bool)
    vals = np.full((4, 4), np.nan)
    for (i, j), v in {(0, 1): 1.0, (1, 0): 1.0, (2, 3): 0.0, (3, 2): 1.0}.items():
        obs[i, j] = True
        vals[i, j] = v
    g = ObservedGraph(vals, Mask(obs), family_id="bernoulli")
    with pytest.warns(EstimationWarning):
        fit = complete_mle(g, z)
    fam = get_family("bernoulli")
    assert fit.conn[0, 1] == pytest.approx(fam.natural_from_mean(0.75), abs=1e-9)
    assert fit.conn[1, 0] == pytest.approx(fam.natural_from_mean(0.75), abs=1e-9)


def test_mle_no_observations_is_an_error():
    z = Assignment(np.array([0, 1, 0, 1]), 2)
    with pytest.raises(EstimationError):
        complete_mle(empty_graph(4), z)


# --------------------------------------------------------------------------
# E-step
# --------------------------------------------------------------------------


def test_e_step_empty_mask_returns_prior():
    params = bern([0.3, 0.7], [[0.6, 0.4], [0.2, 0.8]])
    tau = rng(0).dirichlet(np.ones(2), size=6)
    out = e_step(empty_graph(6), tau, params)
    assert np.allclose(out, np.tile([0.3, 0.7], (6, 1)), atol=1e-9)


def test_e_step_keeps_one_hot_at_truth_when_separated():
    params = bern([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]])
    g, truth = simulate_observed(params, MaskDesign.random_dyad(0.8), 40, seed=5)
    tau = np.clip(truth.z_star.one_hot(), 1e-10, 1 - 1e-10)
    tau = tau / tau.sum(axis=1, keepdims=True)
    out = e_step(g, tau, params)
    assert np.array_equal(np.argmax(out, axis=1), truth.z_star.labels)
    assert out.max(axis=1).min() > 1 - 1e-6


@pytest.mark.parametrize("family", ["bernoulli", "poisson", "gaussian"])
def test_e_step_never_decreases_bound(family):
    worst = 0.0
    for seed in range(34):
        g, _, params, tau = random_instance(seed, family=family)
        before = elbo(g, tau, params)
        after = elbo(g, e_step(g, tau, params), params)
        worst = max(worst, before - after)
    assert worst <= 1e-9


# --------------------------------------------------------------------------
# M-step
# --------------------------------------------------------------------------


def test_m_step_one_hot_reproduces_complete_mle():
    g, truth, _, _ = random_instance(7, n=10)
    fit_hard = m_step(g, truth.z_star.one_hot())
    fit_mle = complete_mle(g, truth.z_star)
    assert np.allclose(fit_hard.conn, fit_mle.conn, atol=1e-9)
    assert np.allclose(fit_hard.props, fit_mle.props, atol=1e-9)


@pytest.mark.parametrize("family", ["bernoulli", "poisson", "gaussian"])
def test_m_step_never_decreases_bound(family):
    worst = 0.0
    for seed in range(34):
        g, _, params, tau = random_instance(seed, family=family)
        before = elbo(g, tau, params)
        after = elbo(g, tau, m_step(g, tau))
        worst = max(worst, before - after)
    assert worst <= 1e-9


def test_m_step_uniform_tau_gives_global_mean_everywhere():
    g, _, _, _ = random_instance(9, n=10)
    tau = np.full((10, 2), 0.5)
    fit = m_step(g, tau)
    fam = get_family("bernoulli")
    global_mean = np.nanmean(np.where(g.mask.observed, g.values, np.nan))
    expected = fam.natural_from_mean(fam.clamp_mean(global_mean))
    assert np.allclose(fit.conn, expected, atol=1e-9)
    assert np.allclose(fit.props, [0.5, 0.5], atol=1e-12)


# --------------------------------------------------------------------------
# bound vs exact marginal
# --------------------------------------------------------------------------


def test_elbo_equals_complete_loglik_for_one_hot():
    g, truth, params, _ = random_instance(11, n=8)
    tau = truth.z_star.one_hot()
    # exact one-hot: entropy is zero
    assert elbo(g, tau, params) == pytest.approx(
        complete_log_likelihood(g, truth.z_star, params), abs=1e-9
    )


def test_elbo_below_exact_loglik_and_gap_is_kl():
    for seed in range(8):
        g, _, params, tau = random_instance(seed, n=4)
        bound = elbo(g, tau, params)
        exact = exact_observed_loglik(g, params)
        assert bound <= exact + 1e-10
        labs, weights = posterior_over_assignments(g, params)
        gap = mean_field_kl_to_posterior(tau, labs, weights)
        assert exact - bound == pytest.approx(gap, abs=1e-10)


def test_exact_loglik_q1_equals_complete():
    params = params_from_means("poisson", [1.0], [[2.0]])
    g, truth = simulate_observed(params, MaskDesign.random_dyad(0.7), 5, seed=13)
    z = Assignment(np.zeros(5, dtype=int), 1)
    assert exact_observed_loglik(g, params) == pytest.approx(
        complete_log_likelihood(g, z, params), abs=1e-12
    )


def test_exact_loglik_matches_enumeration_oracle():
    g, _, params, _ = random_instance(15, n=4)
    assert exact_observed_loglik(g, params) == pytest.approx(
        enum_observed_loglik(g, params), abs=1e-10
    )


def test_exact_loglik_size_guard():
    params = bern([0.5, 0.5], [[0.6, 0.4], [0.4, 0.6]])
    g, _ = simulate_observed(params, MaskDesign.random_dyad(0.5), 25, seed=17)
    with pytest.raises(SizeError):
        exact_observed_loglik(g, params)


# --------------------------------------------------------------------------
# full fit
# --------------------------------------------------------------------------


def test_vem_recovers_separated_blocks():
    params = bern([0.5, 0.5], [[0.8, 0.1], [0.1, 0.8]])
    hits = 0
    for rep in range(20):
        g, truth = simulate_observed(params, MaskDesign.random_dyad(0.5), 150, seed=(19, rep))
        fit = vem_fit(g, 2, "bernoulli", FitConfig(n_restarts=2), seed=rep)
        d, _ = hamming_distance_up_to_perm(fit.map_labels, truth.z_star)
        hits += d / g.n <= 0.02
    assert hits >= 19


def test_vem_trace_monotone_every_restart():
    g, _, _, _ = random_instance(21, n=30, rho=0.5)
    fit = vem_fit(g, 2, "bernoulli", FitConfig(n_restarts=4), seed=3)
    for trace in fit.diagnostics["restart_traces"]:
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))


def test_vem_q1_full_observation_reduces_to_global_mean():
    params = params_from_means("gaussian", [1.0], [[0.7]])
    g, _ = simulate_observed(params, MaskDesign.random_dyad(1.0), 20, seed=23)
    fit = vem_fit(g, 1, "gaussian", FitConfig(n_restarts=1), seed=0)
    off = ~np.eye(20, dtype=bool)
    assert fit.params.conn[0, 0] == pytest.approx(g.values[off].mean(), abs=1e-9)
    assert fit.params.props[0] == 1.0
    assert fit.converged


def test_vem_warm_start_at_truth_converges_fast():
    params = bern([0.5, 0.5], [[0.8, 0.1], [0.1, 0.8]])
    g, truth = simulate_observed(params, MaskDesign.random_dyad(0.6), 120, seed=29)
    config = FitConfig(n_restarts=1, init="warm", warm_tau=truth.z_star.one_hot())
    fit = vem_fit(g, 2, "bernoulli", config, seed=0)
    assert fit.converged
    assert fit.n_iters <= config.max_iters // 10


def test_vem_label_permuted_warm_start_gives_permuted_fit():
    g, truth, _, _ = random_instance(31, n=40, rho=0.7)
    base_tau = np.clip(truth.z_star.one_hot() + 0.2, 0, 1)
    base_tau /= base_tau.sum(axis=1, keepdims=True)
    cfg = lambda tau: FitConfig(n_restarts=1, max_iters=15, init="warm", warm_tau=tau)
    fit1 = vem_fit(g, 2, "bernoulli", cfg(base_tau), seed=0)
    fit2 = vem_fit(g, 2, "bernoulli", cfg(base_tau[:, ::-1]), seed=0)
    perm = align(fit2.params, fit1.params)
    assert param_distance(apply_permutation(fit2.params, perm), fit1.params) <= 1e-8


def test_vem_determinism():
    g, _, _, _ = random_instance(33, n=25)
    f1 = vem_fit(g, 2, "bernoulli", FitConfig(n_restarts=3), seed=11)
    f2 = vem_fit(g, 2, "bernoulli", FitConfig(n_restarts=3), seed=11)
    assert np.array_equal(f1.params.conn, f2.params.conn)
    assert np.array_equal(f1.tau, f2.tau)
    assert f1.elbo_trace == f2.elbo_trace


def test_vem_config_errors():
    g, _, _, _ = random_instance(35, n=5)
    with pytest.raises(ConfigError):
        vem_fit(g, 6, "bernoulli", FitConfig(), seed=0)
    with pytest.raises(ConfigError):
        FitConfig(n_restarts=0)
    with pytest.raises(ConfigError):
        FitConfig(init="warm")


def test_map_assignment_breaks_ties_to_smallest_index():
    tau = np.array([[0.5, 0.5], [0.2, 0.8]])
    z = map_assignment(tau, 2)
    assert z.labels.tolist() == [0, 1]


# --------------------------------------------------------------------------
# ignorability
# --------------------------------------------------------------------------


def test_unobserved_values_never_change_estimates():
    params = bern([0.5, 0.5], [[0.7, 0.2], [0.2, 0.7]])
    gen = rng(37)
    for rep in range(10):
        g, truth = simulate_observed(params, MaskDesign.random_dyad(0.5), 30, seed=(41, rep))
        mutated = np.array(g.values)
        unobserved = ~g.mask.observed
        mutated[unobserved] = gen.integers(0, 2, size=int(unobserved.sum())).astype(float)
        g2 = ObservedGraph(mutated, g.mask, family_id="bernoulli")
        m1 = complete_mle(g, truth.z_star)
        m2 = complete_mle(g2, truth.z_star)
        assert np.array_equal(m1.conn, m2.conn) and np.array_equal(m1.props, m2.props)
        f1 = vem_fit(g, 2, "bernoulli", FitConfig(n_restarts=1, max_iters=10), seed=rep)
        f2 = vem_fit(g2, 2, "bernoulli", FitConfig(n_restarts=1, max_iters=10), seed=rep)
        assert np.array_equal(f1.params.conn, f2.params.conn)
        assert np.array_equal(f1.tau, f2.tau)
