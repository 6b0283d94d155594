import math
from pathlib import Path

import numpy as np
import pytest

from rdeval import analytic as A
from rdeval import model as M
from rdeval import oracle as O
from rdeval.errors import ConfigError

FIXTURES = Path(__file__).parent / "fixtures"
X_TOY = np.array([1.0, 1.0])

MSE_LOGZ = -0.4 - 0.5 * math.log(5.0)
MSE_R = 0.5 * math.log(5.0) - 0.08
GNLL_R = 0.5 * math.log(3.0) - 1.0 / 9.0
GNLL_D = 4.0 / 9.0 + math.log(2.0 * math.pi)
GNLL_LOGP = -GNLL_R - GNLL_D


def load(name):
    return M.load_model(FIXTURES / name)


def test_partition_at_beta_zero_is_normalized():
    for name in ("linear_vae_toy_mse.json", "linear_vae_toy.json",
                 "linear_vae_toy_damaged.json"):
        assert abs(O.quad_log_z(load(name), X_TOY, 0.0)) < 1e-8


def test_mse_fixture_matches_conjugate_closed_form():
    m = load("linear_vae_toy_mse.json")
    assert abs(O.quad_log_z(m, X_TOY, 1.0) - MSE_LOGZ) < 1e-6
    rate, distortion = O.quad_rate_distortion(m, X_TOY, 1.0)
    assert abs(rate - MSE_R) < 1e-6
    assert abs(distortion - 0.48) < 1e-6


def test_gnll_fixture_matches_closed_form_and_analytic_module():
    m = load("linear_vae_toy.json")
    rate, distortion = O.quad_rate_distortion(m, X_TOY, 1.0)
    assert abs(rate - GNLL_R) < 1e-6
    assert abs(distortion - GNLL_D) < 1e-6

    la, sigma = A.from_model(m)
    assert abs(rate - A.analytic_rate(la, X_TOY, 1.0, sigma)) < 1e-6
    assert abs(distortion
               - A.analytic_distortion_nll(la, X_TOY, 1.0, sigma)) < 1e-6


def test_log_marginal_fixture_value():
    m = load("linear_vae_toy.json")
    got = O.quad_log_marginal(m, X_TOY)
    assert abs(got - GNLL_LOGP) < 1e-6
    la, sigma = A.from_model(m)
    assert abs(got - A.log_marginal(la, X_TOY, sigma)) < 1e-8


def test_damaged_prior_loses_at_most_log_alpha():
    lm_damaged = O.quad_log_marginal(load("linear_vae_toy_damaged.json"),
                                     X_TOY)
    lm_clean = O.quad_log_marginal(load("linear_vae_toy.json"), X_TOY)
    assert lm_damaged >= lm_clean + math.log(0.01)
    assert lm_damaged <= lm_clean


def test_constant_decoder_marginal_is_unit_gaussian():
    b = np.array([0.3, -0.7])
    dec = M.Decoder(layers=(M.LinearLayer(np.zeros((2, 1)), b),),
                    latent_dim=1, output_dim=2)
    m = M.ModelSpec("c", M.GaussianPrior(1), dec,
                    M.GaussianNllDistortion(1.0))
    resid = X_TOY - b
    want = -math.log(2.0 * math.pi) - 0.5 * float(resid @ resid)
    assert abs(O.quad_log_marginal(m, X_TOY) - want) < 1e-8


def test_grid_refinement_self_convergence():
    m = load("linear_vae_toy_mse.json")
    coarse = O.quad_log_z(m, X_TOY, 1.0)
    fine = O.quad_log_z(m, X_TOY, 1.0, O.QuadratureGrid(nodes=4001))
    assert abs(coarse - fine) < 1e-9

    rate_c, dist_c = O.quad_rate_distortion(m, X_TOY, 1.0)
    rate_f, dist_f = O.quad_rate_distortion(m, X_TOY, 1.0,
                                            O.QuadratureGrid(nodes=4001))
    assert abs(rate_c - rate_f) < 1e-8
    assert abs(dist_c - dist_f) < 1e-8


def test_rate_identity_against_direct_kl():
    for name in ("linear_vae_toy_mse.json", "linear_vae_toy.json"):
        m = load(name)
        for beta in (0.3, 1.0, 5.0):
            rate, _ = O.quad_rate_distortion(m, X_TOY, beta)
            assert abs(rate - O.quad_kl_direct(m, X_TOY, beta)) < 1e-6


def test_two_dimensional_latent_against_analytic():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((3, 2))
    b = rng.standard_normal(3)
    dec = M.Decoder(layers=(M.LinearLayer(w, b),), latent_dim=2,
                    output_dim=3)
    m = M.ModelSpec("lin2", M.GaussianPrior(2), dec,
                    M.GaussianNllDistortion(1.0))
    x = rng.standard_normal(3)
    la, sigma = A.from_model(m)
    grid = O.QuadratureGrid(nodes=801, half_width=8.0)
    for beta in (0.5, 3.0):
        rate, distortion = O.quad_rate_distortion(m, x, beta, grid)
        assert abs(rate - A.analytic_rate(la, x, beta, sigma)) < 1e-6
        assert abs(distortion
                   - A.analytic_distortion_nll(la, x, beta, sigma)) < 1e-6


def test_posterior_cdf_matches_conjugate_normal():
    m = load("linear_vae_toy_mse.json")
    cdf = O.posterior_cdf(m, X_TOY, 1.0)
    sd = math.sqrt(0.2)
    for z in np.linspace(-1.0, 3.0, 17):
        want = 0.5 * (1.0 + math.erf((z - 0.8) / (sd * math.sqrt(2.0))))
        assert abs(cdf(z) - want) < 1e-4
    values = [cdf(z) for z in np.linspace(-3, 4, 50)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_probability_integral_transform_of_exact_samples():
    m = load("linear_vae_toy_mse.json")
    cdf = O.posterior_cdf(m, X_TOY, 1.0)
    gen = np.random.default_rng(14)
    draws = 0.8 + math.sqrt(0.2) * gen.standard_normal(500)
    pit = np.array([cdf(z) for z in draws])
    from scipy import stats
    assert stats.kstest(pit, "uniform").pvalue > 0.001


def test_validation_errors():
    rng = np.random.default_rng(0)
    dec = M.Decoder(layers=(M.LinearLayer(rng.standard_normal((4, 3)),
                                          np.zeros(4)),),
                    latent_dim=3, output_dim=4)
    big = M.ModelSpec("big", M.GaussianPrior(3), dec,
                      M.GaussianNllDistortion(1.0))
    with pytest.raises(ConfigError):
        O.quad_log_z(big, np.zeros(4), 1.0)
    with pytest.raises(ConfigError):
        O.quad_log_marginal(load("linear_vae_toy_mse.json"), X_TOY)
    with pytest.raises(ConfigError):
        O.QuadratureGrid(nodes=2000)
    with pytest.raises(ConfigError):
        O.QuadratureGrid(nodes=99)
    with pytest.raises(ConfigError):
        O.QuadratureGrid(half_width=4.0)
    two_d = M.ModelSpec(
        "t", M.GaussianPrior(2),
        M.Decoder(layers=(M.LinearLayer(np.ones((2, 2)), np.zeros(2)),),
                  latent_dim=2, output_dim=2),
        M.GaussianNllDistortion(1.0))
    with pytest.raises(ConfigError):
        O.posterior_cdf(two_d, np.zeros(2), 1.0)
