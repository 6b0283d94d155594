import math
from pathlib import Path

import numpy as np

from rdeval import model as M
from rdeval import target as T

FIXTURES = Path(__file__).parent / "fixtures"


def test_beta_zero_is_prior_bit_for_bit():
    rng = np.random.default_rng(0)
    for name in ("linear_vae_toy.json", "linear_vae_toy_damaged.json"):
        m = M.load_model(FIXTURES / name)
        t = T.AnnealedTarget(m, np.array([1.0, 1.0]), 0.0)
        for _ in range(10):
            z = rng.standard_normal(1) * 3.0
            assert T.log_unnorm(t, z) == M.prior_logpdf(m.prior, z)


def test_hand_value_on_conjugate_fixture():
    m = M.load_model(FIXTURES / "linear_vae_toy_mse.json")
    t = T.AnnealedTarget(m, np.array([1.0, 1.0]), 1.0)
    z = np.array([0.8])
    # log N(0.8; 0, 1) - 1.0 * (2 * 0.2^2)
    want = -0.5 * math.log(2.0 * math.pi) - 0.5 * 0.8 ** 2 - 0.08
    assert abs(T.log_unnorm(t, z) - want) < 1e-13


def test_grad_matches_finite_difference():
    rng = np.random.default_rng(3)
    w1 = rng.standard_normal((4, 2))
    dec = M.Decoder(layers=(M.LinearLayer(w1, rng.standard_normal(4)),
                            M.Activation("tanh")),
                    latent_dim=2, output_dim=4)
    m = M.ModelSpec("t", M.GaussianPrior(2), dec,
                    M.GaussianNllDistortion(sigma=0.9))
    x = rng.standard_normal(4)
    t = T.AnnealedTarget(m, x, 2.5)
    z = np.array([0.4, -0.7])
    got = T.grad_log_unnorm(t, z)
    h = 1e-6
    want = np.zeros(2)
    for i in range(2):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        want[i] = (T.log_unnorm(t, zp) - T.log_unnorm(t, zm)) / (2 * h)
    assert np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want))) < 1e-6


def test_beta_derivative_is_negative_distortion():
    m = M.load_model(FIXTURES / "linear_vae_toy.json")
    x = np.array([1.0, 1.0])
    z = np.array([0.3])
    d = M.distortion_value(m.distortion, x, M.decoder_forward(m.decoder, z))
    h = 1e-6
    lo = T.log_unnorm(T.AnnealedTarget(m, x, 1.0 - h), z)
    hi = T.log_unnorm(T.AnnealedTarget(m, x, 1.0 + h), z)
    fd = (hi - lo) / (2 * h)
    assert abs(fd + d) <= 1e-6 * max(1.0, abs(d))


def test_potential_is_negated_log_unnorm():
    m = M.load_model(FIXTURES / "linear_vae_toy.json")
    t = T.AnnealedTarget(m, np.array([0.5, -0.5]), 1.3)
    z = np.array([0.2])
    assert T.potential(t, z) == -T.log_unnorm(t, z)
    assert np.array_equal(T.grad_potential(t, z), -T.grad_log_unnorm(t, z))
