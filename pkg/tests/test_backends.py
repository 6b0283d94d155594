"""Compiled kernel vs numpy fallback: same draws in, same numbers out."""

import os

import numpy as np
import pytest

from rdeval import ais, backend, hmc as H, model as M, rng as R, schedule as S
from rdeval.errors import ConfigError

pytestmark = pytest.mark.skipif(
    not backend.compiled_available(),
    reason="compiled extension not built")

FIXTURES = [
    "tests/fixtures/linear_vae_toy_mse.json",
    "tests/fixtures/linear_vae_toy.json",
    "tests/fixtures/linear_vae_toy_damaged.json",
]


def deep_model():
    gen = np.random.default_rng(7)
    dec = M.Decoder(layers=(
        M.LinearLayer(weight=gen.standard_normal((8, 2)) * 0.7,
                      bias=gen.standard_normal(8) * 0.1),
        M.Activation(kind="tanh"),
        M.LinearLayer(weight=gen.standard_normal((5, 8)) * 0.6,
                      bias=gen.standard_normal(5) * 0.1),
        M.Activation(kind="relu"),
        M.LinearLayer(weight=gen.standard_normal((3, 5)) * 0.7,
                      bias=gen.standard_normal(3) * 0.1),
        M.Activation(kind="sigmoid"),
    ), latent_dim=2, output_dim=3)
    return M.ModelSpec(name="deep", prior=M.GaussianPrior(dim=2), decoder=dec,
                       distortion=M.GaussianNllDistortion(sigma=0.8))


def both_kernels(model, x):
    return (backend.make_kernel(model, x, force="python"),
            backend.make_kernel(model, x, force="compiled"))


@pytest.mark.parametrize("fixture", FIXTURES)
def test_eval_matches_on_fixtures(fixture):
    model = M.load_model(fixture)
    x = np.array([0.7, -0.3])
    py, cc = both_kernels(model, x)
    Z = np.random.default_rng(3).standard_normal((64, model.latent_dim))
    lp_p, d_p = py.eval(Z)
    lp_c, d_c = cc.eval(Z)
    np.testing.assert_allclose(lp_c, lp_p, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(d_c, d_p, rtol=1e-12, atol=1e-12)


def test_eval_matches_all_layer_kinds():
    model = deep_model()
    x = np.array([0.4, -0.9, 0.2])
    py, cc = both_kernels(model, x)
    Z = np.random.default_rng(4).standard_normal((128, 2))
    lp_p, d_p = py.eval(Z)
    lp_c, d_c = cc.eval(Z)
    np.testing.assert_allclose(lp_c, lp_p, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(d_c, d_p, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("fixture,eps", [
    (FIXTURES[0], 0.3),
    (FIXTURES[1], 0.9),
    (FIXTURES[2], 0.9),
])
def test_single_sweep_matches(fixture, eps):
    model = M.load_model(fixture)
    x = np.array([0.7, -0.3])
    py, cc = both_kernels(model, x)
    gen = np.random.default_rng(11)
    Z = gen.standard_normal((64, model.latent_dim))
    mom = gen.standard_normal((64, model.latent_dim))
    u = gen.uniform(size=64)
    Zp, Zc = Z.copy(), Z.copy()
    lpp, dp = py.eval(Zp)
    lpc, dc = cc.eval(Zc)
    ap, accp = py.sweep(2.0, Zp, lpp, dp, mom.copy(), u, eps, 8)
    ac, accc = cc.sweep(2.0, Zc, lpc, dc, mom.copy(), u, eps, 8)
    assert np.array_equal(accp, accc)
    assert 0 < accp.sum() < 64
    np.testing.assert_allclose(ac, ap, atol=1e-12)
    np.testing.assert_allclose(Zc, Zp, atol=1e-12)
    np.testing.assert_allclose(lpc, lpp, atol=1e-12)
    np.testing.assert_allclose(dc, dp, atol=1e-12)
    # rejected rows are untouched on both sides
    rej = ~accp
    assert np.array_equal(Zp[rej], Z[rej])
    assert np.array_equal(Zc[rej], Z[rej])


def test_long_trajectory_stays_together():
    # shared draws mean any acceptance flip would split the trajectories
    # visibly; none occurs and the states stay within rounding noise
    model = deep_model()
    x = np.array([0.4, -0.9, 0.2])
    py, cc = both_kernels(model, x)
    gen = np.random.default_rng(9)
    Z = gen.standard_normal((32, 2))
    Zp, Zc = Z.copy(), Z.copy()
    lpp, dp = py.eval(Zp)
    lpc, dc = cc.eval(Zc)
    mismatches = 0
    for _ in range(200):
        mom = gen.standard_normal((32, 2))
        u = gen.uniform(size=32)
        _, accp = py.sweep(1.5, Zp, lpp, dp, mom.copy(), u, 0.25, 5)
        _, accc = cc.sweep(1.5, Zc, lpc, dc, mom.copy(), u, 0.25, 5)
        mismatches += int(np.sum(accp != accc))
    assert mismatches == 0
    assert np.max(np.abs(Zp - Zc)) < 1e-9


def test_forward_run_matches_end_to_end():
    model = deep_model()
    x = np.array([0.4, -0.9, 0.2])
    sched = S.make_schedule(300, 5.0, "sigmoid", report_points=4)
    params = H.HmcParams(step_size=0.25, n_leapfrog=5)
    out = {}
    for name in ("python", "compiled"):
        os.environ["RDEVAL_BACKEND"] = name
        try:
            streams = R.chain_streams(5, 0, 24, R.PURPOSE_FORWARD)
            out[name] = ais.forward_ais(model, x, sched, 24, params, streams)
        finally:
            del os.environ["RDEVAL_BACKEND"]
    for p, c in zip(out["python"], out["compiled"]):
        assert p.k == c.k
        assert abs(p.log_z_hat - c.log_z_hat) < 1e-9
        assert abs(p.rate_nats - c.rate_nats) < 1e-9
        assert abs(p.distortion - c.distortion) < 1e-9
        assert abs(p.ess - c.ess) < 1e-6
        assert p.mean_accept == c.mean_accept


def test_nonfinite_state_rejects_quietly():
    model = M.load_model("tests/fixtures/linear_vae_toy_mse.json")
    x = np.array([1e200, -1e200])
    py, cc = both_kernels(model, x)
    Z = np.zeros((4, 1))
    mom = np.full((4, 1), 5.0)
    u = np.full(4, 0.99)
    for kern in (py, cc):
        Zk = Z.copy()
        lp, d = kern.eval(Zk)
        aprob, acc = kern.sweep(1.0, Zk, lp, d, mom.copy(), u, 10.0, 5)
        assert np.all(aprob == 0.0)
        assert not np.any(acc)
        assert np.array_equal(Zk, Z)


def test_selection_and_forcing():
    model = M.load_model("tests/fixtures/linear_vae_toy_mse.json")
    x = np.array([0.0, 0.0])
    assert backend.make_kernel(model, x, force="python").name == "python"
    assert backend.make_kernel(model, x, force="compiled").name == "compiled"
    assert backend.make_kernel(model, x).name == "compiled"
    os.environ["RDEVAL_BACKEND"] = "python"
    try:
        assert backend.active_backend_name() == "python"
        assert backend.make_kernel(model, x).name == "python"
    finally:
        del os.environ["RDEVAL_BACKEND"]
    os.environ["RDEVAL_BACKEND"] = "nonsense"
    try:
        with pytest.raises(ConfigError):
            backend.backend_choice()
    finally:
        del os.environ["RDEVAL_BACKEND"]


def test_feature_distortion_falls_back():
    import dataclasses
    model = M.load_model("tests/fixtures/linear_vae_toy_mse.json")
    feat_dec = M.Decoder(layers=(M.LinearLayer(weight=np.eye(2),
                                               bias=np.zeros(2)),),
                         latent_dim=2, output_dim=2)
    feat = dataclasses.replace(
        model, distortion=M.FeatureMseDistortion(feature_map=feat_dec))
    x = np.array([0.0, 0.0])
    assert backend.make_kernel(feat, x).name == "python"
    with pytest.raises(ConfigError):
        backend.make_kernel(feat, x, force="compiled")


def test_compiled_input_validation():
    model = M.load_model("tests/fixtures/linear_vae_toy_mse.json")
    cc = backend.make_kernel(model, np.zeros(2), force="compiled")
    with pytest.raises(ValueError):
        cc.eval(np.zeros((3, 4)))
    Z = np.zeros((3, 1))
    lp, d = cc.eval(Z)
    with pytest.raises(ValueError):
        cc.sweep(1.0, Z, lp, d, np.zeros((3, 1)), np.zeros(3), 0.1, 0)
