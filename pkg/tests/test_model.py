import json
import math
from pathlib import Path

import mpmath
import numpy as np
import pytest

from rdeval import model as M
from rdeval.errors import ConfigError, ModelError

FIXTURES = Path(__file__).parent / "fixtures"


def finite_difference_grad(fn, z, h=1e-5):
    z = np.asarray(z, dtype=np.float64)
    grad = np.zeros_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        grad[i] = (fn(zp) - fn(zm)) / (2.0 * h)
    return grad


def make_tanh_mlp(seed=42, latent=2, hidden=5, out=3):
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((hidden, latent))
    b1 = rng.standard_normal(hidden)
    w2 = rng.standard_normal((out, hidden))
    b2 = rng.standard_normal(out)
    dec = M.Decoder(
        layers=(M.LinearLayer(w1, b1), M.Activation("tanh"),
                M.LinearLayer(w2, b2)),
        latent_dim=latent, output_dim=out)
    return dec, (w1, b1, w2, b2)


# ---------------------------------------------------------------------------
# decoder forward

def test_linear_toy_forward():
    m = M.load_model(FIXTURES / "linear_vae_toy.json")
    out = M.decoder_forward(m.decoder, np.array([0.5]))
    assert np.array_equal(out, np.array([0.5, 0.5]))


def test_tanh_mlp_matches_high_precision_reimplementation():
    dec, (w1, b1, w2, b2) = make_tanh_mlp()
    z = np.array([0.1, 0.2])
    got = M.decoder_forward(dec, z)

    mpmath.mp.dps = 50
    zv = [mpmath.mpf(float(v)) for v in z]
    hidden = []
    for i in range(w1.shape[0]):
        acc = mpmath.mpf(float(b1[i]))
        for j in range(w1.shape[1]):
            acc += mpmath.mpf(float(w1[i, j])) * zv[j]
        hidden.append(mpmath.tanh(acc))
    want = []
    for i in range(w2.shape[0]):
        acc = mpmath.mpf(float(b2[i]))
        for j in range(w2.shape[1]):
            acc += mpmath.mpf(float(w2[i, j])) * hidden[j]
        want.append(float(acc))
    assert np.max(np.abs(got - np.array(want))) < 1e-12


def test_relu_and_sigmoid_values():
    dec = M.Decoder(layers=(M.Activation("relu"),), latent_dim=3, output_dim=3)
    out = M.decoder_forward(dec, np.array([-1.0, 0.0, 2.0]))
    assert np.array_equal(out, np.array([0.0, 0.0, 2.0]))
    dec = M.Decoder(layers=(M.Activation("sigmoid"),), latent_dim=1, output_dim=1)
    assert abs(M.decoder_forward(dec, np.array([0.0]))[0] - 0.5) < 1e-15


# ---------------------------------------------------------------------------
# distortions

def test_mse_value():
    d = M.MseDistortion()
    assert M.distortion_value(d, np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert M.distortion_value(d, np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 25.0


def test_gaussian_nll_zero_residual_constant():
    d = M.GaussianNllDistortion(sigma=1.0)
    x = np.array([0.3, -0.7])
    got = M.distortion_value(d, x, x)
    assert abs(got - math.log(2.0 * math.pi)) < 1e-15


def test_gaussian_nll_equals_scaled_mse_plus_constant():
    rng = np.random.default_rng(9)
    sigma = 1.7
    d = M.GaussianNllDistortion(sigma=sigma)
    for _ in range(10):
        x = rng.standard_normal(4)
        xh = rng.standard_normal(4)
        mse = M.distortion_value(M.MseDistortion(), x, xh)
        want = 2.0 * math.log(2.0 * math.pi * sigma ** 2) + mse / (2.0 * sigma ** 2)
        assert abs(M.distortion_value(d, x, xh) - want) < 1e-12


def test_feature_mse_identity_map_equals_mse():
    ident = M.Decoder(
        layers=(M.LinearLayer(np.eye(3), np.zeros(3)),),
        latent_dim=3, output_dim=3)
    d = M.FeatureMseDistortion(feature_map=ident)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3)
    xh = rng.standard_normal(3)
    assert abs(M.distortion_value(d, x, xh)
               - M.distortion_value(M.MseDistortion(), x, xh)) < 1e-12


# ---------------------------------------------------------------------------
# gradients

def _grad_case(model, x, z, rel_tol=1e-6):
    got = M.grad_distortion_wrt_z(model, x, z)
    want = finite_difference_grad(
        lambda zz: M.distortion_value(
            model.distortion, x, M.decoder_forward(model.decoder, zz)), z)
    scale = max(1.0, float(np.max(np.abs(want))))
    assert np.max(np.abs(got - want)) / scale < rel_tol


def test_grad_linear_toy_mse():
    m = M.load_model(FIXTURES / "linear_vae_toy_mse.json")
    _grad_case(m, np.array([1.0, 1.0]), np.array([0.3]))


def test_grad_tanh_mlp_all_distortions():
    dec, _ = make_tanh_mlp(seed=3, latent=2, hidden=6, out=4)
    prior = M.GaussianPrior(dim=2)
    x = np.array([0.5, -0.2, 1.1, 0.0])
    z = np.array([0.4, -1.2])
    for dist in (M.MseDistortion(), M.GaussianNllDistortion(sigma=0.8)):
        m = M.ModelSpec("t", prior, dec, dist)
        _grad_case(m, x, z)


def test_grad_feature_mse():
    dec, _ = make_tanh_mlp(seed=4, latent=2, hidden=5, out=3)
    fmap, _ = make_tanh_mlp(seed=5, latent=3, hidden=4, out=2)
    m = M.ModelSpec("t", M.GaussianPrior(2), dec,
                    M.FeatureMseDistortion(feature_map=fmap))
    _grad_case(m, np.array([0.2, 0.4, -0.3]), np.array([-0.5, 0.9]))


def test_grad_relu_subgradient_at_zero_is_zero():
    dec = M.Decoder(
        layers=(M.LinearLayer(np.array([[1.0]]), np.array([-0.5])),
                M.Activation("relu")),
        latent_dim=1, output_dim=1)
    m = M.ModelSpec("t", M.GaussianPrior(1), dec, M.MseDistortion())
    # pre-activation is exactly 0 at z = 0.5
    g = M.grad_distortion_wrt_z(m, np.array([2.0]), np.array([0.5]))
    assert g[0] == 0.0


def test_grad_relu_sigmoid_stack():
    rng = np.random.default_rng(8)
    dec = M.Decoder(
        layers=(M.LinearLayer(rng.standard_normal((4, 2)), rng.standard_normal(4)),
                M.Activation("relu"),
                M.LinearLayer(rng.standard_normal((3, 4)), rng.standard_normal(3)),
                M.Activation("sigmoid")),
        latent_dim=2, output_dim=3)
    m = M.ModelSpec("t", M.GaussianPrior(2), dec, M.MseDistortion())
    _grad_case(m, np.array([0.3, 0.6, 0.1]), np.array([0.7, -0.4]))


# ---------------------------------------------------------------------------
# priors

def test_gaussian_prior_logpdf_at_zero():
    p = M.GaussianPrior(dim=2)
    assert abs(M.prior_logpdf(p, np.zeros(2)) + math.log(2.0 * math.pi)) < 1e-15


def test_gaussian_prior_grad():
    p = M.GaussianPrior(dim=3)
    z = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(M.prior_grad(p, z), -z)


def damaged_mixture():
    return M.MixturePrior(components=(
        M.MixtureComponent(0.01, np.zeros(1), 1.0),
        M.MixtureComponent(0.99, np.zeros(1), 10.0)), dim=1)


def test_mixture_logpdf_value():
    p = damaged_mixture()
    phi0 = 1.0 / math.sqrt(2.0 * math.pi)
    want = math.log(0.01 * phi0 + 0.99 * phi0 / 10.0)
    assert abs(M.prior_logpdf(p, np.zeros(1)) - want) < 1e-13


def test_mixture_logpdf_far_tail_is_stable():
    p = damaged_mixture()
    val = M.prior_logpdf(p, np.array([80.0]))
    # only the wide component contributes
    want = math.log(0.99) - math.log(10.0) - 0.5 * math.log(2 * math.pi) \
        - 80.0 ** 2 / 200.0
    assert math.isfinite(val)
    assert abs(val - want) < 1e-10


def test_mixture_grad_matches_finite_difference():
    p = M.MixturePrior(components=(
        M.MixtureComponent(0.3, np.array([1.0, -1.0]), 0.7),
        M.MixtureComponent(0.7, np.array([-2.0, 0.5]), 2.0)), dim=2)
    for z in (np.array([0.0, 0.0]), np.array([1.5, -0.5]), np.array([-3.0, 2.0])):
        got = M.prior_grad(p, z)
        want = finite_difference_grad(lambda zz: M.prior_logpdf(p, zz), z)
        assert np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want))) < 1e-6


def test_prior_sample_moments():
    gen = np.random.default_rng(77)
    p = M.MixturePrior(components=(
        M.MixtureComponent(1.0, np.array([2.0]), 0.5),), dim=1)
    draws = np.array([M.prior_sample(p, gen)[0] for _ in range(100_000)])
    se_mean = 0.5 / math.sqrt(draws.size)
    assert abs(draws.mean() - 2.0) < 4.0 * se_mean
    var = draws.var()
    se_var = 0.25 * math.sqrt(2.0 / draws.size)
    assert abs(var - 0.25) < 4.0 * se_var


def test_prior_sample_mixture_component_frequencies():
    gen = np.random.default_rng(3)
    p = M.MixturePrior(components=(
        M.MixtureComponent(0.2, np.array([-40.0]), 0.1),
        M.MixtureComponent(0.8, np.array([40.0]), 0.1)), dim=1)
    draws = np.array([M.prior_sample(p, gen)[0] for _ in range(20_000)])
    frac_hi = float(np.mean(draws > 0))
    assert abs(frac_hi - 0.8) < 4.0 * math.sqrt(0.8 * 0.2 / draws.size)


def test_gaussian_prior_sample_moments():
    gen = np.random.default_rng(5)
    p = M.GaussianPrior(dim=4)
    draws = np.stack([M.prior_sample(p, gen) for _ in range(50_000)])
    assert np.max(np.abs(draws.mean(axis=0))) < 4.0 / math.sqrt(draws.shape[0])


# ---------------------------------------------------------------------------
# manifest loading

def test_load_damaged_fixture_prior():
    m = M.load_model(FIXTURES / "linear_vae_toy_damaged.json")
    assert isinstance(m.prior, MixturePrior := M.MixturePrior)
    weights = [c.weight for c in m.prior.components]
    assert weights == [0.01, 0.99]


def test_missing_model_file():
    with pytest.raises(ModelError):
        M.load_model(FIXTURES / "does_not_exist.json")


def test_bad_weights_payload_names_layer(tmp_path):
    obj = json.loads((FIXTURES / "linear_vae_toy.json").read_text())
    obj["decoder"]["layers"][0]["weights"] = "AAAA"  # 3 bytes, not 16
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    with pytest.raises(ModelError) as err:
        M.load_model(bad)
    assert "decoder.layers[0]" in str(err.value)


def test_mismatched_layer_widths(tmp_path):
    obj = json.loads((FIXTURES / "linear_vae_toy.json").read_text())
    obj["decoder"]["latent_dim"] = 3
    obj["prior"] = {"type": "gaussian", "dim": 3}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    with pytest.raises(ModelError) as err:
        M.load_model(bad)
    assert "width" in str(err.value) or "cols" in str(err.value)


def test_mixture_weights_must_sum_to_one(tmp_path):
    obj = json.loads((FIXTURES / "linear_vae_toy_damaged.json").read_text())
    obj["prior"]["components"][0]["weight"] = 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    with pytest.raises(ModelError) as err:
        M.load_model(bad)
    assert "sum" in str(err.value)


def test_unknown_distortion_type(tmp_path):
    obj = json.loads((FIXTURES / "linear_vae_toy.json").read_text())
    obj["distortion"] = {"type": "l1"}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    with pytest.raises(ModelError) as err:
        M.load_model(bad)
    assert "distortion" in str(err.value)


def test_roundtrip_save_load(tmp_path):
    dec, _ = make_tanh_mlp(seed=11, latent=1, hidden=4, out=2)
    m = M.ModelSpec("roundtrip", M.GaussianPrior(1), dec,
                    M.GaussianNllDistortion(sigma=0.9))
    path = tmp_path / "m.json"
    M.save_model(m, path)
    back = M.load_model(path)
    assert back.name == "roundtrip"
    z = np.array([0.37])
    assert np.array_equal(M.decoder_forward(back.decoder, z),
                          M.decoder_forward(m.decoder, z))


# ---------------------------------------------------------------------------
# dataset files

def test_load_dataset_with_comment_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("# x0,x1\n1.0,2.0\n3.5,-1.25\n")
    data = M.load_dataset(p, output_dim=2)
    assert np.array_equal(data, np.array([[1.0, 2.0], [3.5, -1.25]]))


def test_load_dataset_column_mismatch(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1.0,2.0,3.0\n")
    with pytest.raises(ConfigError):
        M.load_dataset(p, output_dim=2)


def test_load_dataset_non_numeric(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1.0,apple\n")
    with pytest.raises(ConfigError):
        M.load_dataset(p)
