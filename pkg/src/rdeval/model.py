"""Generative-model description: prior, decoder stack, distortion.

A model is a prior p(z), a decoder f(z) given as an ordered stack of linear
and pointwise-activation layers, and a distortion d(x, f(z)).  Forward and
gradient evaluation are written against batches (rows are chains); the
single-point helpers wrap the batch forms.  The reverse-mode gradient of the
distortion with respect to z is hand-written layer by layer.

Manifests are JSON; linear weights travel as base64 little-endian float64 in
row-major order.  Validation errors name the offending field path.
"""

from __future__ import annotations

import base64
import binascii
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelError

LOG_2PI = math.log(2.0 * math.pi)

_ACTIVATIONS = ("tanh", "relu", "sigmoid")


# ---------------------------------------------------------------------------
# priors

@dataclass(frozen=True)
class GaussianPrior:
    """Standard normal prior on R^dim."""

    dim: int


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: np.ndarray  # (dim,)
    scale: float      # isotropic standard deviation


@dataclass(frozen=True)
class MixturePrior:
    components: tuple[MixtureComponent, ...]
    dim: int


Prior = GaussianPrior | MixturePrior


def prior_logpdf_batch(prior: Prior, z: np.ndarray) -> np.ndarray:
    if isinstance(prior, GaussianPrior):
        return -0.5 * prior.dim * LOG_2PI - 0.5 * np.sum(z * z, axis=-1)
    parts = []
    for comp in prior.components:
        diff = z - comp.mean
        parts.append(
            math.log(comp.weight) - prior.dim * math.log(comp.scale)
            - 0.5 * prior.dim * LOG_2PI
            - np.sum(diff * diff, axis=-1) / (2.0 * comp.scale ** 2)
        )
    stacked = np.stack(parts, axis=0)
    top = np.max(stacked, axis=0)
    return top + np.log(np.sum(np.exp(stacked - top), axis=0))


def prior_grad_batch(prior: Prior, z: np.ndarray) -> np.ndarray:
    if isinstance(prior, GaussianPrior):
        return -z
    parts = []
    for comp in prior.components:
        diff = z - comp.mean
        parts.append(
            math.log(comp.weight) - prior.dim * math.log(comp.scale)
            - 0.5 * prior.dim * LOG_2PI
            - np.sum(diff * diff, axis=-1) / (2.0 * comp.scale ** 2)
        )
    stacked = np.stack(parts, axis=0)
    top = np.max(stacked, axis=0)
    resp = np.exp(stacked - top)
    resp /= np.sum(resp, axis=0)
    grad = np.zeros_like(z)
    for c, comp in enumerate(prior.components):
        grad += resp[c][..., None] * (comp.mean - z) / comp.scale ** 2
    return grad


def prior_logpdf(prior: Prior, z: np.ndarray) -> float:
    return float(prior_logpdf_batch(prior, np.asarray(z, dtype=np.float64)))


def prior_grad(prior: Prior, z: np.ndarray) -> np.ndarray:
    return prior_grad_batch(prior, np.asarray(z, dtype=np.float64))


def prior_sample(prior: Prior, gen: np.random.Generator) -> np.ndarray:
    """One draw.  Mixture draws consume one uniform (component pick) and one
    standard-normal vector, in that order."""
    if isinstance(prior, GaussianPrior):
        return gen.standard_normal(prior.dim)
    u = gen.uniform()
    cum = np.cumsum([c.weight for c in prior.components])
    idx = min(int(np.searchsorted(cum, u, side="right")),
              len(prior.components) - 1)
    comp = prior.components[idx]
    return comp.mean + comp.scale * gen.standard_normal(prior.dim)


# ---------------------------------------------------------------------------
# decoder

@dataclass(frozen=True)
class LinearLayer:
    weight: np.ndarray  # (out, in), row-major
    bias: np.ndarray    # (out,)


@dataclass(frozen=True)
class Activation:
    kind: str  # tanh | relu | sigmoid


Layer = LinearLayer | Activation


@dataclass(frozen=True)
class Decoder:
    layers: tuple[Layer, ...]
    latent_dim: int
    output_dim: int


def decoder_forward_batch(dec: Decoder, z: np.ndarray,
                          want_cache: bool = False):
    """Map a (n, latent_dim) batch through the stack.

    With want_cache, also returns the post-layer activations needed by
    decoder_backward_batch.
    """
    acts = [z]
    cur = z
    for layer in dec.layers:
        if isinstance(layer, LinearLayer):
            cur = cur @ layer.weight.T + layer.bias
        elif layer.kind == "tanh":
            cur = np.tanh(cur)
        elif layer.kind == "relu":
            cur = np.maximum(cur, 0.0)
        else:  # sigmoid
            cur = 1.0 / (1.0 + np.exp(-cur))
        acts.append(cur)
    if want_cache:
        return cur, acts
    return cur


def decoder_backward_batch(dec: Decoder, acts: list[np.ndarray],
                           dout: np.ndarray) -> np.ndarray:
    """Pull a gradient at the output back to the latent input.

    The relu subgradient at exactly zero is taken as zero.
    """
    grad = dout
    for idx in range(len(dec.layers) - 1, -1, -1):
        layer = dec.layers[idx]
        out_act = acts[idx + 1]
        if isinstance(layer, LinearLayer):
            grad = grad @ layer.weight
        elif layer.kind == "tanh":
            grad = grad * (1.0 - out_act * out_act)
        elif layer.kind == "relu":
            grad = np.where(out_act > 0.0, grad, 0.0)
        else:  # sigmoid
            grad = grad * out_act * (1.0 - out_act)
    return grad


def decoder_forward(dec: Decoder, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return decoder_forward_batch(dec, z[None, :])[0]


# ---------------------------------------------------------------------------
# distortions

@dataclass(frozen=True)
class MseDistortion:
    pass


@dataclass(frozen=True)
class GaussianNllDistortion:
    sigma: float


@dataclass(frozen=True)
class FeatureMseDistortion:
    feature_map: Decoder


Distortion = MseDistortion | GaussianNllDistortion | FeatureMseDistortion


def distortion_value_batch(dist: Distortion, x: np.ndarray,
                           xhat: np.ndarray) -> np.ndarray:
    if isinstance(dist, MseDistortion):
        r = xhat - x
        return np.sum(r * r, axis=-1)
    if isinstance(dist, GaussianNllDistortion):
        r = xhat - x
        m = x.shape[-1]
        return (0.5 * m * math.log(2.0 * math.pi * dist.sigma ** 2)
                + np.sum(r * r, axis=-1) / (2.0 * dist.sigma ** 2))
    fx = decoder_forward_batch(dist.feature_map, np.atleast_2d(x))
    fxh = decoder_forward_batch(dist.feature_map, xhat)
    r = fxh - fx
    return np.sum(r * r, axis=-1)


def distortion_value(dist: Distortion, x: np.ndarray, xhat: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    return float(distortion_value_batch(dist, x, xhat[None, :])[0])


def distortion_grad_wrt_xhat_batch(dist: Distortion, x: np.ndarray,
                                   xhat: np.ndarray) -> np.ndarray:
    if isinstance(dist, MseDistortion):
        return 2.0 * (xhat - x)
    if isinstance(dist, GaussianNllDistortion):
        return (xhat - x) / dist.sigma ** 2
    fx = decoder_forward_batch(dist.feature_map, np.atleast_2d(x))
    fxh, acts = decoder_forward_batch(dist.feature_map, xhat, want_cache=True)
    return decoder_backward_batch(dist.feature_map, acts, 2.0 * (fxh - fx))


def grad_distortion_wrt_z_batch(model: "ModelSpec", x: np.ndarray,
                                z: np.ndarray) -> np.ndarray:
    xhat, acts = decoder_forward_batch(model.decoder, z, want_cache=True)
    dout = distortion_grad_wrt_xhat_batch(model.distortion, x, xhat)
    return decoder_backward_batch(model.decoder, acts, dout)


def grad_distortion_wrt_z(model: "ModelSpec", x: np.ndarray,
                          z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return grad_distortion_wrt_z_batch(model, x, z[None, :])[0]


# ---------------------------------------------------------------------------
# model spec and manifest I/O

@dataclass(frozen=True)
class ModelSpec:
    name: str
    prior: Prior
    decoder: Decoder
    distortion: Distortion

    @property
    def latent_dim(self) -> int:
        return self.decoder.latent_dim

    @property
    def output_dim(self) -> int:
        return self.decoder.output_dim


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ModelError(f"{path}: missing required field '{key}'")
    return obj[key]


def _parse_prior(obj, path: str) -> Prior:
    kind = _require(obj, "type", path)
    if kind == "gaussian":
        dim = _require(obj, "dim", path)
        if not isinstance(dim, int) or dim < 1:
            raise ModelError(f"{path}.dim: must be a positive integer")
        return GaussianPrior(dim=dim)
    if kind == "mixture":
        comps_raw = _require(obj, "components", path)
        if not isinstance(comps_raw, list) or not comps_raw:
            raise ModelError(f"{path}.components: must be a non-empty list")
        comps = []
        dim = None
        for i, c in enumerate(comps_raw):
            cpath = f"{path}.components[{i}]"
            weight = float(_require(c, "weight", cpath))
            mean = np.asarray(_require(c, "mean", cpath), dtype=np.float64)
            scale = float(_require(c, "scale", cpath))
            if mean.ndim != 1:
                raise ModelError(f"{cpath}.mean: must be a flat array")
            if dim is None:
                dim = mean.shape[0]
            elif mean.shape[0] != dim:
                raise ModelError(
                    f"{cpath}.mean: dimension {mean.shape[0]} != {dim}")
            if not (weight > 0.0):
                raise ModelError(f"{cpath}.weight: must be positive")
            if not (scale > 0.0) or not math.isfinite(scale):
                raise ModelError(f"{cpath}.scale: must be positive and finite")
            if not np.all(np.isfinite(mean)):
                raise ModelError(f"{cpath}.mean: non-finite entry")
            comps.append(MixtureComponent(weight=weight, mean=mean, scale=scale))
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ModelError(
                f"{path}.components: weights sum to {total!r}, expected 1")
        return MixturePrior(components=tuple(comps), dim=dim)
    raise ModelError(f"{path}.type: unknown prior type {kind!r}")


def _parse_layers(obj, path: str) -> Decoder:
    latent_dim = _require(obj, "latent_dim", path)
    output_dim = _require(obj, "output_dim", path)
    for field, value in (("latent_dim", latent_dim), ("output_dim", output_dim)):
        if not isinstance(value, int) or value < 1:
            raise ModelError(f"{path}.{field}: must be a positive integer")
    layers_raw = _require(obj, "layers", path)
    if not isinstance(layers_raw, list):
        raise ModelError(f"{path}.layers: must be a list")
    layers: list[Layer] = []
    width = latent_dim
    for i, layer in enumerate(layers_raw):
        lpath = f"{path}.layers[{i}]"
        kind = _require(layer, "type", lpath)
        if kind == "linear":
            rows = _require(layer, "rows", lpath)
            cols = _require(layer, "cols", lpath)
            if not isinstance(rows, int) or not isinstance(cols, int) \
                    or rows < 1 or cols < 1:
                raise ModelError(f"{lpath}: rows/cols must be positive integers")
            payload = _require(layer, "weights", lpath)
            try:
                raw = base64.b64decode(payload, validate=True)
            except (binascii.Error, TypeError) as exc:
                raise ModelError(f"{lpath}.weights: bad base64: {exc}") from exc
            if len(raw) != rows * cols * 8:
                raise ModelError(
                    f"{lpath}.weights: payload is {len(raw)} bytes, "
                    f"expected rows*cols*8 = {rows * cols * 8}")
            weight = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
            bias = np.asarray(_require(layer, "bias", lpath), dtype=np.float64)
            if bias.shape != (rows,):
                raise ModelError(
                    f"{lpath}.bias: length {bias.shape} != rows {rows}")
            if not np.all(np.isfinite(weight)) or not np.all(np.isfinite(bias)):
                raise ModelError(f"{lpath}: non-finite weight or bias entry")
            if cols != width:
                raise ModelError(
                    f"{lpath}: cols {cols} does not match incoming width {width}")
            width = rows
            layers.append(LinearLayer(weight=weight, bias=bias))
        elif kind in _ACTIVATIONS:
            layers.append(Activation(kind=kind))
        else:
            raise ModelError(f"{lpath}.type: unknown layer type {kind!r}")
    if width != output_dim:
        raise ModelError(
            f"{path}: final layer width {width} != output_dim {output_dim}")
    return Decoder(layers=tuple(layers), latent_dim=latent_dim,
                   output_dim=output_dim)


def _parse_distortion(obj, path: str) -> Distortion:
    kind = _require(obj, "type", path)
    if kind == "mse":
        return MseDistortion()
    if kind == "gaussian_nll":
        sigma = float(_require(obj, "sigma", path))
        if not (sigma > 0.0) or not math.isfinite(sigma):
            raise ModelError(f"{path}.sigma: must be positive and finite")
        return GaussianNllDistortion(sigma=sigma)
    if kind == "feature_mse":
        fm = _parse_layers(_require(obj, "feature_map", path),
                           f"{path}.feature_map")
        return FeatureMseDistortion(feature_map=fm)
    raise ModelError(f"{path}.type: unknown distortion type {kind!r}")


def model_from_dict(obj: dict) -> ModelSpec:
    name = _require(obj, "name", "manifest")
    prior = _parse_prior(_require(obj, "prior", "manifest"), "prior")
    decoder = _parse_layers(_require(obj, "decoder", "manifest"), "decoder")
    distortion = _parse_distortion(
        _require(obj, "distortion", "manifest"), "distortion")
    prior_dim = prior.dim
    if prior_dim != decoder.latent_dim:
        raise ModelError(
            f"prior dimension {prior_dim} != decoder.latent_dim "
            f"{decoder.latent_dim}")
    if isinstance(distortion, FeatureMseDistortion):
        if distortion.feature_map.latent_dim != decoder.output_dim:
            raise ModelError(
                "distortion.feature_map.latent_dim "
                f"{distortion.feature_map.latent_dim} != decoder.output_dim "
                f"{decoder.output_dim}")
    return ModelSpec(name=name, prior=prior, decoder=decoder,
                     distortion=distortion)


def load_model(path) -> ModelSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read model manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"model manifest {path} is not valid JSON: {exc}") from exc
    return model_from_dict(obj)


def _encode_weights(weight: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(weight, dtype="<f8").tobytes()).decode("ascii")


def _decoder_to_dict(dec: Decoder) -> dict:
    layers = []
    for layer in dec.layers:
        if isinstance(layer, LinearLayer):
            layers.append({
                "type": "linear",
                "rows": int(layer.weight.shape[0]),
                "cols": int(layer.weight.shape[1]),
                "weights": _encode_weights(layer.weight),
                "bias": [float(b) for b in layer.bias],
            })
        else:
            layers.append({"type": layer.kind})
    return {"latent_dim": dec.latent_dim, "output_dim": dec.output_dim,
            "layers": layers}


def model_to_dict(model: ModelSpec) -> dict:
    if isinstance(model.prior, GaussianPrior):
        prior = {"type": "gaussian", "dim": model.prior.dim}
    else:
        prior = {"type": "mixture", "components": [
            {"weight": c.weight, "mean": [float(v) for v in c.mean],
             "scale": c.scale} for c in model.prior.components]}
    if isinstance(model.distortion, MseDistortion):
        dist = {"type": "mse"}
    elif isinstance(model.distortion, GaussianNllDistortion):
        dist = {"type": "gaussian_nll", "sigma": model.distortion.sigma}
    else:
        dist = {"type": "feature_mse",
                "feature_map": _decoder_to_dict(model.distortion.feature_map)}
    return {"name": model.name, "prior": prior,
            "decoder": _decoder_to_dict(model.decoder), "distortion": dist}


def save_model(model: ModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# dataset files

def load_dataset(path, output_dim: int | None = None) -> np.ndarray:
    """Read a dataset CSV: one row per data point, one column per output
    coordinate; lines starting with '#' are comments."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for lineno, line in enumerate(csv.reader(fh), start=1):
                if not line or line[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in line])
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}:{lineno}: non-numeric value: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"dataset {path} contains no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"dataset {path} has ragged rows (widths {sorted(widths)})")
    data = np.asarray(rows, dtype=np.float64)
    if output_dim is not None and data.shape[1] != output_dim:
        raise ConfigError(
            f"dataset {path} has {data.shape[1]} columns, model expects "
            f"{output_dim}")
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"dataset {path} has non-finite values")
    return data
