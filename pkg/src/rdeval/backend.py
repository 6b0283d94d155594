"""Selection between the compiled sampler kernel and the numpy fallback.

The compiled extension is optional; when it is importable and the model fits
its supported surface (gaussian or mixture prior, linear/tanh/relu/sigmoid
layers, mse or gaussian-nll distortion), it is used.  RDEVAL_BACKEND=python
or =compiled forces one side; `force=` does the same per call.  Both
backends implement the same two-method interface and consume the same
caller-supplied random draws.
"""

from __future__ import annotations

import logging
import math
import os

import numpy as np

from . import model as M
from ._kernels_py import PyKernel
from .errors import ConfigError

logger = logging.getLogger("rdeval.backend")

try:
    from . import _kernels as _compiled_mod
    if not hasattr(_compiled_mod, "CompiledKernel"):  # stale/empty build
        _compiled_mod = None
except ImportError:  # pragma: no cover - depends on build environment
    _compiled_mod = None

_LAYER_CODES = {"tanh": 1, "relu": 2, "sigmoid": 3}


def compiled_available() -> bool:
    return _compiled_mod is not None


def compiled_supports(model: M.ModelSpec) -> bool:
    return not isinstance(model.distortion, M.FeatureMseDistortion)


def _pack(model: M.ModelSpec, x: np.ndarray):
    """Flatten a model into the arrays the compiled kernel consumes."""
    layers = model.decoder.layers
    n_layers = len(layers)
    lkind = np.zeros(n_layers, dtype=np.int32)
    woff = np.full(n_layers, -1, dtype=np.int64)
    boff = np.full(n_layers, -1, dtype=np.int64)
    widths = np.zeros(n_layers + 1, dtype=np.int32)
    widths[0] = model.latent_dim
    buf = []
    used = 0
    for i, layer in enumerate(layers):
        if isinstance(layer, M.LinearLayer):
            lkind[i] = 0
            woff[i] = used
            flat_w = np.ascontiguousarray(layer.weight, dtype=np.float64).ravel()
            buf.append(flat_w)
            used += flat_w.size
            boff[i] = used
            buf.append(np.asarray(layer.bias, dtype=np.float64))
            used += layer.bias.size
            widths[i + 1] = layer.weight.shape[0]
        else:
            lkind[i] = _LAYER_CODES[layer.kind]
            widths[i + 1] = widths[i]
    wbuf = np.concatenate(buf) if buf else np.zeros(0)

    if isinstance(model.prior, M.GaussianPrior):
        pkind = 0
        logw = np.zeros(0)
        means = np.zeros((0, model.latent_dim))
        scales = np.zeros(0)
    else:
        pkind = 1
        logw = np.array([math.log(c.weight) for c in model.prior.components])
        means = np.ascontiguousarray(
            np.stack([c.mean for c in model.prior.components]))
        scales = np.array([c.scale for c in model.prior.components])

    dist = model.distortion
    m = model.output_dim
    if isinstance(dist, M.MseDistortion):
        d_const, d_qscale = 0.0, 1.0
    elif isinstance(dist, M.GaussianNllDistortion):
        d_const = 0.5 * m * math.log(2.0 * math.pi * dist.sigma ** 2)
        d_qscale = 1.0 / (2.0 * dist.sigma ** 2)
    else:
        raise ConfigError("compiled kernel does not support this distortion")

    return (lkind, widths, woff, boff, wbuf, pkind, logw, means, scales,
            d_const, d_qscale, np.asarray(x, dtype=np.float64))


def backend_choice() -> str:
    choice = os.environ.get("RDEVAL_BACKEND", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise ConfigError(
            f"RDEVAL_BACKEND must be auto, compiled, or python; got {choice!r}")
    return choice


def active_backend_name(model: M.ModelSpec | None = None) -> str:
    choice = backend_choice()
    if choice == "python":
        return "python"
    ok = compiled_available() and (model is None or compiled_supports(model))
    if choice == "compiled" and not ok:
        raise ConfigError("compiled backend requested but not usable here")
    return "compiled" if ok else "python"


def make_kernel(model: M.ModelSpec, x: np.ndarray, force: str | None = None):
    choice = force if force is not None else backend_choice()
    if choice not in ("auto", "compiled", "python"):
        raise ConfigError(f"unknown backend {choice!r}")
    if choice == "python":
        return PyKernel(model, x)
    usable = compiled_available() and compiled_supports(model)
    if choice == "compiled":
        if not compiled_available():
            raise ConfigError("compiled backend requested but the extension "
                              "is not importable")
        if not compiled_supports(model):
            raise ConfigError("compiled backend does not support this model; "
                              "use the python backend")
        return _compiled_mod.CompiledKernel(*_pack(model, x))
    if usable:
        return _compiled_mod.CompiledKernel(*_pack(model, x))
    logger.debug("using python kernel (compiled unavailable or unsupported)")
    return PyKernel(model, x)
