"""The annealed (unnormalized) posterior family.

For a model with prior p(z), decoder f, and distortion d, the family is

    q_beta(z | x)  proportional to  p(z) * exp(-beta * d(x, f(z))),

so log_unnorm(z) = log p(z) - beta * d(x, f(z)).  At beta = 0 this is the
prior, bit for bit.  The potential-energy convention used by the sampler is
U(z) = -log_unnorm(z); that negation lives here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M


@dataclass(frozen=True)
class AnnealedTarget:
    model: M.ModelSpec
    x: np.ndarray
    beta: float


def log_unnorm(t: AnnealedTarget, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=np.float64)
    lp = M.prior_logpdf(t.model.prior, z)
    d = M.distortion_value(t.model.distortion, t.x,
                           M.decoder_forward(t.model.decoder, z))
    return lp - t.beta * d


def grad_log_unnorm(t: AnnealedTarget, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return (M.prior_grad(t.model.prior, z)
            - t.beta * M.grad_distortion_wrt_z(t.model, t.x, z))


def potential(t: AnnealedTarget, z: np.ndarray) -> float:
    return -log_unnorm(t, z)


def grad_potential(t: AnnealedTarget, z: np.ndarray) -> np.ndarray:
    return -grad_log_unnorm(t, z)
