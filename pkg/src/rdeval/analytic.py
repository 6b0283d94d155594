"""Closed-form rate-distortion curve for linear-Gaussian decoders.

For x = W z + b + noise with a standard Gaussian prior over z and the
Gaussian negative log-likelihood distortion, the optimal annealed posterior
at inverse temperature beta is Gaussian with moments expressible through
the SVD of W.  Writing W = U diag(d_i) V^T:

    mu_beta    = V diag(d_i / (d_i^2 + 1/beta)) U^T (x - b)
    Sigma_beta = V diag(1 / (beta d_i^2 + 1)) V^T   (+ identity on the
                 orthogonal complement of span V)

Rate is the Gaussian KL against the prior, distortion is the posterior
expectation of the negative log-likelihood.  Everything here is exact (up
to the SVD), making this module a correctness reference for the sampled
curve.  A likelihood scale sigma != 1 is handled by evaluating the unit
formulas at beta/sigma^2 and restoring the sigma-dependent constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from . import model as M
from .errors import ConfigError, NumericError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LinearAnalytic:
    w: np.ndarray
    b: np.ndarray
    svd: linalg.SvdResult
    latent_dim: int
    output_dim: int


def make_linear_analytic(w, b) -> LinearAnalytic:
    w = linalg.as_matrix(w, "decoder weight")
    b = np.asarray(b, dtype=np.float64)
    m, k = w.shape
    if b.shape != (m,):
        raise ConfigError(
            f"bias has shape {b.shape}, want ({m},) to match the weight")
    dec = linalg.svd(w)
    err = np.max(np.abs(dec.reconstruct() - w)) if w.size else 0.0
    if err > 1e-9:
        raise NumericError(
            f"SVD reconstruction error {err:.3g} exceeds 1e-9")
    return LinearAnalytic(w=w, b=b, svd=dec, latent_dim=k, output_dim=m)


def from_model(model: M.ModelSpec) -> tuple[LinearAnalytic, float]:
    """Collapse a purely linear decoder into (LinearAnalytic, sigma).

    Requires a standard Gaussian prior and a gaussian-nll distortion;
    stacked linear layers (for example a blur layer after the decoder
    proper) are folded into a single affine map.
    """
    if not isinstance(model.prior, M.GaussianPrior):
        raise ConfigError(
            "closed-form curve requires a standard gaussian prior, "
            f"model has {type(model.prior).__name__}")
    if not isinstance(model.distortion, M.GaussianNllDistortion):
        raise ConfigError(
            "closed-form curve requires the gaussian-nll distortion, "
            f"model has {type(model.distortion).__name__}")
    k = model.latent_dim
    w = np.eye(k)
    b = np.zeros(k)
    for layer in model.decoder.layers:
        if not isinstance(layer, M.LinearLayer):
            raise ConfigError(
                "closed-form curve requires a linear decoder, found "
                f"activation {layer.kind!r}")
        w = layer.weight @ w
        b = layer.weight @ b + layer.bias
    return make_linear_analytic(w, b), model.distortion.sigma


def _moments(la: LinearAnalytic, x: np.ndarray, beta: float):
    """(mu, full eigvec matrix, eigvals) of the unit-sigma posterior."""
    d = la.svd.singular_values
    shrink = d / (d * d + 1.0 / beta)
    proj = la.svd.u.T @ (x - la.b)
    mu = la.svd.v @ (shrink * proj)
    eigvals = np.ones(la.latent_dim)
    r = d.shape[0]
    eigvals[:r] = 1.0 / (beta * d * d + 1.0)
    vecs = np.zeros((la.latent_dim, la.latent_dim))
    vecs[:, :r] = la.svd.v
    if r < la.latent_dim:
        linalg._complete_orthonormal(vecs, list(range(r, la.latent_dim)))
    return mu, vecs, eigvals


def posterior_moments(la: LinearAnalytic, x, beta: float):
    """Mean and covariance eigendecomposition of the optimal posterior."""
    if not (beta > 0.0):
        raise ConfigError(f"posterior moments need beta > 0, got {beta}")
    x = np.asarray(x, dtype=np.float64)
    return _moments(la, x, beta)


def analytic_rate(la: LinearAnalytic, x, beta: float,
                  sigma: float = 1.0) -> float:
    """KL(posterior || prior) in nats; 0 at beta = 0 by the prior limit."""
    if beta < 0.0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if beta == 0.0:
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    mu, _, eigvals = _moments(la, x, beta / (sigma * sigma))
    k = la.latent_dim
    tr = float(np.sum(eigvals))
    logdet = float(np.sum(np.log(eigvals)))
    return 0.5 * (tr + float(mu @ mu) - k - logdet)


def _distortion_unit(la: LinearAnalytic, x: np.ndarray, beta_eff: float) -> float:
    """Posterior-expected nll at sigma = 1 evaluated at beta_eff."""
    resid = x - la.b
    if beta_eff == 0.0:
        d = la.svd.singular_values
        quad = float(resid @ resid) + float(np.sum(d * d))
        return 0.5 * la.output_dim * LOG_2PI + 0.5 * quad
    mu, _, _ = _moments(la, x, beta_eff)
    wmu = la.w @ mu
    d = la.svd.singular_values
    s = 1.0 / (beta_eff * d * d + 1.0)
    tr_wsw = float(np.sum(d * d * s))
    return (0.5 * la.output_dim * LOG_2PI
            + 0.5 * float(resid @ resid)
            - float(wmu @ resid)
            + 0.5 * (float(wmu @ wmu) + tr_wsw))


def analytic_distortion_nll(la: LinearAnalytic, x, beta: float,
                            sigma: float = 1.0) -> float:
    """Posterior-expected gaussian-nll distortion at inverse temperature
    beta; beta = 0 gives the exact prior expectation."""
    if beta < 0.0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    x = np.asarray(x, dtype=np.float64)
    s2 = sigma * sigma
    unit = _distortion_unit(la, x, beta / s2)
    half_quad = unit - 0.5 * la.output_dim * LOG_2PI
    return 0.5 * la.output_dim * math.log(2.0 * math.pi * s2) + half_quad / s2


def analytic_curve(la: LinearAnalytic, dataset, betas,
                   sigma: float = 1.0):
    """Dataset-averaged (beta, rate, distortion) triples.

    Averages use exact summation in row order so the output is independent
    of any parallel evaluation order upstream.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise ConfigError(
            f"dataset must be a non-empty 2-d array, got shape {dataset.shape}")
    n = dataset.shape[0]
    out = []
    for beta in betas:
        beta = float(beta)
        r = math.fsum(analytic_rate(la, row, beta, sigma)
                      for row in dataset) / n
        d = math.fsum(analytic_distortion_nll(la, row, beta, sigma)
                      for row in dataset) / n
        out.append((beta, r, d))
    return out


def log_marginal(la: LinearAnalytic, x, sigma: float = 1.0) -> float:
    """log N(x; b, W W^T + sigma^2 I), the exact model evidence.

    Computed through the SVD: eigenvalues of the covariance are
    d_i^2 + sigma^2 on the left singular directions and sigma^2 on the
    complement of their span.
    """
    x = np.asarray(x, dtype=np.float64)
    resid = x - la.b
    d = la.svd.singular_values
    s2 = sigma * sigma
    proj = la.svd.u.T @ resid
    perp2 = float(resid @ resid) - float(proj @ proj)
    quad = float(np.sum(proj * proj / (d * d + s2))) + max(perp2, 0.0) / s2
    logdet = float(np.sum(np.log(d * d + s2)))
    logdet += (la.output_dim - d.shape[0]) * math.log(s2)
    return -0.5 * (la.output_dim * LOG_2PI + logdet + quad)
