"""Brute-force quadrature ground truth for low-dimensional latents.

Integrals over the annealed posterior q_beta(z|x) proportional to
p(z) exp(-beta d(x, f(z))) are evaluated with the trapezoid rule on a wide
prior-standardized box, entirely in log space.  For smooth integrands that
decay inside the box the trapezoid rule converges faster than any power of
the spacing, so a dense grid gives reference values good to ~1e-9; the cost
is exponential in the latent dimension, which is why this stops at 2.

These routines share the model evaluation code with the sampler but share
none of its estimator machinery, so agreement between the two is a real
consistency check of the annealed-curve estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model as M
from .errors import ConfigError

_CHUNK = 200_000


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: int = 2001
    half_width: float = 10.0

    def __post_init__(self):
        if self.nodes < 101 or self.nodes % 2 == 0:
            raise ConfigError(
                f"grid nodes must be odd and >= 101, got {self.nodes}")
        if not (self.half_width >= 6.0):
            raise ConfigError(
                f"grid half-width must be >= 6 prior scales, got {self.half_width}")


DEFAULT_GRID = QuadratureGrid()


def _axis_bounds(prior, half_width: float) -> tuple[float, float]:
    """Integration bounds covering every prior component out to half_width
    of its own scale."""
    if isinstance(prior, M.GaussianPrior):
        return -half_width, half_width
    lo = math.inf
    hi = -math.inf
    for comp in prior.components:
        mean = np.asarray(comp.mean, dtype=np.float64)
        lo = min(lo, float(np.min(mean)) - half_width * comp.scale)
        hi = max(hi, float(np.max(mean)) + half_width * comp.scale)
    return lo, hi


def _axis(model: M.ModelSpec, grid: QuadratureGrid):
    """Node positions and log trapezoid weights for one latent axis."""
    a, b = _axis_bounds(model.prior, grid.half_width)
    nodes = np.linspace(a, b, grid.nodes)
    h = (b - a) / (grid.nodes - 1)
    logw = np.full(grid.nodes, math.log(h))
    logw[0] += math.log(0.5)
    logw[-1] += math.log(0.5)
    return nodes, logw


def _check_dim(model: M.ModelSpec) -> int:
    dim = model.latent_dim
    if dim > 2:
        raise ConfigError(
            f"quadrature supports latent dimension <= 2, model has {dim}")
    return dim


def _grid_points(model: M.ModelSpec, grid: QuadratureGrid):
    """(points, log cell weights) covering the integration box."""
    dim = _check_dim(model)
    nodes, logw = _axis(model, grid)
    if dim == 1:
        return nodes[:, None], logw
    za, zb = np.meshgrid(nodes, nodes, indexing="ij")
    pts = np.column_stack([za.ravel(), zb.ravel()])
    lw = (logw[:, None] + logw[None, :]).ravel()
    return pts, lw


def _log_unnorm_values(model: M.ModelSpec, x: np.ndarray, beta: float,
                       pts: np.ndarray):
    """log p(z) - beta d and the raw distortion d, chunked over rows."""
    n = pts.shape[0]
    lg = np.empty(n)
    d = np.empty(n)
    for start in range(0, n, _CHUNK):
        z = pts[start:start + _CHUNK]
        xhat = M.decoder_forward_batch(model.decoder, z)
        dc = M.distortion_value_batch(model.distortion, x, xhat)
        lp = M.prior_logpdf_batch(model.prior, z)
        d[start:start + z.shape[0]] = dc
        lg[start:start + z.shape[0]] = lp - beta * dc
    return lg, d


def _logsumexp(v: np.ndarray) -> float:
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def quad_log_z(model: M.ModelSpec, x, beta: float,
               grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """log of the annealed partition function Z_beta(x) by quadrature."""
    x = np.asarray(x, dtype=np.float64)
    pts, lw = _grid_points(model, grid)
    lg, _ = _log_unnorm_values(model, x, beta, pts)
    return _logsumexp(lg + lw)


def quad_rate_distortion(model: M.ModelSpec, x, beta: float,
                         grid: QuadratureGrid = DEFAULT_GRID):
    """(rate, distortion) of the optimal annealed posterior at beta.

    Distortion is the grid posterior mean of d; the rate uses the exact
    identity R = -log Z - beta D for the optimal conditional.
    """
    x = np.asarray(x, dtype=np.float64)
    pts, lw = _grid_points(model, grid)
    lg, d = _log_unnorm_values(model, x, beta, pts)
    v = lg + lw
    m = float(np.max(v))
    w = np.exp(v - m)
    total = float(np.sum(w))
    log_z = m + math.log(total)
    distortion = float(np.sum(w * d)) / total
    rate = -log_z - beta * distortion
    return rate, distortion


def quad_kl_direct(model: M.ModelSpec, x, beta: float,
                   grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """KL(q_beta || prior) integrated pointwise, as an independent route to
    the rate (normalizes q on the grid, then integrates q log(q/p))."""
    x = np.asarray(x, dtype=np.float64)
    pts, lw = _grid_points(model, grid)
    lg, _ = _log_unnorm_values(model, x, beta, pts)
    log_z = _logsumexp(lg + lw)
    lq = lg - log_z
    q_cells = np.exp(lq + lw)
    lp = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], _CHUNK):
        lp[start:start + _CHUNK] = M.prior_logpdf_batch(
            model.prior, pts[start:start + _CHUNK])
    return float(np.sum(q_cells * (lq - lp)))


def quad_curve(model: M.ModelSpec, x, betas,
               grid: QuadratureGrid = DEFAULT_GRID):
    """(rate, distortion, log_z) triples for a sequence of betas.

    The log-partition value is reported relative to the same grid's
    beta = 0 normalization.  That cancels the common quadrature mass
    defect from every row, and makes the beta = 0 row exactly
    (0.0, prior-mean distortion, 0.0) rather than zero up to grid error.
    """
    x = np.asarray(x, dtype=np.float64)
    pts, lw = _grid_points(model, grid)
    lp, d = _log_unnorm_values(model, x, 0.0, pts)
    base = lp + lw

    def stats(b: float):
        v = base - b * d
        m = float(np.max(v))
        w = np.exp(v - m)
        total = float(np.sum(w))
        return m + math.log(total), float(np.sum(w * d)) / total

    lz0, _ = stats(0.0)
    rows = []
    for beta in betas:
        b = float(beta)
        lz, dist = stats(b)
        log_z = (lz - lz0) + 0.0
        rate = -log_z - b * dist + 0.0
        rows.append((rate, dist, log_z))
    return rows


def quad_log_marginal(model: M.ModelSpec, x,
                      grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """log p(x) for likelihood-distortion models: Z at beta = 1."""
    if not isinstance(model.distortion, M.GaussianNllDistortion):
        raise ConfigError(
            "log marginal requires the gaussian-nll distortion, model has "
            f"{type(model.distortion).__name__}")
    return quad_log_z(model, x, 1.0, grid)


def posterior_cdf(model: M.ModelSpec, x, beta: float,
                  grid: QuadratureGrid = DEFAULT_GRID):
    """CDF of the 1-D annealed posterior as a callable, for
    probability-integral-transform checks of exact-sample constructions."""
    if model.latent_dim != 1:
        raise ConfigError(
            f"posterior cdf is 1-d only, model has latent dimension "
            f"{model.latent_dim}")
    x = np.asarray(x, dtype=np.float64)
    nodes, _ = _axis(model, grid)
    h = float(nodes[1] - nodes[0])
    lg, _ = _log_unnorm_values(model, x, beta, nodes[:, None])
    m = float(np.max(lg))
    f = np.exp(lg - m)
    # cumulative trapezoid per segment, so the node CDF carries no
    # half-cell bias
    seg = 0.5 * (f[1:] + f[:-1]) * h
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    cum /= cum[-1]

    def cdf(z: float) -> float:
        return float(np.interp(z, nodes, cum))

    return cdf
