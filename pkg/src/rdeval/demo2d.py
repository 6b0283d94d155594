"""Built-in 2-D demo: three toy models whose exact curves illustrate how
prior and decoder quality trade off across rates.

All three models map a 1-D latent to 2-D outputs under squared-error
distortion, and the demo evaluates them at the single built-in point
x = (2, 1) using the quadrature backend, so the output is deterministic.

* ``shared-wide-prior``: decoder z -> (z, 0) with a standard normal
  prior.  The second output coordinate is dead, so distortion can never
  drop below 1 at the demo point.
* ``shared-matched-prior``: the same decoder with a single off-center
  Gaussian prior.  Its mean and scale are solved so the prior log-density
  at z = 2 (the decoder's best latent for the demo point) equals the
  standard normal's.  As beta grows the optimal channel concentrates
  there, so the two shared-decoder rates converge, while at low rates the
  off-center prior is much closer to the demo point and wins outright.
* ``offset-decoder``: decoder z -> (z, 0.9) with a slightly off-center
  prior.  Its second coordinate nearly matches the demo point, so its
  distortion floor is far lower, but its prior is worse than the matched
  one.  Reading distortion at matched rate, it loses at low rates and
  wins at high rates: the curves cross.
"""

from __future__ import annotations

import math

import numpy as np

from . import model as M
from . import oracle
from .schedule import Schedule, make_schedule

DEMO_X = np.array([2.0, 1.0])
MATCHED_SCALE = 0.8
OFFSET_PRIOR_MEAN = -0.2
LIFT = 0.9
DEMO_N_DISTS = 32
DEMO_BETA_MAX = 40.0


def matched_prior_mean() -> float:
    """Mean of the off-center prior with the same log-density at z = x[0]
    as the standard normal, solved in closed form."""
    s = MATCHED_SCALE
    z = float(DEMO_X[0])
    return z + math.sqrt(2.0 * s * s * (0.5 * z * z - math.log(s)))


def _line_decoder(second_coord: float) -> M.Decoder:
    return M.Decoder(layers=(
        M.LinearLayer(weight=np.array([[1.0], [0.0]]),
                      bias=np.array([0.0, second_coord])),
    ), latent_dim=1, output_dim=2)


def demo_models() -> tuple[M.ModelSpec, ...]:
    shared = _line_decoder(0.0)
    wide = M.ModelSpec(name="shared-wide-prior",
                       prior=M.GaussianPrior(dim=1),
                       decoder=shared,
                       distortion=M.MseDistortion())
    matched = M.ModelSpec(
        name="shared-matched-prior",
        prior=M.MixturePrior(components=(
            M.MixtureComponent(weight=1.0,
                               mean=np.array([matched_prior_mean()]),
                               scale=MATCHED_SCALE),),
            dim=1),
        decoder=shared,
        distortion=M.MseDistortion())
    offset = M.ModelSpec(
        name="offset-decoder",
        prior=M.MixturePrior(components=(
            M.MixtureComponent(weight=1.0,
                               mean=np.array([OFFSET_PRIOR_MEAN]),
                               scale=1.0),),
            dim=1),
        decoder=_line_decoder(LIFT),
        distortion=M.MseDistortion())
    return wide, matched, offset


def demo_schedule(n: int = DEMO_N_DISTS, beta_max: float = DEMO_BETA_MAX,
                  shape: str = "sigmoid", tau: float = 4.0) -> Schedule:
    """Beta grid for the demo curves, reporting at every grid index."""
    return make_schedule(n, beta_max, shape, report_points=n + 1, tau=tau)


def curve_rows(model: M.ModelSpec, x, sched: Schedule,
               grid: oracle.QuadratureGrid = oracle.DEFAULT_GRID):
    """Exact (k, beta, rate, distortion, log_z) rows at the schedule's
    report indices."""
    betas = [float(sched.betas[k]) for k in sched.report_indices]
    triples = oracle.quad_curve(model, x, betas, grid)
    return [(k, b, r, d, lz)
            for k, b, (r, d, lz) in zip(sched.report_indices, betas, triples)]


def crossing_exists(rows_a, rows_b) -> bool:
    """True when the two curves swap distortion order somewhere on their
    common rate range (distortion read at matched rate)."""
    ra = np.array([row[2] for row in rows_a])
    da = np.array([row[3] for row in rows_a])
    rb = np.array([row[2] for row in rows_b])
    db = np.array([row[3] for row in rows_b])
    lo = max(ra.min(), rb.min())
    hi = min(ra.max(), rb.max())
    if not (hi > lo):
        return False
    grid = np.linspace(lo, hi, 256)
    diff = np.interp(grid, ra, da) - np.interp(grid, rb, db)
    return bool(np.any(diff > 0.0) and np.any(diff < 0.0))
