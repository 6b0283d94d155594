"""Bidirectional sandwich validation of the annealed estimates.

On simulated data the latent that generated a point is an exact posterior
sample, provided the observation noise matches the annealing endpoint: with
the squared-error distortion, q_beta is the exact conditional when the
noise variance is 1/(2 beta); with the gaussian-nll distortion it is
sigma^2 / beta.  Running the annealing forward gives a stochastic lower
bound on log Z at the endpoint, running it in reverse from the generating
latent gives a stochastic upper bound, and the gap between the two
certifies how much the sampler under-covers the posterior.  Gaps at
different compression rates come from separate sandwiches, one per
annealing endpoint, each with its own matched-noise data.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ais
from . import model as M
from . import rng as R
from .errors import ConfigError
from .schedule import Schedule


@dataclass(frozen=True)
class SimulatedPair:
    """A (generating latent, observation) pair tied to one annealing
    endpoint.  pair_id keys the random streams of the sandwich run, so a
    pair carries its identity with it and results do not depend on list
    order."""

    z_star: np.ndarray
    x: np.ndarray
    beta_target: float
    pair_id: int = 0


def _noise_variance(dist, beta_target: float) -> float:
    if isinstance(dist, M.MseDistortion):
        return 1.0 / (2.0 * beta_target)
    if isinstance(dist, M.GaussianNllDistortion):
        return dist.sigma * dist.sigma / beta_target
    raise ConfigError(
        "pair simulation needs the mse or gaussian-nll distortion, model "
        f"has {type(dist).__name__} (no tractable noise model)")


def simulate_pair(model: M.ModelSpec, beta_target: float,
                  gen: np.random.Generator, pair_id: int = 0) -> SimulatedPair:
    """Draw z from the prior and an observation with endpoint-matched noise."""
    if not (beta_target > 0.0):
        raise ConfigError(f"beta_target must be positive, got {beta_target}")
    var = _noise_variance(model.distortion, beta_target)
    z_star = M.prior_sample(model.prior, gen)
    mean = M.decoder_forward(model.decoder, z_star)
    x = mean + math.sqrt(var) * gen.standard_normal(model.output_dim)
    return SimulatedPair(z_star=z_star, x=x, beta_target=beta_target,
                         pair_id=pair_id)


def make_pairs(model: M.ModelSpec, beta_target: float, n_pairs: int,
               master_seed: int) -> list[SimulatedPair]:
    """n_pairs simulated pairs on per-pair streams keyed by pair index."""
    if n_pairs < 1:
        raise ConfigError(f"need at least one pair, got {n_pairs}")
    out = []
    for i in range(n_pairs):
        gen = R.chain_stream(master_seed, i, 0, R.PURPOSE_SIMULATE)
        out.append(simulate_pair(model, beta_target, gen, pair_id=i))
    return out


def _sandwich_one(model: M.ModelSpec, pair: SimulatedPair, sched: Schedule,
                  n_chains: int, hmc, master_seed: int):
    fwd = ais.forward_ais(
        model, pair.x, sched, n_chains, hmc,
        R.chain_streams(master_seed, pair.pair_id, n_chains,
                        R.PURPOSE_FORWARD))
    lower = None
    for p in fwd:
        if p.k == sched.n:
            lower = p.log_z_hat
    rev = ais.reverse_ais(
        model, pair.x, pair.z_star, sched, n_chains, hmc,
        R.chain_streams(master_seed, pair.pair_id, n_chains,
                        R.PURPOSE_REVERSE))
    upper = None
    for p in rev:
        if p.k == 0:
            upper = p.log_z_upper
    if lower is None or upper is None:
        raise ConfigError(
            "sandwich schedule must report both endpoints (indices 0 and n)")
    return lower, upper


def bdmc_gap(model: M.ModelSpec, pairs: list[SimulatedPair], sched: Schedule,
             n_chains: int, hmc, master_seed: int, n_threads: int = 1):
    """(lower, upper, gap) averaged over the pairs.

    lower is the mean forward log-partition estimate at the endpoint, upper
    the mean reverse estimate started at each pair's generating latent.
    Per-pair reductions use exact summation, so any ordering of the pairs
    (and any thread count) produces the identical result.
    """
    if not pairs:
        raise ConfigError("need at least one simulated pair")
    for pair in pairs:
        if pair.beta_target != sched.beta_max:
            raise ConfigError(
                f"pair {pair.pair_id} was simulated for endpoint "
                f"{pair.beta_target}, schedule ends at {sched.beta_max}")

    def run_one(pair):
        return _sandwich_one(model, pair, sched, n_chains, hmc, master_seed)

    if n_threads <= 1:
        results = [run_one(p) for p in pairs]
    else:
        pool = ThreadPoolExecutor(max_workers=n_threads)
        try:
            results = list(pool.map(run_one, pairs))
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

    n = len(results)
    lower = math.fsum(r[0] for r in results) / n
    upper = math.fsum(r[1] for r in results) / n
    return lower, upper, (upper - lower) + 0.0
