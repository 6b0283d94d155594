"""Annealed importance sampling over the annealed posterior family.

The forward pass runs M chains from the prior toward high beta, accumulating
incremental log importance weights.  At schedule index k the weight picks up
log q_k(z) - log q_{k-1}(z) = -(beta_k - beta_{k-1}) * d(z) and the chain
then takes one HMC transition targeting level k.  Weighted reductions at the
report indices give distortion, log partition function, and rate estimates:

    log Z_k = logsumexp_i(log w_i) - log M      (lower bound in expectation)
    D_k     = sum_i w~_i * d(z_i)
    R_k     = -log Z_k - beta_k * D_k

The reverse pass starts every chain at a supplied latent (an exact sample
from the final target, only available on simulated data), anneals downward,
and accumulates weights with the opposite sign.  On arrival at index k the
reduction upper-bounds (in expectation) the log partition mass accumulated
between beta_k and beta_max; the beta = 0 entry therefore upper-bounds
log Z at beta_max, which is what the sandwich diagnostic consumes.

All report-time reductions run in plain Python floats in fixed chain order,
then fixed data-point order, so results are independent of how work was
scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import model as M
from . import rng as R
from .backend import make_kernel
from .errors import ConfigError, NumericError
from .hmc import HmcParams, TuneProfile, ensure_profile_matches
from .schedule import Schedule


@dataclass(frozen=True)
class ChainState:
    """One chain at the end of a forward pass."""

    z: np.ndarray
    log_w: float
    accept_count: int


@dataclass(frozen=True)
class RDPoint:
    k: int
    beta: float
    rate_nats: float
    distortion: float
    log_z_hat: float
    mean_accept: float
    ess: float


@dataclass(frozen=True)
class ReversePoint:
    k: int
    beta: float
    log_z_upper: float


def _resolve_hmc(hmc, sched: Schedule):
    """Per-index step sizes plus the leapfrog count, from either a fixed
    parameter set or a tuned profile."""
    if isinstance(hmc, TuneProfile):
        ensure_profile_matches(hmc, sched)
        if hmc.n_leapfrog < 1:
            raise ConfigError(
                f"tuning profile has n_leapfrog {hmc.n_leapfrog}, need >= 1")
        return np.asarray(hmc.step_sizes, dtype=np.float64), hmc.n_leapfrog
    if isinstance(hmc, HmcParams):
        return np.full(sched.n + 1, hmc.step_size), hmc.n_leapfrog
    raise ConfigError(
        f"hmc argument must be HmcParams or TuneProfile, got {type(hmc).__name__}")


def _check_streams(streams, n_chains):
    if n_chains < 2:
        raise ConfigError(f"need at least 2 chains, got {n_chains}")
    if len(streams) != n_chains:
        raise ConfigError(
            f"got {len(streams)} random streams for {n_chains} chains")


def _reduce(k: int, beta: float, lw: np.ndarray, d: np.ndarray,
            accept_total: int, n_steps: int, n_chains: int) -> RDPoint:
    """Weighted reductions for one report index, in plain Python floats and
    fixed chain order.  At k = 0 every weight is zero, which makes log_z and
    rate exactly 0.0 and the distortion a plain arithmetic mean."""
    lw_list = [float(v) for v in lw]
    d_list = [float(v) for v in d]
    m = max(lw_list)
    s = 0.0
    for v in lw_list:
        s += math.exp(v - m)
    log_z = m + math.log(s) - math.log(n_chains)
    num = 0.0
    for v, dv in zip(lw_list, d_list):
        num += math.exp(v - m) * dv
    distortion = num / s
    rate = (-log_z - beta * distortion) + 0.0
    sq = 0.0
    for v in lw_list:
        wn = math.exp(v - m) / s
        sq += wn * wn
    ess = min(max(1.0 / sq, 1.0), float(n_chains))
    mean_accept = 1.0 if n_steps == 0 else accept_total / (n_steps * n_chains)
    return RDPoint(k=k, beta=beta, rate_nats=rate, distortion=distortion,
                   log_z_hat=log_z, mean_accept=mean_accept, ess=ess)


def _check_finite(lw: np.ndarray, k: int, beta: float) -> None:
    finite = np.isfinite(lw)
    if not finite.all():
        chain = int(np.argmin(finite))
        raise NumericError(
            f"chain {chain} importance weight became non-finite at schedule "
            f"index {k} (beta={beta:.6g})")


def _forward(model: M.ModelSpec, x: np.ndarray, sched: Schedule,
             n_chains: int, hmc, streams):
    _check_streams(streams, n_chains)
    eps_by_index, n_leap = _resolve_hmc(hmc, sched)
    kern = make_kernel(model, x)
    dim = model.latent_dim
    betas = sched.betas
    report = frozenset(sched.report_indices)

    Z = np.stack([M.prior_sample(model.prior, g) for g in streams])
    lp, d = kern.eval(Z)
    lw = np.zeros(n_chains)
    acc_counts = np.zeros(n_chains, dtype=np.int64)
    draws = [R.StepDraws(g, dim) for g in streams]
    mom = np.empty((n_chains, dim))
    u = np.empty(n_chains)

    points = []
    accept_total = 0
    if 0 in report:
        points.append(_reduce(0, 0.0, lw, d, accept_total, 0, n_chains))
    for k in range(1, sched.n + 1):
        beta = float(betas[k])
        lw -= (beta - float(betas[k - 1])) * d
        _check_finite(lw, k, beta)
        for j, dr in enumerate(draws):
            mom[j], u[j] = dr.next()
        _, acc = kern.sweep(beta, Z, lp, d, mom, u,
                            float(eps_by_index[k]), n_leap)
        acc_counts += acc
        accept_total += int(acc.sum())
        if k in report:
            points.append(_reduce(k, beta, lw, d, accept_total, k, n_chains))
    states = [ChainState(z=Z[j].copy(), log_w=float(lw[j]),
                         accept_count=int(acc_counts[j]))
              for j in range(n_chains)]
    return points, states


def forward_ais(model: M.ModelSpec, x: np.ndarray, sched: Schedule,
                n_chains: int, hmc, streams) -> list[RDPoint]:
    """Forward annealing pass; one RDPoint per report index."""
    points, _ = _forward(model, x, sched, n_chains, hmc, streams)
    return points


def forward_ais_with_states(model: M.ModelSpec, x: np.ndarray,
                            sched: Schedule, n_chains: int, hmc, streams):
    """Like forward_ais but also returns the final per-chain states, for
    weight-directed resampling of reconstructions."""
    return _forward(model, x, sched, n_chains, hmc, streams)


def reverse_ais(model: M.ModelSpec, x: np.ndarray, z_star: np.ndarray,
                sched: Schedule, n_chains: int, hmc,
                streams) -> list[ReversePoint]:
    """Anneal downward from beta_max starting every chain at z_star.

    On arrival at index k (after the transitions at indices n .. k+1) the
    accumulated weights estimate Z_k / Z_n without bias, so the reduction
    -(logsumexp(lw) - log M) is a stochastic upper bound on
    log(Z_n / Z_k).  At k = 0 that is an upper bound on log Z at beta_max.
    Entries are emitted in arrival order, beta descending.
    """
    _check_streams(streams, n_chains)
    eps_by_index, n_leap = _resolve_hmc(hmc, sched)
    z_star = np.asarray(z_star, dtype=np.float64)
    if z_star.shape != (model.latent_dim,):
        raise ConfigError(
            f"z_star has shape {z_star.shape}, model latent dimension "
            f"is {model.latent_dim}")
    kern = make_kernel(model, x)
    dim = model.latent_dim
    betas = sched.betas
    report = frozenset(sched.report_indices)

    Z = np.tile(z_star, (n_chains, 1))
    lp, d = kern.eval(Z)
    lw = np.zeros(n_chains)
    draws = [R.StepDraws(g, dim) for g in streams]
    mom = np.empty((n_chains, dim))
    u = np.empty(n_chains)

    points = []
    if sched.n in report:
        points.append(ReversePoint(k=sched.n, beta=float(betas[-1]),
                                   log_z_upper=_upper(lw, n_chains)))
    for j in range(sched.n, 0, -1):
        beta = float(betas[j])
        for i, dr in enumerate(draws):
            mom[i], u[i] = dr.next()
        kern.sweep(beta, Z, lp, d, mom, u, float(eps_by_index[j]), n_leap)
        lw += (beta - float(betas[j - 1])) * d
        _check_finite(lw, j, beta)
        k = j - 1
        if k in report:
            points.append(ReversePoint(k=k, beta=float(betas[k]),
                                       log_z_upper=_upper(lw, n_chains)))
    return points


def _upper(lw: np.ndarray, n_chains: int) -> float:
    lw_list = [float(v) for v in lw]
    m = max(lw_list)
    s = 0.0
    for v in lw_list:
        s += math.exp(v - m)
    return -(m + math.log(s) - math.log(n_chains)) + 0.0


def resample(states: list[ChainState], gen: np.random.Generator) -> np.ndarray:
    """Draw one latent from the weighted chain population.

    Selects a chain index with probability proportional to its importance
    weight and returns a copy of that chain's latent, for decoding into a
    reconstruction at the annealed rate.
    """
    if not states:
        raise ConfigError("cannot resample from an empty chain population")
    lws = [s.log_w for s in states]
    m = max(lws)
    weights = [math.exp(v - m) for v in lws]
    total = sum(weights)
    u = gen.uniform() * total
    acc = 0.0
    pick = len(states) - 1
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            pick = i
            break
    return states[pick].z.copy()


def rd_curve(model: M.ModelSpec, dataset: np.ndarray, sched: Schedule,
             n_chains: int, hmc, master_seed: int, n_threads: int = 1,
             on_point=None):
    """Forward pass for every row of the dataset plus the averaged curve.

    Returns (per_point, averaged) where per_point[i] is the RDPoint list for
    dataset row i and averaged is the across-point mean at each report
    index.  Per-point chain streams are derived from (master_seed, i), so
    the result does not depend on n_threads; cross-point averaging uses
    exact summation in row order.  When on_point is given it is called as
    on_point(i, points) in row order as soon as all rows up to i are done,
    so partial results can be flushed even if a later row fails.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise ConfigError(
            f"dataset must be a non-empty 2-d array, got shape {dataset.shape}")
    n_points = dataset.shape[0]

    def run_one(i: int):
        streams = R.chain_streams(master_seed, i, n_chains, R.PURPOSE_FORWARD)
        return forward_ais(model, dataset[i], sched, n_chains, hmc, streams)

    per_point: list = []
    if n_threads <= 1:
        for i in range(n_points):
            points = run_one(i)
            per_point.append(points)
            if on_point is not None:
                on_point(i, points)
    else:
        pool = ThreadPoolExecutor(max_workers=n_threads)
        try:
            futures = [pool.submit(run_one, i) for i in range(n_points)]
            for i, fut in enumerate(futures):
                points = fut.result()
                per_point.append(points)
                if on_point is not None:
                    on_point(i, points)
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

    averaged = []
    n_report = len(per_point[0])
    for r in range(n_report):
        first = per_point[0][r]
        avg = RDPoint(
            k=first.k, beta=first.beta,
            rate_nats=math.fsum(pp[r].rate_nats for pp in per_point) / n_points,
            distortion=math.fsum(pp[r].distortion for pp in per_point) / n_points,
            log_z_hat=math.fsum(pp[r].log_z_hat for pp in per_point) / n_points,
            mean_accept=math.fsum(pp[r].mean_accept for pp in per_point) / n_points,
            ess=math.fsum(pp[r].ess for pp in per_point) / n_points)
        averaged.append(avg)
    return per_point, averaged
