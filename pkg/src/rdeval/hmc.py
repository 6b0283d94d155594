"""Hamiltonian Monte Carlo transition and step-size tuning.

The transition is standard: resample momentum from a standard normal
(identity mass), integrate Hamilton's equations with the leapfrog scheme for
a fixed number of steps, and accept with probability min(1, exp(-dH)).
Non-finite Hamiltonians reject.  Only the step size is adapted, by a
preliminary pass over the schedule nudging each per-index step size toward a
0.65 acceptance rate; the leapfrog count stays fixed for the whole run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import model as M
from . import target as T
from .backend import make_kernel
from .errors import ConfigError, NumericError
from .schedule import Schedule

TARGET_ACCEPT = 0.65
TUNE_ETA = 0.02
STEP_FLOOR = 1e-8


def initial_step_size(latent_dim: int) -> float:
    return 0.1 * latent_dim ** -0.25


@dataclass(frozen=True)
class HmcParams:
    step_size: float
    n_leapfrog: int

    def __post_init__(self):
        if not (self.step_size > 0.0):
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if self.n_leapfrog < 1:
            raise ConfigError(
                f"n_leapfrog must be >= 1, got {self.n_leapfrog}")


def leapfrog(t: T.AnnealedTarget, z: np.ndarray, mom: np.ndarray,
             eps: float, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Integrate n_steps of the leapfrog scheme for potential U = -log q.

    Raises NumericError if the state goes non-finite mid-trajectory.
    """
    z = np.array(z, dtype=np.float64)
    p = np.array(mom, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        p -= 0.5 * eps * T.grad_potential(t, z)
        for step in range(n_steps):
            z += eps * p
            g = T.grad_potential(t, z)
            if not np.all(np.isfinite(g)):
                raise NumericError(
                    f"leapfrog state went non-finite at step {step + 1}")
            p -= (eps if step < n_steps - 1 else 0.5 * eps) * g
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(p))):
        raise NumericError("leapfrog produced a non-finite state")
    return z, p


def hmc_step(t: T.AnnealedTarget, z: np.ndarray, params: HmcParams,
             rng: np.random.Generator) -> tuple[np.ndarray, bool, float]:
    """One transition; returns (new state, accepted, acceptance probability).

    On rejection the returned state is the input object's value, bitwise.
    Draw order per step: momentum vector, then one uniform.
    """
    z = np.asarray(z, dtype=np.float64)
    mom = rng.standard_normal(z.shape[0])
    u = rng.uniform()
    u0 = T.potential(t, z)
    k0 = 0.5 * float(mom @ mom)
    try:
        z1, p1 = leapfrog(t, z, mom, params.step_size, params.n_leapfrog)
    except NumericError:
        return z, False, 0.0
    u1 = T.potential(t, z1)
    k1 = 0.5 * float(p1 @ p1)
    dh = (u1 + k1) - (u0 + k0)
    if not math.isfinite(dh):
        return z, False, 0.0
    aprob = math.exp(-max(dh, 0.0))
    if u < aprob:
        return z1, True, aprob
    return z, False, aprob


# ---------------------------------------------------------------------------
# step-size profiles

@dataclass(frozen=True)
class TuneProfile:
    step_sizes: np.ndarray  # (n+1,), entry k drives the transition at index k
    fingerprint: dict
    n_leapfrog: int

    def step_size_at(self, k: int) -> float:
        return float(self.step_sizes[k])


def ensure_profile_matches(profile: TuneProfile, sched: Schedule) -> None:
    want = sched.fingerprint()
    if profile.fingerprint != want:
        raise ConfigError(
            f"tuning profile fingerprint {profile.fingerprint} does not match "
            f"the requested schedule {want}")
    if profile.step_sizes.shape[0] != sched.n + 1:
        raise ConfigError(
            f"tuning profile has {profile.step_sizes.shape[0]} step sizes, "
            f"schedule needs {sched.n + 1}")


def save_profile(profile: TuneProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"fingerprint": profile.fingerprint,
                   "n_leapfrog": profile.n_leapfrog,
                   "step_sizes": [float(e) for e in profile.step_sizes]}, fh)
        fh.write("\n")


def load_profile(path) -> TuneProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read tuning profile {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"tuning profile {path} is not valid JSON: {exc}") from exc
    for field in ("fingerprint", "step_sizes", "n_leapfrog"):
        if field not in obj:
            raise ConfigError(
                f"tuning profile {path} is missing the {field!r} field")
    return TuneProfile(
        step_sizes=np.asarray(obj["step_sizes"], dtype=np.float64),
        fingerprint=obj["fingerprint"],
        n_leapfrog=int(obj["n_leapfrog"]))


def tune_step_sizes(model: M.ModelSpec, x: np.ndarray, sched: Schedule,
                    params: HmcParams,
                    streams: list[np.random.Generator]) -> TuneProfile:
    """Preliminary annealing pass that adapts one step size per schedule
    index.

    The running step size is carried from index to index; after the
    transition at index k with mean acceptance probability a over chains it
    is updated by eps <- eps * exp(eta * (a - 0.65)), floored at 1e-8, and
    the updated value is stored for index k.  A later run replays the stored
    values without further adaptation.
    """
    from .rng import StepDraws  # local import to avoid a cycle at module load

    n_chains = len(streams)
    kern = make_kernel(model, x)
    dim = model.latent_dim
    Z = np.stack([M.prior_sample(model.prior, g) for g in streams])
    lp, d = kern.eval(Z)
    draws = [StepDraws(g, dim) for g in streams]

    betas = sched.betas
    eps = params.step_size
    out = np.empty(sched.n + 1)
    out[0] = eps
    mom = np.empty((n_chains, dim))
    u = np.empty(n_chains)
    for k in range(1, sched.n + 1):
        for j, dr in enumerate(draws):
            mom[j], u[j] = dr.next()
        aprob, _ = kern.sweep(float(betas[k]), Z, lp, d, mom, u, eps,
                              params.n_leapfrog)
        mean_accept = float(np.mean(aprob))
        eps = max(eps * math.exp(TUNE_ETA * (mean_accept - TARGET_ACCEPT)),
                  STEP_FLOOR)
        out[k] = eps
    return TuneProfile(step_sizes=out, fingerprint=sched.fingerprint(),
                       n_leapfrog=params.n_leapfrog)
