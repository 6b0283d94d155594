"""Annealing schedules over the inverse-temperature parameter beta.

A schedule is a strictly increasing grid beta_0 = 0 < ... < beta_n =
beta_max plus the subset of indices at which estimates are reported.  The
sigmoid shape concentrates grid points at both ends of the path (where the
annealed family changes fastest per unit beta on a log scale); the report
grid is likewise dense at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SHAPES = ("sigmoid", "linear")


@dataclass(frozen=True)
class Schedule:
    betas: np.ndarray           # (n+1,), betas[0] == 0.0, betas[-1] == beta_max
    report_indices: tuple[int, ...]
    shape: str
    tau: float

    @property
    def n(self) -> int:
        return self.betas.shape[0] - 1

    @property
    def beta_max(self) -> float:
        return float(self.betas[-1])

    def fingerprint(self) -> dict:
        return {"n": self.n, "beta_max": self.beta_max, "shape": self.shape,
                "tau": self.tau}


def report_indices(n: int, count: int) -> tuple[int, ...]:
    """Pick `count` indices in [0, n], log-dense toward both endpoints."""
    if count < 2:
        raise ConfigError(f"report_points must be >= 2, got {count}")
    if count >= n + 1:
        return tuple(range(n + 1))
    samples = max(8 * count, 64)
    ks = {0, n}
    half = n / 2.0
    for j in range(samples + 1):
        u = j / samples
        if u <= 0.5:
            k = int(round(half ** (2.0 * u)))
        else:
            k = n - int(round(half ** (2.0 * (1.0 - u))))
        ks.add(min(max(k, 0), n))
    ordered = sorted(ks)
    if len(ordered) <= count:
        return tuple(ordered)
    picked = {ordered[round(i * (len(ordered) - 1) / (count - 1))]
              for i in range(count)}
    return tuple(sorted(picked))


def make_schedule(n: int, beta_max: float, shape: str = "sigmoid",
                  report_points: int = 200, tau: float = 4.0) -> Schedule:
    if n < 2:
        raise ConfigError(f"schedule needs n >= 2 intermediate steps, got {n}")
    if not (beta_max > 0.0) or not np.isfinite(beta_max):
        raise ConfigError(f"beta_max must be positive and finite, got {beta_max}")
    if shape not in SHAPES:
        raise ConfigError(f"unknown schedule shape {shape!r} (want one of {SHAPES})")
    if shape == "sigmoid":
        if not (tau > 0.0):
            raise ConfigError(f"tau must be positive, got {tau}")
        t = np.linspace(-tau, tau, n + 1)
        s = 1.0 / (1.0 + np.exp(-t))
        betas = beta_max * ((s - s[0]) / (s[-1] - s[0]))
    else:
        betas = beta_max * (np.arange(n + 1) / n)
    if not np.all(np.diff(betas) > 0.0):
        raise ConfigError(
            "schedule grid is not strictly increasing (n too large for shape?)")
    return Schedule(betas=betas, report_indices=report_indices(n, report_points),
                    shape=shape, tau=float(tau))
