"""Vectorized numpy implementation of the sampler hot path.

This is the fallback for (and the reference against) the compiled kernel in
`_kernels`.  A kernel is bound to one (model, data point) pair and exposes

    eval(Z)                      -> (log_prior, distortion) per row
    sweep(beta, Z, lp, d, ...)   -> one Metropolis-adjusted leapfrog
                                    transition per row, updating Z, lp, d
                                    in place for accepted rows

Randomness (momenta and acceptance uniforms) is supplied by the caller, so
the compiled and numpy paths consume identical draws.
"""

from __future__ import annotations

import numpy as np

from . import model as M


class PyKernel:
    name = "python"

    def __init__(self, model: M.ModelSpec, x: np.ndarray):
        self.model = model
        self.x = np.asarray(x, dtype=np.float64)
        self.dim = model.latent_dim
        if isinstance(model.distortion, M.FeatureMseDistortion):
            self._fx = M.decoder_forward_batch(
                model.distortion.feature_map, self.x[None, :])
        else:
            self._fx = None

    # -- model evaluation ---------------------------------------------------

    def _distortion_and_seed(self, xhat: np.ndarray, want_grad: bool):
        dist = self.model.distortion
        if isinstance(dist, M.MseDistortion):
            r = xhat - self.x
            d = np.sum(r * r, axis=1)
            return d, (2.0 * r if want_grad else None), None
        if isinstance(dist, M.GaussianNllDistortion):
            r = xhat - self.x
            s2 = dist.sigma ** 2
            d = (0.5 * self.x.shape[0] * np.log(2.0 * np.pi * s2)
                 + np.sum(r * r, axis=1) / (2.0 * s2))
            return d, (r / s2 if want_grad else None), None
        fxh, acts = M.decoder_forward_batch(dist.feature_map, xhat,
                                            want_cache=True)
        r = fxh - self._fx
        d = np.sum(r * r, axis=1)
        if not want_grad:
            return d, None, None
        seed = M.decoder_backward_batch(dist.feature_map, acts, 2.0 * r)
        return d, seed, None

    def _eval_all(self, Z: np.ndarray, beta: float, want_grad: bool):
        """Returns (log_prior, distortion, grad_U) for each row; grad_U is
        None unless requested.  U(z) = -log_prior + beta * distortion."""
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            if want_grad:
                xhat, acts = M.decoder_forward_batch(self.model.decoder, Z,
                                                     want_cache=True)
            else:
                xhat = M.decoder_forward_batch(self.model.decoder, Z)
            d, seed, _ = self._distortion_and_seed(xhat, want_grad)
            lp = M.prior_logpdf_batch(self.model.prior, Z)
            if not want_grad:
                return lp, d, None
            gd = M.decoder_backward_batch(self.model.decoder, acts, seed)
            gp = M.prior_grad_batch(self.model.prior, Z)
            return lp, d, -gp + beta * gd

    def eval(self, Z: np.ndarray):
        lp, d, _ = self._eval_all(Z, 0.0, want_grad=False)
        return lp, d

    # -- HMC transition -----------------------------------------------------

    def sweep(self, beta: float, Z: np.ndarray, lp: np.ndarray, d: np.ndarray,
              mom: np.ndarray, u: np.ndarray, eps: float, n_leap: int):
        """One HMC transition for every chain row.

        Identity mass, shared step size, fixed leapfrog count.  A non-finite
        Hamiltonian rejects with acceptance probability zero; rejected rows
        are left bitwise untouched.
        """
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            u0 = -lp + beta * d
            k0 = 0.5 * np.sum(mom * mom, axis=1)
            zw = Z.copy()
            p = mom.copy()
            _, _, g = self._eval_all(zw, beta, want_grad=True)
            p -= 0.5 * eps * g
            for step in range(n_leap):
                zw += eps * p
                lp1, d1, g = self._eval_all(zw, beta, want_grad=True)
                p -= (eps if step < n_leap - 1 else 0.5 * eps) * g
            u1 = -lp1 + beta * d1
            k1 = 0.5 * np.sum(p * p, axis=1)
            dh = (u1 + k1) - (u0 + k0)
            aprob = np.exp(-np.maximum(dh, 0.0))
            aprob = np.where(np.isfinite(dh), aprob, 0.0)
        acc = u < aprob
        Z[acc] = zw[acc]
        lp[acc] = lp1[acc]
        d[acc] = d1[acc]
        return aprob, acc
