# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False
"""Compiled sampler hot path.

Single-threaded C loops over chain rows, mirroring the numpy fallback in
`_kernels_py` operation for operation: same leapfrog order (half step,
full steps, closing half step), same acceptance rule, rejected rows left
bitwise untouched.  Randomness comes in as arrays drawn by the caller, so
both backends consume identical draws.

A kernel instance is bound to one (model, data point) pair; the model
arrives flattened by `backend._pack` into layer codes, packed weights, and
distortion constants so no Python objects are touched per step.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fmax, isfinite, log, tanh

cnp.import_array()

cdef enum:
    LKIND_LINEAR = 0
    LKIND_TANH = 1
    LKIND_RELU = 2
    LKIND_SIGMOID = 3

cdef double LOG_2PI = 1.8378770664093453


cdef class CompiledKernel:
    cdef int n_layers, pkind, n_comp, dim, out_dim, max_width
    cdef double d_const, d_qscale
    cdef int[::1] lkind
    cdef int[::1] widths
    cdef long long[::1] woff
    cdef long long[::1] boff
    cdef double[::1] wbuf
    cdef double[::1] logw
    cdef double[:, ::1] means
    cdef double[::1] scales
    cdef double[::1] x
    # per-row scratch, reused across rows and calls
    cdef double[:, ::1] acts
    cdef double[::1] gcur
    cdef double[::1] gnxt
    cdef double[::1] comp_lp

    name = "compiled"

    def __init__(self, lkind, widths, woff, boff, wbuf, pkind, logw, means,
                 scales, d_const, d_qscale, x):
        self.lkind = np.ascontiguousarray(lkind, dtype=np.int32)
        self.widths = np.ascontiguousarray(widths, dtype=np.int32)
        self.woff = np.ascontiguousarray(woff, dtype=np.int64)
        self.boff = np.ascontiguousarray(boff, dtype=np.int64)
        self.wbuf = np.ascontiguousarray(wbuf, dtype=np.float64)
        self.pkind = pkind
        self.logw = np.ascontiguousarray(logw, dtype=np.float64)
        self.means = np.ascontiguousarray(means, dtype=np.float64)
        self.scales = np.ascontiguousarray(scales, dtype=np.float64)
        self.d_const = d_const
        self.d_qscale = d_qscale
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.n_layers = self.lkind.shape[0]
        self.n_comp = self.logw.shape[0]
        self.dim = self.widths[0]
        self.out_dim = self.widths[self.n_layers]
        if self.out_dim != self.x.shape[0]:
            raise ValueError("data point width does not match decoder output")
        cdef int w = 0
        cdef int i
        for i in range(self.n_layers + 1):
            if self.widths[i] > w:
                w = self.widths[i]
        self.max_width = w
        self.acts = np.zeros((self.n_layers + 1, w))
        self.gcur = np.zeros(w)
        self.gnxt = np.zeros(w)
        self.comp_lp = np.zeros(max(self.n_comp, 1))

    # -- single-row primitives (scratch-backed, not reentrant) -------------

    cdef double _forward(self, const double* z) noexcept nogil:
        """Run z through the stack into self.acts; returns the distortion."""
        cdef int l, j, i, win, wout
        cdef long long wo, bo
        cdef double s, r, ss
        for i in range(self.dim):
            self.acts[0, i] = z[i]
        for l in range(self.n_layers):
            win = self.widths[l]
            wout = self.widths[l + 1]
            if self.lkind[l] == LKIND_LINEAR:
                wo = self.woff[l]
                bo = self.boff[l]
                for j in range(wout):
                    s = 0.0
                    for i in range(win):
                        s += self.wbuf[wo + j * win + i] * self.acts[l, i]
                    self.acts[l + 1, j] = s + self.wbuf[bo + j]
            elif self.lkind[l] == LKIND_TANH:
                for j in range(wout):
                    self.acts[l + 1, j] = tanh(self.acts[l, j])
            elif self.lkind[l] == LKIND_RELU:
                for j in range(wout):
                    s = self.acts[l, j]
                    self.acts[l + 1, j] = s if s > 0.0 else 0.0
            else:
                for j in range(wout):
                    self.acts[l + 1, j] = 1.0 / (1.0 + exp(-self.acts[l, j]))
        ss = 0.0
        for j in range(self.out_dim):
            r = self.acts[self.n_layers, j] - self.x[j]
            ss += r * r
        return self.d_const + self.d_qscale * ss

    cdef void _backward(self, double* gz) noexcept nogil:
        """Distortion gradient wrt z for the row currently in self.acts."""
        cdef int l, j, i, win, wout
        cdef long long wo
        cdef double a, s
        for j in range(self.out_dim):
            self.gcur[j] = 2.0 * self.d_qscale * (
                self.acts[self.n_layers, j] - self.x[j])
        for l in range(self.n_layers - 1, -1, -1):
            win = self.widths[l]
            wout = self.widths[l + 1]
            if self.lkind[l] == LKIND_LINEAR:
                wo = self.woff[l]
                for i in range(win):
                    s = 0.0
                    for j in range(wout):
                        s += self.wbuf[wo + j * win + i] * self.gcur[j]
                    self.gnxt[i] = s
                for i in range(win):
                    self.gcur[i] = self.gnxt[i]
            elif self.lkind[l] == LKIND_TANH:
                for j in range(wout):
                    a = self.acts[l + 1, j]
                    self.gcur[j] = self.gcur[j] * (1.0 - a * a)
            elif self.lkind[l] == LKIND_RELU:
                for j in range(wout):
                    if not (self.acts[l + 1, j] > 0.0):
                        self.gcur[j] = 0.0
            else:
                for j in range(wout):
                    a = self.acts[l + 1, j]
                    self.gcur[j] = self.gcur[j] * a * (1.0 - a)
        for i in range(self.dim):
            gz[i] = self.gcur[i]

    cdef double _prior_lp(self, const double* z) noexcept nogil:
        cdef int c, i
        cdef double ss, top, acc, diff
        if self.pkind == 0:
            ss = 0.0
            for i in range(self.dim):
                ss += z[i] * z[i]
            return -0.5 * self.dim * LOG_2PI - 0.5 * ss
        top = -1e300
        for c in range(self.n_comp):
            ss = 0.0
            for i in range(self.dim):
                diff = z[i] - self.means[c, i]
                ss += diff * diff
            self.comp_lp[c] = (self.logw[c] - self.dim * log(self.scales[c])
                               - 0.5 * self.dim * LOG_2PI
                               - ss / (2.0 * self.scales[c] * self.scales[c]))
            if self.comp_lp[c] > top:
                top = self.comp_lp[c]
        acc = 0.0
        for c in range(self.n_comp):
            acc += exp(self.comp_lp[c] - top)
        return top + log(acc)

    cdef void _prior_grad(self, const double* z, double* g) noexcept nogil:
        cdef int c, i
        cdef double ss, top, tot, w, diff
        if self.pkind == 0:
            for i in range(self.dim):
                g[i] = -z[i]
            return
        top = -1e300
        for c in range(self.n_comp):
            ss = 0.0
            for i in range(self.dim):
                diff = z[i] - self.means[c, i]
                ss += diff * diff
            self.comp_lp[c] = (self.logw[c] - self.dim * log(self.scales[c])
                               - 0.5 * self.dim * LOG_2PI
                               - ss / (2.0 * self.scales[c] * self.scales[c]))
            if self.comp_lp[c] > top:
                top = self.comp_lp[c]
        tot = 0.0
        for c in range(self.n_comp):
            tot += exp(self.comp_lp[c] - top)
        for i in range(self.dim):
            g[i] = 0.0
        for c in range(self.n_comp):
            w = exp(self.comp_lp[c] - top) / tot
            for i in range(self.dim):
                g[i] += (w * (self.means[c, i] - z[i])
                         / (self.scales[c] * self.scales[c]))

    cdef void _grad_u(self, const double* z, double beta,
                      double* g) noexcept nogil:
        """g = -grad log prior + beta * grad distortion (self.acts holds
        the forward pass for z on return)."""
        cdef int i
        self._forward(z)
        self._backward(g)
        self._prior_grad(z, &self.gnxt[0])
        for i in range(self.dim):
            g[i] = -self.gnxt[i] + beta * g[i]

    # -- public surface -----------------------------------------------------

    def eval(self, Z):
        """(log_prior, distortion) per row of a (n, dim) batch."""
        cdef double[:, ::1] zv = np.ascontiguousarray(Z, dtype=np.float64)
        cdef Py_ssize_t n = zv.shape[0]
        lp_arr = np.empty(n)
        d_arr = np.empty(n)
        cdef double[::1] lp = lp_arr
        cdef double[::1] d = d_arr
        cdef Py_ssize_t r
        if zv.shape[1] != self.dim:
            raise ValueError("batch width does not match latent dim")
        for r in range(n):
            d[r] = self._forward(&zv[r, 0])
            lp[r] = self._prior_lp(&zv[r, 0])
        return lp_arr, d_arr

    def sweep(self, double beta, Z, lp, d, mom, u, double eps, int n_leap):
        """One Metropolis-adjusted leapfrog transition per chain row.

        Z, lp, d are updated in place for accepted rows only; returns the
        acceptance probabilities and the boolean acceptance mask.
        """
        cdef double[:, ::1] zv = Z
        cdef double[::1] lpv = lp
        cdef double[::1] dv = d
        cdef double[:, ::1] mv = np.ascontiguousarray(mom, dtype=np.float64)
        cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef Py_ssize_t n = zv.shape[0]
        cdef int dim = self.dim
        aprob_arr = np.empty(n)
        acc_arr = np.zeros(n, dtype=np.bool_)
        cdef double[::1] aprob = aprob_arr
        cdef cnp.uint8_t[::1] accv = acc_arr.view(np.uint8)
        zw_arr = np.empty(dim)
        p_arr = np.empty(dim)
        g_arr = np.empty(dim)
        cdef double[::1] zw = zw_arr
        cdef double[::1] p = p_arr
        cdef double[::1] g = g_arr
        cdef Py_ssize_t r
        cdef int i, step
        cdef double u0, k0, u1, k1, dh, lp1, d1, a
        if zv.shape[1] != dim or mv.shape[1] != dim:
            raise ValueError("batch width does not match latent dim")
        if n_leap < 1:
            raise ValueError("need at least one leapfrog step")
        with nogil:
            for r in range(n):
                u0 = -lpv[r] + beta * dv[r]
                k0 = 0.0
                for i in range(dim):
                    k0 += mv[r, i] * mv[r, i]
                k0 = 0.5 * k0
                for i in range(dim):
                    zw[i] = zv[r, i]
                    p[i] = mv[r, i]
                self._grad_u(&zw[0], beta, &g[0])
                for i in range(dim):
                    p[i] -= 0.5 * eps * g[i]
                d1 = 0.0
                lp1 = 0.0
                for step in range(n_leap):
                    for i in range(dim):
                        zw[i] += eps * p[i]
                    d1 = self._forward(&zw[0])
                    self._backward(&g[0])
                    self._prior_grad(&zw[0], &self.gnxt[0])
                    lp1 = self._prior_lp(&zw[0])
                    for i in range(dim):
                        g[i] = -self.gnxt[i] + beta * g[i]
                    if step < n_leap - 1:
                        for i in range(dim):
                            p[i] -= eps * g[i]
                    else:
                        for i in range(dim):
                            p[i] -= 0.5 * eps * g[i]
                u1 = -lp1 + beta * d1
                k1 = 0.0
                for i in range(dim):
                    k1 += p[i] * p[i]
                k1 = 0.5 * k1
                dh = (u1 + k1) - (u0 + k0)
                if isfinite(dh):
                    a = exp(-fmax(dh, 0.0))
                else:
                    a = 0.0
                aprob[r] = a
                if uv[r] < a:
                    accv[r] = 1
                    for i in range(dim):
                        zv[r, i] = zw[i]
                    lpv[r] = lp1
                    dv[r] = d1
        return aprob_arr, acc_arr
