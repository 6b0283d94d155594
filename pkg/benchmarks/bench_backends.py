"""Timing comparison of the compiled kernel against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_backends.py

Measures the two kernel entry points (batch evaluation and one HMC sweep)
across chain counts, on a small linear model and on a deeper tanh stack,
then a full forward annealing run.  Reports per-call medians and the
speedup of the compiled path.
"""

from __future__ import annotations

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rdeval import ais, backend, hmc as H, model as M, rng as R, schedule as S


def linear_model():
    gen = np.random.default_rng(0)
    dec = M.Decoder(layers=(M.LinearLayer(
        weight=gen.standard_normal((8, 4)) * 0.5, bias=np.zeros(8)),),
        latent_dim=4, output_dim=8)
    return M.ModelSpec(name="linear-4x8", prior=M.GaussianPrior(dim=4),
                       decoder=dec,
                       distortion=M.GaussianNllDistortion(sigma=1.0))


def tanh_model():
    gen = np.random.default_rng(1)
    dec = M.Decoder(layers=(
        M.LinearLayer(weight=gen.standard_normal((16, 2)) * 0.6,
                      bias=np.zeros(16)),
        M.Activation(kind="tanh"),
        M.LinearLayer(weight=gen.standard_normal((8, 16)) * 0.6,
                      bias=np.zeros(8)),
    ), latent_dim=2, output_dim=8)
    return M.ModelSpec(name="tanh-2x16x8", prior=M.GaussianPrior(dim=2),
                       decoder=dec,
                       distortion=M.MseDistortion())


def median_time(fn, reps=200):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_kernels(model, x, n_chains):
    gen = np.random.default_rng(17)
    Z = gen.standard_normal((n_chains, model.latent_dim))
    mom = gen.standard_normal((n_chains, model.latent_dim))
    u = gen.uniform(size=n_chains)
    rows = []
    for force in ("python", "compiled"):
        kern = backend.make_kernel(model, x, force=force)
        t_eval = median_time(lambda: kern.eval(Z))
        Zw = Z.copy()
        lp, d = kern.eval(Zw)

        def one_sweep():
            kern.sweep(1.0, Zw, lp, d, mom, u, 0.05, 10)

        t_sweep = median_time(one_sweep)
        rows.append((force, t_eval, t_sweep))
    return rows


def bench_forward(model, x):
    sched = S.make_schedule(500, 10.0, "sigmoid", report_points=4)
    params = H.HmcParams(step_size=0.2, n_leapfrog=8)
    out = []
    for force in ("python", "compiled"):
        os.environ["RDEVAL_BACKEND"] = force
        try:
            t0 = time.perf_counter()
            ais.forward_ais(model, x, sched, 32, params,
                            R.chain_streams(3, 0, 32, R.PURPOSE_FORWARD))
            out.append((force, time.perf_counter() - t0))
        finally:
            del os.environ["RDEVAL_BACKEND"]
    return out


def main():
    if not backend.compiled_available():
        print("compiled extension is not built; nothing to compare")
        return
    for model, x in ((linear_model(), np.linspace(-1, 1, 8)),
                     (tanh_model(), np.linspace(-1, 1, 8))):
        print(f"\n== {model.name} ==")
        for n_chains in (8, 64, 256):
            rows = bench_kernels(model, x, n_chains)
            (f0, e0, s0), (f1, e1, s1) = rows
            print(f" chains={n_chains:4d}  eval: {e0 * 1e6:8.1f}us "
                  f"vs {e1 * 1e6:8.1f}us ({e0 / e1:5.1f}x)   "
                  f"sweep: {s0 * 1e6:8.1f}us vs {s1 * 1e6:8.1f}us "
                  f"({s0 / s1:5.1f}x)")
        fw = bench_forward(model, x)
        (f0, t0), (f1, t1) = fw
        print(f" forward run (500 steps, 32 chains): "
              f"{t0:6.2f}s vs {t1:6.2f}s ({t0 / t1:5.1f}x)")


if __name__ == "__main__":
    main()
