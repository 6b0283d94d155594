"""Regenerate the committed model fixtures under tests/fixtures.

Every fixture is produced from a fixed recipe with hard-coded seeds, so
rerunning this script is byte-stable.  The generated files are committed;
this script only exists so the provenance of each fixture is executable.

Fixtures:

* ``linear_vae_4x8.json`` + ``linear_vae_4x8_data.csv``: a 4-latent,
  8-output linear-Gaussian decoder with a spread-out singular spectrum and
  a small dataset drawn near the decoder manifold.  The output loading
  uses Hadamard columns so every output coordinate carries equal weight,
  which keeps the per-coordinate distortion contributions balanced.
* ``tanh_smooth.json``: a 1-D latent, two-layer tanh MLP with positive
  weights (monotone, so the annealed posterior stays unimodal) and a wide
  observation noise.
* ``tanh_fold.json``: a 1-D latent, two-layer tanh MLP whose first layer
  folds the latent axis, giving an asymmetric bimodal posterior for data
  away from the fold.  Used to exercise sampler stress diagnostics.
"""

from pathlib import Path

import numpy as np

import sys

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from rdeval import model as M  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def hadamard8() -> np.ndarray:
    """8x8 Sylvester Hadamard matrix with +-1 entries."""
    h = np.array([[1.0]])
    for _ in range(3):
        h = np.block([[h, h], [h, -h]])
    return h


def linear_4x8():
    gen = np.random.default_rng(20260823)
    u = hadamard8()[:, :4] / np.sqrt(8.0)
    v, _ = np.linalg.qr(gen.standard_normal((4, 4)))
    svals = np.array([1.8, 0.24, 0.16, 0.1])
    w = u @ np.diag(svals) @ v
    b = gen.standard_normal(8) * 0.2

    dec = M.Decoder(layers=(M.LinearLayer(weight=w, bias=b),),
                    latent_dim=4, output_dim=8)
    model = M.ModelSpec(name="linear-vae-4x8",
                        prior=M.GaussianPrior(dim=4),
                        decoder=dec,
                        distortion=M.GaussianNllDistortion(sigma=2.0))

    zs = gen.standard_normal((8, 4)) * 0.35
    data = zs @ w.T + b + 0.1 * 2.0 * gen.standard_normal((8, 8))
    return model, data


def tanh_smooth():
    dec = M.Decoder(layers=(
        M.LinearLayer(weight=np.array([[1.2], [0.7], [0.4]]),
                      bias=np.array([0.1, -0.2, 0.3])),
        M.Activation(kind="tanh"),
        M.LinearLayer(weight=1.5 * np.array([[1.0, 0.6, 0.3],
                                             [0.4, 0.9, 0.5]]),
                      bias=np.array([0.05, -0.1])),
    ), latent_dim=1, output_dim=2)
    return M.ModelSpec(name="tanh-smooth",
                       prior=M.GaussianPrior(dim=1),
                       decoder=dec,
                       distortion=M.GaussianNllDistortion(sigma=2.5))


def tanh_fold():
    dec = M.Decoder(layers=(
        M.LinearLayer(weight=np.array([[2.0], [2.0]]),
                      bias=np.array([-2.0, 2.0])),
        M.Activation(kind="tanh"),
        M.LinearLayer(weight=np.array([[3.0, -3.0], [1.2, 1.2]]),
                      bias=np.array([0.0, 0.0])),
    ), latent_dim=1, output_dim=2)
    return M.ModelSpec(name="tanh-fold",
                       prior=M.GaussianPrior(dim=1),
                       decoder=dec,
                       distortion=M.GaussianNllDistortion(sigma=0.5))


def write_dataset(path: Path, data: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# columns: " + ",".join(f"x{j}" for j in range(data.shape[1]))
                 + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def main() -> None:
    model, data = linear_4x8()
    M.save_model(model, FIXTURES / "linear_vae_4x8.json")
    write_dataset(FIXTURES / "linear_vae_4x8_data.csv", data)
    M.save_model(tanh_smooth(), FIXTURES / "tanh_smooth.json")
    M.save_model(tanh_fold(), FIXTURES / "tanh_fold.json")
    for name in ("linear_vae_4x8.json", "linear_vae_4x8_data.csv",
                 "tanh_smooth.json", "tanh_fold.json"):
        print("wrote", FIXTURES / name)


if __name__ == "__main__":
    main()
