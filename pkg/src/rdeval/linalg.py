"""Small dense matrix kernel: product wrapper and a one-sided Jacobi SVD.

Matrices are 2-D float64 numpy arrays throughout.  The SVD is the classic
one-sided Jacobi iteration: plane rotations orthogonalize the columns of a
working copy of A, the rotations are accumulated into V, and column norms
become the singular values.  It is slow compared to LAPACK but simple,
deterministic, and accurate on the small matrices used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

MAX_SWEEPS = 100
CONVERGENCE_SCALE = 1e-14  # threshold = CONVERGENCE_SCALE * ||A||_F^2


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(
            f"incompatible shapes for matrix product: {a.shape} x {b.shape}")
    return a @ b


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD a = u @ diag(s) @ v.T with orthonormal u, v columns."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def _complete_orthonormal(q: np.ndarray, cols: list[int]) -> None:
    """Fill the listed (near-null) columns of q with unit vectors orthogonal
    to every other column, chosen deterministically from the standard basis."""
    n = q.shape[0]
    established = [j for j in range(q.shape[1]) if j not in cols]
    for j in cols:
        for e in range(n):
            cand = np.zeros(n)
            cand[e] = 1.0
            for k in established:
                cand -= (q[:, k] @ cand) * q[:, k]
            norm = np.sqrt(cand @ cand)
            if norm > 0.5:
                q[:, j] = cand / norm
                established.append(j)
                break
        else:  # pragma: no cover - n candidates always suffice
            raise NumericError("failed to complete orthonormal basis")


def _svd_tall(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jacobi SVD core for m >= k; returns (u, s, v) without sign fixing."""
    m, k = a.shape
    work = a.copy()
    v = np.eye(k)
    fro2 = float(np.sum(a * a))
    threshold = CONVERGENCE_SCALE * fro2

    if fro2 > 0.0:
        for _ in range(MAX_SWEEPS):
            off_max = 0.0
            for i in range(k - 1):
                for j in range(i + 1, k):
                    ci = work[:, i]
                    cj = work[:, j]
                    gij = float(ci @ cj)
                    off_max = max(off_max, abs(gij))
                    if abs(gij) <= threshold:
                        continue
                    gii = float(ci @ ci)
                    gjj = float(cj @ cj)
                    # Rotation zeroing the (i, j) Gram entry.
                    tau = (gjj - gii) / (2.0 * gij)
                    if tau == 0.0:
                        t = 1.0
                    else:
                        t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    wi = c * ci - s * cj
                    wj = s * ci + c * cj
                    work[:, i] = wi
                    work[:, j] = wj
                    vi = c * v[:, i] - s * v[:, j]
                    vj = s * v[:, i] + c * v[:, j]
                    v[:, i] = vi
                    v[:, j] = vj
            if off_max <= threshold:
                break
        else:
            gram = work.T @ work
            np.fill_diagonal(gram, 0.0)
            residual = float(np.max(np.abs(gram)))
            raise NumericError(
                f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps "
                f"(off-diagonal residual {residual:.3e})",
                residual=residual,
            )

    sing = np.sqrt(np.sum(work * work, axis=0))
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    work = work[:, order]
    v = v[:, order]

    u = np.zeros((m, k))
    null_cols = []
    if k:
        tiny = max(float(sing[0]), 1.0) * 1e-13
        for j in range(k):
            if sing[j] > tiny:
                u[:, j] = work[:, j] / sing[j]
            else:
                sing[j] = 0.0
                null_cols.append(j)
    if null_cols:
        _complete_orthonormal(u, null_cols)
    return u, sing, v


def svd(a) -> SvdResult:
    """One-sided Jacobi SVD of an m-by-k matrix.

    Sweeps run in fixed row-cyclic order until every off-diagonal Gram entry
    |a_i . a_j| falls below CONVERGENCE_SCALE * ||A||_F^2, or MAX_SWEEPS is
    hit (then a NumericError carrying the residual is raised).  Singular
    values come back in descending order; each u column is flipped so that
    its largest-magnitude entry is non-negative (v flips along with it).
    """
    a = as_matrix(a, "svd input")
    m, k = a.shape
    if m >= k:
        u, sing, v = _svd_tall(a)
    else:
        v, sing, u = _svd_tall(np.ascontiguousarray(a.T))

    for j in range(sing.shape[0]):
        lead = int(np.argmax(np.abs(u[:, j])))
        if u[lead, j] < 0.0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SvdResult(u=u, singular_values=sing, v=v)
