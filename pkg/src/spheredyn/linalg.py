"""Dense small-matrix linear algebra: symmetric eigendecomposition,
singular extremes, and inversion.

Everything here targets the small dimensions (d <= ~64) used by the
experiments, where a cyclic Jacobi sweep is both simple and accurate to
machine precision. Results are deterministic: identical input bytes produce
identical output bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergentError, NonSymmetricError, SingularError

SYMMETRY_RTOL = 1e-10
JACOBI_OFF_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending.

    ``vectors[:, i]`` is the unit eigenvector for ``values[i]``; the column
    set is orthonormal.
    """

    values: np.ndarray
    vectors: np.ndarray


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def symmetry_defect(m: np.ndarray) -> float:
    """Relative asymmetry ||M - M^T|| / max(1, ||M||) in Frobenius norm."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.linalg.norm(m - m.T) / max(1.0, np.linalg.norm(m)))


def symmetric_eigendecomposition(m: np.ndarray) -> EigenDecomposition:
    """Eigendecompose a symmetric matrix with cyclic Jacobi rotations.

    Raises NonSymmetricError if the relative asymmetry exceeds 1e-10 and
    NonConvergentError if the off-diagonal mass has not dropped below
    1e-12 * ||M|| after 100 sweeps.
    """
    m = _check_square(m)
    if symmetry_defect(m) > SYMMETRY_RTOL:
        raise NonSymmetricError(
            f"matrix asymmetry {symmetry_defect(m):.3e} exceeds {SYMMETRY_RTOL:.0e}"
        )
    d = m.shape[0]
    # Work on the exactly-symmetric part so rotations preserve symmetry.
    a = 0.5 * (m + m.T)
    v = np.eye(d)
    scale = np.linalg.norm(a)
    if d == 1 or scale == 0.0:
        return _sorted_eigenpairs(np.diag(a).copy(), v)

    tol = JACOBI_OFF_RTOL * scale
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol:
            return _sorted_eigenpairs(np.diag(a).copy(), v)
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # Classic 2x2 symmetric Schur rotation zeroing a[p, q].
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
    if off <= tol:
        return _sorted_eigenpairs(np.diag(a).copy(), v)
    raise NonConvergentError(
        f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps "
        f"(off-diagonal norm {off:.3e}, tolerance {tol:.3e})"
    )


def _sorted_eigenpairs(values: np.ndarray, vectors: np.ndarray) -> EigenDecomposition:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # Canonical sign: largest-magnitude component of each eigenvector positive.
    for i in range(vectors.shape[1]):
        j = int(np.argmax(np.abs(vectors[:, i])))
        if vectors[j, i] < 0.0:
            vectors[:, i] = -vectors[:, i]
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenDecomposition(values=values, vectors=vectors)


def singular_extremes(m: np.ndarray) -> tuple[float, float]:
    """Smallest and largest singular values of a (square) matrix.

    Computed as square roots of the extreme eigenvalues of M^T M.
    """
    m = _check_square(m)
    gram = m.T @ m
    eig = symmetric_eigendecomposition(gram)
    smallest = float(np.sqrt(max(eig.values[-1], 0.0)))
    largest = float(np.sqrt(max(eig.values[0], 0.0)))
    return smallest, largest


def invert(m: np.ndarray) -> np.ndarray:
    """Inverse of a square matrix with sigma_min > 1e-12."""
    m = _check_square(m)
    sigma_min, _ = singular_extremes(m)
    if sigma_min <= 1e-12:
        raise SingularError(f"matrix is numerically singular (sigma_min={sigma_min:.3e})")
    return np.linalg.inv(m)
