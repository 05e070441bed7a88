"""Spectral structure of the weight matrices: the dominant eigenspace of
V B^T with its gap, the dominant eigenspaces of V (by value and by
magnitude), orthogonal subspace projections, and the induced map that sends
a sphere point to the normalized projection onto a subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InPerpError, SingularError
from .linalg import (
    SYMMETRY_RTOL,
    symmetric_eigendecomposition,
    symmetry_defect,
    singular_extremes,
)

EPS_PERP = 1e-10
CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class Subspace:
    """A linear subspace given by an orthonormal basis, shape (d, k)."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[1] < 1:
            raise ValueError("basis must be a (d, k) matrix with k >= 1")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-10:
            raise ValueError("basis columns must be orthonormal")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """The orthogonal projection matrix onto the subspace."""
        return self.basis @ self.basis.T


def subspace_project(s: Subspace, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of x onto the subspace: basis (basis^T x)."""
    x = np.asarray(x, dtype=np.float64)
    return s.basis @ (s.basis.T @ x)


def spherical_projection(s: Subspace, x: np.ndarray, eps_perp: float = EPS_PERP) -> np.ndarray:
    """Project x onto the subspace and renormalize to the unit sphere.

    Undefined (InPerpError) when x is numerically orthogonal to the
    subspace.
    """
    proj = subspace_project(s, x)
    norm = float(np.linalg.norm(proj))
    if norm <= eps_perp:
        raise InPerpError(f"point is within {eps_perp:.0e} of the orthogonal complement")
    return proj / norm


def spherical_projection_jacobian(
    s: Subspace, x: np.ndarray, eps_perp: float = EPS_PERP
) -> np.ndarray:
    """Ambient Jacobian of the normalized subspace projection at x:

        (1/||Px||) (P - Px (Px)^T / ||Px||^2)

    where P is the orthogonal projector onto the subspace.
    """
    p = s.projector()
    px = p @ np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(px))
    if norm <= eps_perp:
        raise InPerpError(f"point is within {eps_perp:.0e} of the orthogonal complement")
    return (p - np.outer(px, px) / (norm * norm)) / norm


def project_ensemble(tokens: np.ndarray, s: Subspace, eps_perp: float = EPS_PERP) -> np.ndarray:
    """Token-wise normalized subspace projection, preserving order and count.

    Raises InPerpError (with the offending token index) if any token is
    numerically orthogonal to the subspace.
    """
    tokens = np.atleast_2d(np.asarray(tokens, dtype=np.float64))
    proj = tokens @ s.projector().T
    norms = np.linalg.norm(proj, axis=1)
    bad = np.nonzero(norms <= eps_perp)[0]
    if bad.size:
        idx = int(bad[0])
        raise InPerpError(
            f"token {idx} is within {eps_perp:.0e} of the orthogonal complement",
            token_index=idx,
        )
    return proj / norms[:, None]


@dataclass(frozen=True)
class SpectralModel:
    """Weight matrices with their derived spectral objects.

    ``dominant`` is the eigenspace of V B^T for its largest eigenvalue and
    ``gap`` the distance to the next eigenvalue (``inf`` when the dominant
    cluster is the whole space). Both are None when V B^T is not symmetric.
    ``value_dominant`` / ``value_dominant_abs`` are the eigenspaces of V
    for the largest eigenvalue / largest-magnitude eigenvalue, populated
    when V is symmetric (which covers diagonal V).
    ``dominant_general`` is a best-effort dominant eigendirection of a
    non-symmetric V B^T with numerically real spectrum, for diagnostics
    only (the symmetric-case guarantees do not apply to it).
    """

    B: np.ndarray
    V: np.ndarray
    VBt: np.ndarray
    sigma_min_b: float
    sigma_max_b: float
    vbt_symmetric: bool
    dominant: Subspace | None
    lead_eigenvalue: float | None
    next_eigenvalue: float | None
    gap: float | None
    value_dominant: Subspace | None
    value_dominant_abs: Subspace | None
    eigenvalues_vbt: np.ndarray | None
    eigenvalues_v: np.ndarray | None
    dominant_general: Subspace | None = None

    @property
    def d(self) -> int:
        return self.B.shape[0]


def _eigen_cluster(values: np.ndarray, vectors: np.ndarray, cluster_tol: float):
    """Split the top eigenvalue cluster off sorted-descending eigenpairs."""
    mu1 = float(values[0])
    tol = cluster_tol * max(1.0, abs(mu1))
    in_cluster = values >= mu1 - tol
    k = int(np.sum(in_cluster))
    basis = vectors[:, :k]
    if k == values.shape[0]:
        return Subspace(basis), mu1, None, math.inf
    mu2 = float(values[k])
    return Subspace(basis), mu1, mu2, mu1 - mu2


def _abs_cluster(values: np.ndarray, vectors: np.ndarray, cluster_tol: float) -> Subspace:
    """Eigenspace for the eigenvalue(s) of largest magnitude."""
    mags = np.abs(values)
    top = float(np.max(mags))
    tol = cluster_tol * max(1.0, top)
    sel = mags >= top - tol
    return Subspace(vectors[:, sel])


def _general_dominant_direction(m: np.ndarray) -> Subspace | None:
    """Dominant eigendirection of a non-symmetric matrix, if its spectrum
    is numerically real; None otherwise (complex spectra are out of scope)."""
    values, vectors = np.linalg.eig(m)
    scale = max(1.0, float(np.max(np.abs(values))))
    if float(np.max(np.abs(values.imag))) > 1e-9 * scale:
        return None
    idx = int(np.argmax(values.real))
    v = np.real(vectors[:, idx])
    norm = float(np.linalg.norm(v))
    if norm <= EPS_PERP:
        return None
    return Subspace((v / norm)[:, None])


def build_model(
    B: np.ndarray, V: np.ndarray, cluster_tol: float = CLUSTER_TOL
) -> SpectralModel:
    """Assemble the spectral model for weight matrices (B, V).

    B must be invertible (sigma_min > 1e-12). When V B^T is symmetric the
    dominant eigenspace and gap are populated; otherwise the model is still
    built with those fields absent so non-symmetric experiments can run.
    """
    B = np.array(B, dtype=np.float64)
    V = np.array(V, dtype=np.float64)
    if B.shape != V.shape or B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B and V must be square matrices of the same dimension")
    sigma_min_b, sigma_max_b = singular_extremes(B)
    if sigma_min_b <= 1e-12:
        raise SingularError(f"B is numerically singular (sigma_min={sigma_min_b:.3e})")
    vbt = V @ B.T

    vbt_symmetric = symmetry_defect(vbt) <= SYMMETRY_RTOL
    dominant = lead = nxt = gap = None
    eigenvalues_vbt = None
    dominant_general = None
    if vbt_symmetric:
        eig = symmetric_eigendecomposition(vbt)
        eigenvalues_vbt = eig.values
        dominant, lead, nxt, gap = _eigen_cluster(eig.values, eig.vectors, cluster_tol)
    else:
        dominant_general = _general_dominant_direction(vbt)

    # Diagonal V is symmetric, so the symmetric branch also covers every
    # diagonal value matrix; truly non-symmetric V gets no value eigenspaces.
    value_dominant = value_dominant_abs = None
    eigenvalues_v = None
    if symmetry_defect(V) <= SYMMETRY_RTOL:
        eig_v = symmetric_eigendecomposition(V)
        eigenvalues_v = eig_v.values
        value_dominant, _, _, _ = _eigen_cluster(eig_v.values, eig_v.vectors, cluster_tol)
        value_dominant_abs = _abs_cluster(eig_v.values, eig_v.vectors, cluster_tol)

    for m in (B, V, vbt):
        m.setflags(write=False)
    return SpectralModel(
        B=B,
        V=V,
        VBt=vbt,
        sigma_min_b=sigma_min_b,
        sigma_max_b=sigma_max_b,
        vbt_symmetric=vbt_symmetric,
        dominant=dominant,
        lead_eigenvalue=lead,
        next_eigenvalue=nxt,
        gap=gap,
        value_dominant=value_dominant,
        value_dominant_abs=value_dominant_abs,
        eigenvalues_vbt=eigenvalues_vbt,
        eigenvalues_v=eigenvalues_v,
        dominant_general=dominant_general,
    )
