"""Diagnostic functionals of token ensembles: exact empirical
2-Wasserstein distance, the Lyapunov ratio R_p with its gradient and
ensemble mean V_p, subspace alignment, the pairwise interaction energy,
and the residual of the sharp-consensus (Laplace) limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .dynamics import Ensemble, consensus_at
from .errors import InPerpError, InSubspaceError, SizeMismatchError
from .spectral import EPS_PERP, Subspace, subspace_project, spherical_projection

#: Fixed CSV column order of a MetricRecord row.
CSV_COLUMNS = ("time", "align_E", "align_F", "align_Fabs", "w2_to_target", "v_p", "energy")


@dataclass(frozen=True)
class MetricRecord:
    """One time-indexed row of diagnostics; absent metrics are None and
    serialize to empty CSV cells."""

    time: float
    align_E: float | None = None
    align_F: float | None = None
    align_Fabs: float | None = None
    w2_to_target: float | None = None
    v_p: float | None = None
    energy: float | None = None

    def to_csv_row(self) -> str:
        cells = []
        for name in CSV_COLUMNS:
            value = getattr(self, name)
            cells.append("" if value is None else repr(float(value)))
        return ",".join(cells)


def cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean (chordal) distances between two token sets.

    Computed from explicit differences (scipy cdist), so coinciding points
    cost exactly zero; the Gram-identity shortcut would leave ~1e-16
    cancellation noise that the final sqrt amplifies.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return cdist(a, b, "sqeuclidean")


def wasserstein2(a: np.ndarray | Ensemble, b: np.ndarray | Ensemble) -> float:
    """Exact 2-Wasserstein distance between equal-size empirical measures.

    Solves the assignment problem on squared chordal distances exactly
    (shortest-augmenting-path solver), no entropic regularization.
    """
    ta = a.tokens if isinstance(a, Ensemble) else np.atleast_2d(a)
    tb = b.tokens if isinstance(b, Ensemble) else np.atleast_2d(b)
    if ta.shape[0] != tb.shape[0]:
        raise SizeMismatchError(f"ensemble sizes differ: {ta.shape[0]} vs {tb.shape[0]}")
    cost = cost_matrix(ta, tb)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum()) / ta.shape[0]
    return math.sqrt(max(total, 0.0))


def perp_ratio(s: Subspace, x: np.ndarray, p: float, eps_perp: float = EPS_PERP) -> float:
    """Lyapunov ratio R_p(x) = ||(I-P)x||^(2p) / ||Px||^(2p)."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    x = np.asarray(x, dtype=np.float64)
    u = subspace_project(s, x)
    u_sq = float(np.dot(u, u))
    if math.sqrt(u_sq) <= eps_perp:
        raise InPerpError(f"point is within {eps_perp:.0e} of the orthogonal complement")
    v = x - u
    v_sq = float(np.dot(v, v))
    return (v_sq / u_sq) ** p


def perp_ratio_gradient(
    s: Subspace, x: np.ndarray, p: float, eps_perp: float = EPS_PERP
) -> np.ndarray:
    """Ambient gradient of R_p at x.

    grad R_1(x) = 2 R_1(x) (v/||v||^2 - u/||u||^2) with u = Px and
    v = (I-P)x; grad R_p = p R_1^(p-1) grad R_1 by the chain rule. For
    p < 1 the formula degenerates on the subspace (v = 0), which raises
    InSubspaceError.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    x = np.asarray(x, dtype=np.float64)
    u = subspace_project(s, x)
    v = x - u
    u_sq = float(np.dot(u, u))
    v_sq = float(np.dot(v, v))
    if math.sqrt(u_sq) <= eps_perp:
        raise InPerpError(f"point is within {eps_perp:.0e} of the orthogonal complement")
    if math.sqrt(v_sq) <= eps_perp:
        if p < 1.0:
            raise InSubspaceError("gradient of R_p degenerates on the subspace for p < 1")
        return np.zeros_like(x)
    r1 = v_sq / u_sq
    grad_r1 = 2.0 * r1 * (v / v_sq - u / u_sq)
    return p * r1 ** (p - 1.0) * grad_r1


def mean_perp_ratio(
    ensemble: Ensemble, s: Subspace, p: float, eps_perp: float = EPS_PERP
) -> float:
    """Ensemble mean V_p = (1/n) sum_i R_p(x_i).

    A token numerically orthogonal to the subspace makes the functional
    undefined; this returns the +inf sentinel rather than aborting so
    sweeps survive adversarial seeds.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    tokens = ensemble.tokens
    proj = tokens @ s.projector().T
    u_sq = np.sum(proj * proj, axis=1)
    if np.any(np.sqrt(u_sq) <= eps_perp):
        return math.inf
    res = tokens - proj
    v_sq = np.sum(res * res, axis=1)
    return float(np.mean((v_sq / u_sq) ** p))


def alignment(ensemble: Ensemble, s: Subspace) -> float:
    """Mean squared projection norm (1/n) sum_i ||P x_i||^2, in [0, 1].

    Equals 1 iff every token lies in the subspace and 0 iff every token is
    orthogonal to it. This realizes the figures' alignment axis; the mean
    could equally use ||P x|| unsquared, so downstream thresholds are
    chosen to be robust to either convention.
    """
    proj = ensemble.tokens @ s.basis
    return float(np.mean(np.sum(proj * proj, axis=1)))


ENERGY_EXP_MAX = 700.0  # exp overflow threshold for float64


def interaction_energy(ensemble: Ensemble, b: np.ndarray) -> float:
    """Pairwise energy (1/n^2) sum_ij exp(<x_i, B x_j>)."""
    tokens = ensemble.tokens
    exponents = tokens @ (np.asarray(b, dtype=np.float64) @ tokens.T)
    peak = float(np.max(exponents))
    if peak > ENERGY_EXP_MAX:
        raise OverflowError(
            f"interaction exponent {peak:.1f} would overflow; rescale B (sigma_max too large)"
        )
    return float(np.mean(np.exp(exponents)))


def hardmax_target(b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sharp limit of the consensus point: B^T x / ||B^T x||."""
    g = np.asarray(b, dtype=np.float64).T @ np.asarray(x, dtype=np.float64)
    return g / np.linalg.norm(g)


def laplace_residual(ensemble: Ensemble, b: np.ndarray, beta: float, x: np.ndarray) -> float:
    """Distance between the softmax consensus over the ensemble probed at
    x and its sharp limit B^T x / ||B^T x||."""
    m = consensus_at(ensemble, b, beta, x)
    return float(np.linalg.norm(m - hardmax_target(b, x)))
