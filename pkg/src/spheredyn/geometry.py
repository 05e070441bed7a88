"""Geometry of the unit sphere S^{d-1}: tangent projection, retraction,
spherical caps, and seeded sampling (uniform and von Mises-Fisher mixtures).

Randomness comes from a counter-based Philox generator so that a fixed seed
reproduces the same sample stream bitwise across runs and platforms.
Parallel work splits into independent streams via ``RngStream.split``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearZeroError

RETRACT_EPS = 1e-12


class RngStream:
    """Seeded counter-based random stream (NumPy Philox).

    The same ``(seed, key)`` always yields the same stream. ``split(i)``
    derives an independent child stream, used to give parallel runs their
    own reproducible randomness.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def split(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key})"


def tangent_project(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Project y onto the tangent space of the sphere at unit vector x:
    y - <x, y> x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return y - np.dot(x, y) * x


def retract(v: np.ndarray) -> np.ndarray:
    """Normalize v back onto the sphere; NearZeroError for degenerate input."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= RETRACT_EPS:
        raise NearZeroError(f"cannot retract vector with norm {norm:.3e}")
    return v / norm


def sample_uniform(d: int, rng: RngStream, n: int = 1) -> np.ndarray:
    """n points drawn uniformly on S^{d-1}, shape (n, d).

    Gaussian draws normalized row-wise; rotation invariance is inherited
    from the isotropy of the normal distribution.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    g = rng.generator.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # A zero row has probability 0; resample defensively if it ever occurs.
    while np.any(norms <= RETRACT_EPS):
        bad = norms[:, 0] <= RETRACT_EPS
        g[bad] = rng.generator.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms


@dataclass(frozen=True)
class VmfMixture:
    """Mixture of von Mises-Fisher components on S^{d-1}.

    Mean directions are normalized on construction (the density only
    depends on the direction and the concentration), weights must be
    nonnegative and sum to 1.
    """

    means: np.ndarray
    kappas: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        kappas = np.atleast_1d(np.asarray(self.kappas, dtype=np.float64))
        if means.shape[0] != kappas.shape[0] or means.shape[0] < 1:
            raise ValueError("need one mean direction per concentration")
        if np.any(kappas < 0):
            raise ValueError("concentrations must be nonnegative")
        norms = np.linalg.norm(means, axis=1, keepdims=True)
        if np.any(norms <= RETRACT_EPS):
            raise ValueError("mean directions must be nonzero")
        means = means / norms
        if self.weights is None:
            weights = np.full(means.shape[0], 1.0 / means.shape[0])
        else:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if weights.shape[0] != means.shape[0] or np.any(weights < 0):
            raise ValueError("need one nonnegative weight per component")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError("component weights must sum to 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "kappas", kappas)
        object.__setattr__(self, "weights", weights)

    @property
    def d(self) -> int:
        return self.means.shape[1]


def _sample_vmf_cosines(kappa: float, d: int, n: int, gen: np.random.Generator) -> np.ndarray:
    """Cosine components <mu, x> of n vMF(kappa) draws on S^{d-1}.

    Rejection sampler of Ulrich/Wood; for kappa = 0 it accepts every
    proposal and reduces exactly to the uniform cosine law.
    """
    dim = d - 1
    b = dim / (np.sqrt(4.0 * kappa * kappa + dim * dim) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dim * np.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        todo = n - filled
        z = gen.beta(dim / 2.0, dim / 2.0, size=todo)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = gen.uniform(size=todo)
        accept = kappa * w + dim * np.log(1.0 - x0 * w) - c >= np.log(u)
        k = int(accept.sum())
        out[filled : filled + k] = w[accept]
        filled += k
    return out


def _tangent_basis_completion(mu: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent hyperplane at mu, shape (d, d-1)."""
    d = mu.shape[0]
    # Householder reflection mapping e1 to mu; its remaining columns span mu-perp.
    sign = 1.0 if mu[0] >= 0 else -1.0
    u = mu.copy()
    u[0] += sign
    u /= np.linalg.norm(u)
    h = np.eye(d) - 2.0 * np.outer(u, u)
    return h[:, 1:]


def sample_vmf(mu: np.ndarray, kappa: float, rng: RngStream, n: int = 1) -> np.ndarray:
    """n draws from vMF(mu, kappa) via tangent-normal decomposition."""
    mu = retract(np.asarray(mu, dtype=np.float64))
    d = mu.shape[0]
    gen = rng.generator
    w = _sample_vmf_cosines(float(kappa), d, n, gen)
    tangent = gen.standard_normal((n, d - 1))
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    basis = _tangent_basis_completion(mu)
    sin_part = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    return w[:, None] * mu[None, :] + sin_part[:, None] * (tangent @ basis.T)


def sample_vmf_mixture(mix: VmfMixture, rng: RngStream, n: int = 1) -> np.ndarray:
    """n draws from a vMF mixture: component chosen by weight, then a
    vMF draw around its mean direction."""
    gen = rng.generator
    choices = gen.choice(mix.means.shape[0], size=n, p=mix.weights)
    out = np.empty((n, mix.d))
    for ci in range(mix.means.shape[0]):
        sel = choices == ci
        k = int(sel.sum())
        if k:
            out[sel] = sample_vmf(mix.means[ci], float(mix.kappas[ci]), rng, k)
    return out


def cap_mass(tokens: np.ndarray, center: np.ndarray, r: float) -> float:
    """Fraction of tokens y with chordal distance ||y - center|| <= r."""
    tokens = np.atleast_2d(np.asarray(tokens, dtype=np.float64))
    center = np.asarray(center, dtype=np.float64)
    dist = np.linalg.norm(tokens - center[None, :], axis=1)
    return float(np.mean(dist <= r))
