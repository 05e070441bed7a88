"""Token dynamics on the sphere: softmax attention drift, its
zero-temperature limit, the consensus-based-optimization form of the
consensus point, and synchronous explicit-Euler simulation with pluggable
observers.

The per-step inner loops live in a compiled extension when available; set
``SPHEREDYN_PURE_PYTHON=1`` to force the NumPy fallback. Both backends
implement the same contracts (see ``_stepkernels_py``).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import NearZeroError
from .spectral import SpectralModel

if os.environ.get("SPHEREDYN_PURE_PYTHON"):
    from . import _stepkernels_py as _kernels
else:
    try:
        from . import _stepkernels as _kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _stepkernels_py as _kernels


def kernel_backend() -> str:
    """Name of the stepping backend in use ("cython" or "numpy")."""
    return _kernels.BACKEND


UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Ensemble:
    """n unit tokens in R^d plus the simulation clock: the empirical
    measure of the particle system at time ``time``."""

    tokens: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        tokens = np.ascontiguousarray(np.atleast_2d(self.tokens), dtype=np.float64)
        if tokens.shape[0] < 1:
            raise ValueError("ensemble needs at least one token")
        norms = np.linalg.norm(tokens, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("tokens must be unit vectors")
        tokens.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n(self) -> int:
        return self.tokens.shape[0]

    @property
    def d(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class SimConfig:
    """Integration parameters; ``beta=math.inf`` selects the
    zero-temperature update rule (not a hardmax softmax)."""

    beta: float
    dt: float = 0.01
    t_final: float = 1.0
    record_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError("beta must be positive (or math.inf)")
        if not (0 < self.dt <= self.t_final):
            raise ValueError("need 0 < dt <= t_final")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        # ceil(t_final/dt), robust to float quotients like 0.1/0.01 = 10.000...2
        ratio = self.t_final / self.dt
        nearest = round(ratio)
        if abs(ratio - nearest) < 1e-9 * max(1.0, abs(ratio)):
            return max(1, int(nearest))
        return max(1, math.ceil(ratio))


@dataclass(frozen=True)
class Trajectory:
    """Recorded snapshots of one simulation; the first entry is the
    initial ensemble and times are strictly increasing."""

    snapshots: list[Ensemble]
    config: SimConfig


def softmax_weights(ensemble: Ensemble, b: np.ndarray, beta: float, i: int) -> np.ndarray:
    """Attention weights of token i over the ensemble.

    w_ij = exp(beta <x_i, B x_j>) / sum_k exp(beta <x_i, B x_k>), computed
    with the row maximum subtracted so no overflow occurs for large beta.
    """
    if not np.isfinite(beta):
        raise ValueError("softmax weights need finite beta")
    x = ensemble.tokens
    logits = beta * (x @ (np.asarray(b).T @ x[i]))
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def attention_consensus(ensemble: Ensemble, b: np.ndarray, beta: float, i: int) -> np.ndarray:
    """Softmax-weighted consensus point m_i = sum_j w_ij x_j of token i."""
    w = softmax_weights(ensemble, b, beta, i)
    return w @ ensemble.tokens


def consensus_at(ensemble: Ensemble, b: np.ndarray, beta: float, x: np.ndarray) -> np.ndarray:
    """Softmax consensus over the ensemble probed at an arbitrary point x."""
    if not np.isfinite(beta):
        raise ValueError("consensus point needs finite beta")
    tokens = ensemble.tokens
    logits = beta * (tokens @ (np.asarray(b).T @ np.asarray(x, dtype=np.float64)))
    logits -= logits.max()
    w = np.exp(logits)
    return (w / w.sum()) @ tokens


def cbo_consensus(ensemble: Ensemble, b: np.ndarray, beta: float, x: np.ndarray) -> np.ndarray:
    """Kernelized consensus point of consensus-based optimization.

    Uses the quadratic objective J(y) = -1/2 <y, B y> and the kernel
    kappa(x, y) = exp(-beta/2 <x-y, B(x-y)>), evaluated as written (B need
    not be positive definite). Log-weights are shifted by their maximum
    before exponentiation, mirroring the softmax guard.
    """
    if not np.isfinite(beta):
        raise ValueError("consensus point needs finite beta")
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    tokens = ensemble.tokens
    diffs = x[None, :] - tokens
    log_kappa = -0.5 * beta * np.sum(diffs * (diffs @ b.T), axis=1)
    log_obj = 0.5 * beta * np.sum(tokens * (tokens @ b.T), axis=1)  # -beta J(y)
    logw = log_kappa + log_obj
    logw -= logw.max()
    w = np.exp(logw)
    return (w / w.sum()) @ tokens


def finite_beta_drift(ensemble: Ensemble, model: SpectralModel, beta: float, i: int) -> np.ndarray:
    """Velocity of token i under the attention dynamics:
    P_{x_i}(V m_i), tangent to the sphere at x_i."""
    m = attention_consensus(ensemble, model.B, beta, i)
    x = ensemble.tokens[i]
    vm = model.V @ m
    return vm - np.dot(x, vm) * x


def zero_temperature_drift(x: np.ndarray, model: SpectralModel) -> np.ndarray:
    """Velocity of a point under the zero-temperature flow:
    P_x(V B^T x / ||B^T x||)."""
    x = np.asarray(x, dtype=np.float64)
    g = model.B.T @ x
    vm = model.V @ (g / np.linalg.norm(g))
    return vm - np.dot(x, vm) * x


def _advance(tokens: np.ndarray, model: SpectralModel, config: SimConfig) -> np.ndarray:
    if math.isinf(config.beta):
        new, bad = _kernels.zero_temp_step(tokens, model.B, model.V, config.dt)
    else:
        new, bad = _kernels.finite_beta_step(tokens, model.B, model.V, config.beta, config.dt)
    if bad >= 0:
        raise NearZeroError(f"token {bad} collapsed to zero norm during the Euler update")
    return new


def euler_step(ensemble: Ensemble, model: SpectralModel, config: SimConfig) -> Ensemble:
    """One synchronous explicit-Euler step with retraction.

    All drifts are evaluated on the input ensemble, then every token moves
    and is renormalized; time advances by dt. Finite beta uses the softmax
    drift, beta = inf the zero-temperature rule.
    """
    new = _advance(ensemble.tokens, model, config)
    return Ensemble(tokens=new, time=ensemble.time + config.dt)


@dataclass
class SimResult:
    """Trajectory plus whatever each observer recorded."""

    trajectory: Trajectory
    records: list[list] = field(default_factory=list)


def simulate(
    init: Ensemble,
    model: SpectralModel,
    config: SimConfig,
    observers: tuple = (),
    store_snapshots: bool = True,
) -> SimResult:
    """Run ceil(t_final/dt) synchronous Euler steps from ``init``.

    Snapshots and observer records are taken every ``record_stride`` steps
    plus at t=0 and the final step. Observers are callables
    ``(step_index, time, ensemble) -> record | None``; returned non-None
    records are collected per observer (this is how the harness streams
    CSV rows without retaining trajectories of large runs, in which case
    pass ``store_snapshots=False`` to keep only the first and last
    snapshot).
    """
    n_steps = config.n_steps
    records: list[list] = [[] for _ in observers]
    snapshots = [init]

    def record(step: int, ens: Ensemble) -> None:
        for slot, obs in zip(records, observers):
            rec = obs(step, ens.time, ens)
            if rec is not None:
                slot.append(rec)

    record(0, init)
    tokens = init.tokens
    current = init
    zero_temp = math.isinf(config.beta)
    step = 0
    while step < n_steps:
        if zero_temp:
            # decoupled dynamics: advance a whole record stride inside the kernel
            gap = min(config.record_stride - step % config.record_stride, n_steps - step)
            tokens, bad = _kernels.zero_temp_run(tokens, model.B, model.V, config.dt, gap)
            if bad >= 0:
                raise NearZeroError(f"token {bad} collapsed to zero norm during the Euler update")
            step += gap
        else:
            tokens = _advance(tokens, model, config)
            step += 1
        if step % config.record_stride == 0 or step == n_steps:
            # time from step count, not accumulation, so grids are stable
            current = Ensemble(tokens=tokens, time=init.time + step * config.dt)
            record(step, current)
            if store_snapshots:
                snapshots.append(current)
    if not store_snapshots:
        snapshots.append(current)
    return SimResult(trajectory=Trajectory(snapshots=snapshots, config=config), records=records)
