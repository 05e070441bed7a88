"""Pure-NumPy stepping kernels.

Fallback twin of the compiled ``_stepkernels`` extension; same call
contracts, selected at import time by :mod:`spheredyn.dynamics` when the
extension is unavailable (or ``SPHEREDYN_PURE_PYTHON=1``).

Steps are synchronous: every drift is evaluated on the input positions,
then all tokens move and retract. Functions return ``(new_tokens, bad)``
where ``bad`` is the index of the first token whose Euler update collapsed
to (numerically) zero norm, or -1 if none did.
"""

from __future__ import annotations

import numpy as np

_NORM_EPS = 1e-12

BACKEND = "numpy"


def consensus_all(x: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    """Softmax-weighted consensus point of every token, shape (n, d).

    Row i is sum_j softmax_j(beta <x_i, B x_j>) x_j. Logits are shifted by
    their row maximum before exponentiation, so denominators are >= 1 and
    beta up to ~1e6 cannot overflow.
    """
    logits = (x @ b) @ x.T
    logits *= beta
    logits -= logits.max(axis=1, keepdims=True)
    # flush hopeless logits to weight exactly 0: their exp would land in
    # (or feed products into) the subnormal range, which x86 resolves in
    # microcode at a ~100x slowdown, while contributing < 1e-250 relative
    # to the row normalizer (which is always >= 1)
    logits[logits < -575.0] = -600.0
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits @ x


def finite_beta_step(
    x: np.ndarray, b: np.ndarray, v: np.ndarray, beta: float, dt: float
) -> tuple[np.ndarray, int]:
    """One synchronous Euler step of the softmax attention dynamics."""
    m = consensus_all(x, b, beta)
    return _move_and_retract(x, m @ v.T, dt)


def zero_temp_step(
    x: np.ndarray, b: np.ndarray, v: np.ndarray, dt: float
) -> tuple[np.ndarray, int]:
    """One synchronous Euler step of the zero-temperature dynamics."""
    g = x @ b
    g_norms = np.linalg.norm(g, axis=1, keepdims=True)
    m = g / g_norms
    return _move_and_retract(x, m @ v.T, dt)


def zero_temp_run(
    x: np.ndarray, b: np.ndarray, v: np.ndarray, dt: float, n_steps: int
) -> tuple[np.ndarray, int]:
    """Advance n_steps zero-temperature Euler steps; same contract as the
    single-step kernels (the compiled twin fuses this loop)."""
    for _ in range(n_steps):
        x, bad = zero_temp_step(x, b, v, dt)
        if bad >= 0:
            return x, bad
    return x, -1


def _move_and_retract(x: np.ndarray, field: np.ndarray, dt: float) -> tuple[np.ndarray, int]:
    drift = field - np.sum(x * field, axis=1, keepdims=True) * x
    y = x + dt * drift
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    bad = np.nonzero(norms[:, 0] <= _NORM_EPS)[0]
    if bad.size:
        return y, int(bad[0])
    return y / norms, -1
