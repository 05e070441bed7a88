"""Closed-form theoretical envelopes for overlay against simulated
metrics: the finite-temperature metastability bound, the zero-temperature
decay curves, the accuracy window (t1, t2), and the sharp-consensus gap
bound.

The constants C0 < C1 are not numerically specified by the theory (they
absorb dimension- and spectrum-dependent factors); the defaults C0=1, C1=2
are overlay conveniences, not derived values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_C0 = 1.0
DEFAULT_C1 = 2.0


@dataclass(frozen=True)
class BoundParams:
    """Constants feeding the theoretical envelopes.

    ``v_p0`` is the Lyapunov functional of the initial ensemble, ``gap``
    the spectral gap of V B^T, and ``p`` the Lyapunov exponent in (0, 1].
    """

    gap: float
    sigma_max_b: float
    sigma_min_b: float
    v_p0: float
    beta: float
    p: float = 1.0
    c0: float = DEFAULT_C0
    c1: float = DEFAULT_C1

    def __post_init__(self):
        if not (self.c1 > self.c0 > 0):
            raise ValueError("need C1 > C0 > 0")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        for name in ("gap", "sigma_max_b", "sigma_min_b", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.v_p0 < 0:
            raise ValueError("v_p0 must be nonnegative")

    @property
    def decay_rate(self) -> float:
        """Exponential rate p*gap/sigma_max(B) of the distance envelope."""
        return self.p * self.gap / self.sigma_max_b


def metastability_envelope(t: float, bp: BoundParams) -> float:
    """Distance bound to the projected initial measure at time t:

        2 sqrt(log(beta+1)/beta) (e^(C1 t) - e^(C0 t))
        + V_p0 exp(-p gap / sigma_max(B) t)
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    temp = 2.0 * math.sqrt(math.log(bp.beta + 1.0) / bp.beta)
    growth = math.exp(bp.c1 * t) - math.exp(bp.c0 * t)
    return temp * growth + bp.v_p0 * math.exp(-bp.decay_rate * t)


def zero_temperature_envelope(t: float, bp: BoundParams, form: str = "lyapunov"):
    """Zero-temperature decay envelopes.

    ``form="lyapunov"``: V_p0 exp(-2 p gap / sigma_max(B) t), the decay of
    the Lyapunov mean itself.

    ``form="w2"``: the pair of distance envelopes
    (V_p0 e^(-rate t), sqrt(2 V_p0) e^(-rate t)) with
    rate = p gap / sigma_max(B); the first uses the stated V_p0 prefactor,
    the second the sqrt(2 V_p0) prefactor the derivation actually yields.
    Both are returned because they differ and either may be the tighter
    overlay.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if form == "lyapunov":
        return bp.v_p0 * math.exp(-2.0 * bp.decay_rate * t)
    if form == "w2":
        decay = math.exp(-bp.decay_rate * t)
        return bp.v_p0 * decay, math.sqrt(2.0 * bp.v_p0) * decay
    raise ValueError(f"unknown envelope form {form!r}")


def accuracy_window(eps: float, bp: BoundParams) -> tuple[float, float, bool]:
    """Times (t1, t2) bracketing the window where the envelope stays below
    eps, plus a flag for whether the window is non-empty (t1 < t2):

        t1 = sigma_max(B)/(p gap) log(2 V_p0 / eps)
        t2 = (1/C1) log(1 + (eps/4) sqrt(beta / log(beta+1)))
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not math.isfinite(bp.beta):
        raise ValueError("the accuracy window needs finite beta")
    t1 = math.log(2.0 * bp.v_p0 / eps) / bp.decay_rate
    t2 = math.log(1.0 + 0.25 * eps * math.sqrt(bp.beta / math.log(bp.beta + 1.0))) / bp.c1
    return t1, t2, t1 < t2


def consensus_gap_bound(
    r: float, q: float, beta: float, sigma_min_b: float, cap_mass: float
) -> float:
    """Upper bound on the sharp-consensus residual:

        sqrt(r^2 + 2q/sigma_min(B)) + 2 exp(-beta q) / cap_mass

    where ``cap_mass`` is the measure of the chordal-radius-r cap around
    the sharp target.
    """
    if r <= 0 or q <= 0:
        raise ValueError("r and q must be positive")
    if cap_mass <= 0:
        raise ValueError("empty cap: the bound is vacuous (cap_mass must be > 0)")
    return math.sqrt(r * r + 2.0 * q / sigma_min_b) + 2.0 * math.exp(-beta * q) / cap_mass


def proof_scale_choice(beta: float, d: int) -> tuple[float, float]:
    """The (r, q) choice used to balance the gap bound:
    q = d log(beta+1) / (2 beta) and r = sqrt(q)."""
    q = d * math.log(beta + 1.0) / (2.0 * beta)
    return math.sqrt(q), q
