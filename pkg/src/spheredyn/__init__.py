"""spheredyn: simulator and analysis toolkit for self-attention token
dynamics on the unit sphere.

Subpackages by concern:

- ``linalg``    dense symmetric eigendecomposition, singular extremes
- ``geometry``  sphere geometry and seeded sampling (uniform, vMF mixtures)
- ``spectral``  dominant eigenspaces, gaps, normalized subspace projection
- ``dynamics``  softmax and zero-temperature token flows (Euler + retraction)
- ``metrics``   exact W2, Lyapunov ratios, alignment, interaction energy
- ``bounds``    closed-form theoretical envelopes
- ``harness``   experiment presets, CSV artifacts, CLI entry point
"""

from .dynamics import (
    Ensemble,
    SimConfig,
    Trajectory,
    attention_consensus,
    cbo_consensus,
    euler_step,
    finite_beta_drift,
    kernel_backend,
    simulate,
    softmax_weights,
    zero_temperature_drift,
)
from .geometry import RngStream, VmfMixture, cap_mass, retract, sample_uniform, sample_vmf_mixture, tangent_project
from .linalg import EigenDecomposition, invert, singular_extremes, symmetric_eigendecomposition
from .metrics import (
    MetricRecord,
    alignment,
    interaction_energy,
    laplace_residual,
    mean_perp_ratio,
    perp_ratio,
    perp_ratio_gradient,
    wasserstein2,
)
from .bounds import BoundParams, accuracy_window, consensus_gap_bound, metastability_envelope, zero_temperature_envelope
from .spectral import SpectralModel, Subspace, build_model, project_ensemble, spherical_projection, subspace_project

__version__ = "0.1.0"

__all__ = [
    "Ensemble",
    "SimConfig",
    "Trajectory",
    "attention_consensus",
    "cbo_consensus",
    "euler_step",
    "finite_beta_drift",
    "kernel_backend",
    "simulate",
    "softmax_weights",
    "zero_temperature_drift",
    "RngStream",
    "VmfMixture",
    "cap_mass",
    "retract",
    "sample_uniform",
    "sample_vmf_mixture",
    "tangent_project",
    "EigenDecomposition",
    "invert",
    "singular_extremes",
    "symmetric_eigendecomposition",
    "MetricRecord",
    "alignment",
    "interaction_energy",
    "laplace_residual",
    "mean_perp_ratio",
    "perp_ratio",
    "perp_ratio_gradient",
    "wasserstein2",
    "BoundParams",
    "accuracy_window",
    "consensus_gap_bound",
    "metastability_envelope",
    "zero_temperature_envelope",
    "SpectralModel",
    "Subspace",
    "build_model",
    "project_ensemble",
    "spherical_projection",
    "subspace_project",
    "__version__",
]
