"""Energy-based mode pruning for diagonal state-space models."""

from .exceptions import ManifestError, ValidationError
from .model import (
    DiagonalLayer,
    ModelStack,
    check_layer,
    check_stack,
    discretize_stack,
    discretize_zoh,
    expand_conjugate_pairs,
    validate_layer,
    validate_stack,
)
from .response import (
    ImpulseSlice,
    convolve,
    frequency_response,
    impulse_array,
    impulse_response,
    simulate,
)
from .energy import (
    ModeEnergy,
    PowerEstimate,
    finite_energies,
    asymptotic_energies,
    layer_energy_exact,
    layer_energy_modal,
    mode_energy,
    mode_energy_finite,
    mode_energies,
    white_noise_power,
)
from .scores import (
    LayerScores,
    ScoreTable,
    aire_score_table,
    hinf_score,
    hinf_scores,
    lamp_score,
    last_score,
    magnitude_score,
    magnitude_scores,
    prefix_normalize,
    random_score,
    score_table,
)
from .selection import (
    LayerDecision,
    PruneDecision,
    mask,
    materialize,
    select_global_prefix,
    select_global_raw,
    select_uniform_ratio,
)
from .evaluation import (
    DistortionReport,
    LayerCertificate,
    StackBound,
    SweepResult,
    certify,
    certify_layer,
    distortion,
    empirical_hinf,
    kappa,
    mode_hinf_envelope,
    stack_bound,
    sweep,
)
from .io import (
    load_decision,
    load_model,
    load_scores,
    save_decision,
    save_model,
    save_report,
    save_scores,
)
from .synth import synth
from .pruner import StatePruner

__all__ = [
    "DiagonalLayer",
    "DistortionReport",
    "ImpulseSlice",
    "LayerCertificate",
    "LayerDecision",
    "LayerScores",
    "ManifestError",
    "ModeEnergy",
    "ModelStack",
    "PowerEstimate",
    "PruneDecision",
    "ScoreTable",
    "StackBound",
    "StatePruner",
    "SweepResult",
    "ValidationError",
    "aire_score_table",
    "asymptotic_energies",
    "certify",
    "certify_layer",
    "check_layer",
    "check_stack",
    "convolve",
    "discretize_stack",
    "discretize_zoh",
    "distortion",
    "empirical_hinf",
    "expand_conjugate_pairs",
    "finite_energies",
    "frequency_response",
    "hinf_score",
    "hinf_scores",
    "impulse_array",
    "impulse_response",
    "kappa",
    "lamp_score",
    "last_score",
    "layer_energy_exact",
    "layer_energy_modal",
    "load_decision",
    "load_model",
    "load_scores",
    "magnitude_score",
    "magnitude_scores",
    "mask",
    "materialize",
    "mode_energies",
    "mode_energy",
    "mode_energy_finite",
    "mode_hinf_envelope",
    "prefix_normalize",
    "random_score",
    "save_decision",
    "save_model",
    "save_report",
    "save_scores",
    "score_table",
    "select_global_prefix",
    "select_global_raw",
    "select_uniform_ratio",
    "simulate",
    "stack_bound",
    "sweep",
    "synth",
    "validate_layer",
    "validate_stack",
    "white_noise_power",
]
