"""Learning random displacement processes from entangled Bell measurements.

Process models, Bell-record simulation, characteristic-function estimation,
reconstruction and hypothesis-testing sample complexity, closed-form bounds,
and a time-domain trace layer.
"""

from .errors import Inapplicable, RejectedInput, UnsupportedVariant
from .process import FixedSpec, GaussianSpec, ThreePeakSpec, char_fn, sample_displacements
from .measurement import (
    DriftModel,
    RecordSet,
    SqueezingSpec,
    effective_squeezing,
    inject_pilots,
    simulate_bell_batch,
)
from .estimator import estimate_affine, estimate_char_fn, estimate_char_fn_corrected, reconstruct_slice

__version__ = "0.1.0"

__all__ = [
    "Inapplicable",
    "RejectedInput",
    "UnsupportedVariant",
    "FixedSpec",
    "GaussianSpec",
    "ThreePeakSpec",
    "char_fn",
    "sample_displacements",
    "DriftModel",
    "RecordSet",
    "SqueezingSpec",
    "effective_squeezing",
    "inject_pilots",
    "simulate_bell_batch",
    "estimate_affine",
    "estimate_char_fn",
    "estimate_char_fn_corrected",
    "reconstruct_slice",
]
