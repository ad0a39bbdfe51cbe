"""Few-photon simulator for acousto-optic frequency beam splitters."""

__version__ = "0.1.0"

from .components import (
    AOMCoupler,
    FrequencyDemux,
    HeraldDetector,
    LossChannel,
    PolarizingBeamSplitter,
    SpatialBeamSplitter,
    circuit_unitary,
    compile_component,
    evolve,
    fbs_unitary,
    herald_outcomes,
)
from .detection import DetectionOutcome, condition_on_detection
from .errors import ClassificationError, DimensionError, FreqBSError, SingularityError, ValidationError
from .fock import FrequencyBin, Mode, ModeRegistry, ModeUnitary, PureState, apply_mode_unitary, postselect
from .measures import DensityMatrix, concurrence, fidelity, partial_trace

__all__ = [
    "AOMCoupler",
    "ClassificationError",
    "DensityMatrix",
    "DetectionOutcome",
    "DimensionError",
    "FreqBSError",
    "FrequencyBin",
    "FrequencyDemux",
    "HeraldDetector",
    "LossChannel",
    "Mode",
    "ModeRegistry",
    "ModeUnitary",
    "PolarizingBeamSplitter",
    "PureState",
    "SingularityError",
    "SpatialBeamSplitter",
    "ValidationError",
    "apply_mode_unitary",
    "circuit_unitary",
    "compile_component",
    "concurrence",
    "condition_on_detection",
    "evolve",
    "fbs_unitary",
    "fidelity",
    "herald_outcomes",
    "partial_trace",
    "postselect",
]
