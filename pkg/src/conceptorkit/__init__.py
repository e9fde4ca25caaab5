"""Echo state networks and conceptor-based time-series classification.

The toolkit trains one random recurrent network per task, represents
each class of input sequences as a conceptor (a soft projector onto the
state ellipsoid the class excites), and classifies by combining
positive evidence (how well a sequence fits a class) with negative
evidence (how poorly it fits everything else).  Conceptors form a
Boolean algebra, so "everything else" is literally the negated
disjunction of the other classes.

Everything is deterministic: a single integer seed fixes reservoir
weights, synthetic corpora, and sweep protocols bit for bit.
"""

from .classify import (
    ABLATION_CELLS,
    DEFAULT_APERTURE,
    DEFAULT_CV_GRID,
    REJECT,
    SWEEP_AXES,
    ClassifierModel,
    EvidenceReport,
    Metrics,
    PreprocessingConfig,
    SweepCell,
    SweepReport,
    calibrate_thresholds,
    cross_validate_aperture,
    evaluate,
    evidences,
    label_shuffle_error,
    model_from_text,
    model_to_text,
    predict,
    sweep,
    sweep_to_csv,
    train,
)
from .conceptor import (
    Conceptor,
    Correlation,
    and_,
    conceptor_from_text,
    conceptor_to_text,
    correlation,
    evidence,
    from_correlation,
    not_,
    or_,
)
from .datasets import (
    MANEUVER_NAMES,
    Dataset,
    SynthSpec,
    atomic_write_text,
    load_manifest,
    read_csv_series,
    synthesize,
    write_csv_series,
    write_manifest,
)
from .errors import ConceptorKitError
from .features import (
    LabeledSeries,
    MfccConfig,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
    mel_filterbank,
    mfcc,
    read_wav,
    resample,
)
from .numerics import (
    Rng,
    SymEig,
    derive_seed,
    load_matrix,
    matrix_from_text,
    matrix_to_text,
    random_matrix,
    save_matrix,
    solve_spd,
    spectral_radius,
    sym_eig,
)
from .reservoir import (
    Reservoir,
    ReservoirParams,
    StateSequence,
    drive,
    fit_readout,
    generate,
    reservoir_from_text,
    reservoir_to_text,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_CELLS",
    "DEFAULT_APERTURE",
    "DEFAULT_CV_GRID",
    "MANEUVER_NAMES",
    "REJECT",
    "SWEEP_AXES",
    "ClassifierModel",
    "Conceptor",
    "ConceptorKitError",
    "Correlation",
    "Dataset",
    "EvidenceReport",
    "LabeledSeries",
    "Metrics",
    "MfccConfig",
    "NormalizationParams",
    "PreprocessingConfig",
    "Reservoir",
    "ReservoirParams",
    "Rng",
    "StateSequence",
    "SweepCell",
    "SweepReport",
    "SymEig",
    "SynthSpec",
    "and_",
    "apply_normalization",
    "atomic_write_text",
    "calibrate_thresholds",
    "conceptor_from_text",
    "conceptor_to_text",
    "correlation",
    "cross_validate_aperture",
    "derive_seed",
    "drive",
    "evaluate",
    "evidence",
    "evidences",
    "fit_normalization",
    "fit_readout",
    "from_correlation",
    "generate",
    "label_shuffle_error",
    "load_manifest",
    "load_matrix",
    "matrix_from_text",
    "matrix_to_text",
    "mel_filterbank",
    "mfcc",
    "model_from_text",
    "model_to_text",
    "not_",
    "or_",
    "predict",
    "random_matrix",
    "read_csv_series",
    "read_wav",
    "resample",
    "reservoir_from_text",
    "reservoir_to_text",
    "save_matrix",
    "solve_spd",
    "spectral_radius",
    "sweep",
    "sweep_to_csv",
    "sym_eig",
    "synthesize",
    "train",
    "write_csv_series",
    "write_manifest",
]
