"""Few-shot evaluation of frozen embeddings and power-law scaling analysis."""

__version__ = "0.1.0"

from .datasets import (
    METHOD_ORDER,
    AccuracyEstimate,
    ClassSplit,
    DatasetMeta,
    EmbeddingDataset,
    Episode,
    Method,
    ScaleVariable,
    ScalingCurve,
)
from .embfile import read_embeddings, write_embeddings
from .errors import (
    ArgumentError,
    ComparisonUnavailableError,
    CorruptionError,
    DegenerateInputError,
    DegenerateLawError,
    EpisodeInfeasibleError,
    FewscaleError,
    FormatError,
    InsufficientClassesError,
    InsufficientDataError,
    ParseError,
    PipelineCellError,
    ValidationError,
)
from .fewshot import (
    Z95,
    FineTuneConfig,
    LinearHead,
    classify_head,
    classify_matching,
    classify_prototypical,
    compute_prototypes,
    finetune_linear_head,
    head_gradient,
    head_loss,
    matching_probabilities,
    run_evaluation,
    wilson_interval,
)
from .fitting import (
    ConvergenceComparison,
    FitInfeasible,
    FitResult,
    compare_convergence,
    convergence_point,
    fit_power_law,
    predict_error,
)
from .laws import (
    NormalizedPowerLaw,
    PowerLaw,
    denormalize_law,
    normalize_law,
)
from .pipeline import RunConfig, run_pipeline
from .report import (
    emit_plot,
    emit_table,
    format_scientific,
    ingest_curve_csv,
    parse_table_cell,
    render_cell,
)
from .sampling import (
    EpisodeConfig,
    ScalingSchedule,
    derive_trial_seed,
    sample_episode,
    split_classes,
    subsample_classes,
    subsample_data,
)

__all__ = [
    "__version__",
    "METHOD_ORDER",
    "Z95",
    "AccuracyEstimate",
    "ArgumentError",
    "ClassSplit",
    "ComparisonUnavailableError",
    "ConvergenceComparison",
    "CorruptionError",
    "DatasetMeta",
    "DegenerateInputError",
    "DegenerateLawError",
    "EmbeddingDataset",
    "Episode",
    "EpisodeConfig",
    "EpisodeInfeasibleError",
    "FewscaleError",
    "FineTuneConfig",
    "FitInfeasible",
    "FitResult",
    "FormatError",
    "InsufficientClassesError",
    "InsufficientDataError",
    "LinearHead",
    "Method",
    "NormalizedPowerLaw",
    "ParseError",
    "PipelineCellError",
    "PowerLaw",
    "RunConfig",
    "ScaleVariable",
    "ScalingCurve",
    "ScalingSchedule",
    "ValidationError",
    "classify_head",
    "classify_matching",
    "classify_prototypical",
    "compare_convergence",
    "compute_prototypes",
    "convergence_point",
    "denormalize_law",
    "derive_trial_seed",
    "emit_plot",
    "emit_table",
    "finetune_linear_head",
    "fit_power_law",
    "format_scientific",
    "head_gradient",
    "head_loss",
    "ingest_curve_csv",
    "matching_probabilities",
    "normalize_law",
    "parse_table_cell",
    "predict_error",
    "read_embeddings",
    "render_cell",
    "run_evaluation",
    "run_pipeline",
    "sample_episode",
    "split_classes",
    "subsample_classes",
    "subsample_data",
    "wilson_interval",
]
