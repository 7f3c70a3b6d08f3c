"""Time-multiplexed photon-number-resolving detection with binary APDs."""

__version__ = "0.1.0"

from .detector import (
    DetectorConfig,
    ModeProbabilities,
    TimingReport,
    TimingSpec,
    balanced_config,
    build_mode_probabilities,
    load_config,
    save_config,
    validate_timing,
)
from .errors import ConfigurationError, InversionError, NumericalError, ValidationError
from .matrix import (
    ConditionalMatrix,
    PhotonDistribution,
    build_matrix,
    factorized_matrix,
    loss_matrix,
    occupancy_distribution,
    occupancy_matrix,
    truncation_error,
)
from .reconstruction import (
    ConfidenceTable,
    CountHistogram,
    MLEResult,
    bootstrap_errors,
    count_resolution,
    confidence,
    confidence_table,
    direct_invert,
    em_reconstruct,
    mle_poisson_mean,
    truncated_poisson,
)
from .simulator import ClickRecord, InputState, exact_click_distribution, sample_clicks

__all__ = [name for name in dir() if not name.startswith("_")]
