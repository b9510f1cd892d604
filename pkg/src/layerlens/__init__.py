"""Stacked Boltzmann machine training plus per-layer representation scoring.

The pipeline: load image data (data), train a stack greedily (rbm, dbn),
count each layer's hidden states and measure resolution H[s] / relevance
H[k] with power-law structure (rra), contrast against k-means grouping
(kmeans), and score generative quality by inverse KL divergence over
labeler-assigned labels (quality). The cli module orchestrates and persists
everything (checkpoint, plots).
"""

from .data import Dataset, SplitSpec, load_dataset, load_idx, load_ocr, save_dataset, shuffle_control, split
from .dbn import DbnModel, StateSet, gibbs_equilibrate, generate_visible, propagate_forward, train_dbn
from .errors import (
    CapacityError,
    ConfigError,
    ConsistencyError,
    DataError,
    DivergenceError,
    FitError,
    FormatError,
    LabelerError,
    LayerlensError,
)
from .kmeans import Clustering, clustering_histogram, kmeans
from .quality import (
    AbilityResult,
    GenerationEvalConfig,
    LabelDistribution,
    LabelerConfig,
    LabelerModel,
    classification_error,
    evaluate_generation,
    generation_ability,
    train_labeler,
)
from .rbm import (
    Gradients,
    PcdState,
    RbmParams,
    TrainConfig,
    cd_gradient,
    energy,
    exact_gradient,
    exact_log_likelihood,
    exact_log_partition,
    hidden_conditional,
    sample_state,
    train_rbm,
    visible_conditional,
)
from .rra import (
    DegeneracySpectrum,
    LayerReport,
    MaxRelevanceCurve,
    PowerLawFit,
    RraPoint,
    StateHistogram,
    count_states,
    degeneracy_spectrum,
    fit_power_law,
    information_cost,
    layer_report,
    max_relevance_curve,
    mean_degeneracy_entropy,
    relevance_entropy,
    resolution_entropy,
)

__version__ = "0.1.0"
