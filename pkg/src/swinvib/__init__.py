"""Sliding-window variational-bottleneck filtering of retrieved context.

Per-layer bottleneck classifiers score fixed-length windows of a retrieved
context by how decisively single-sourced their information is; windows
whose ensemble score clears a threshold are concatenated with the query
into the final prompt. The package also ships the uncertainty metric
suite and a numerical harness for the underlying entropy claims.
"""

from .bottleneck import (
    IbLossBreakdown,
    TrainConfig,
    VibClassifier,
    VibModel,
    decode,
    encode,
    gradient_check,
    ib_loss,
    init_model,
    load_model,
    reparameterize,
    save_model,
    train_model,
)
from .features import (
    FeatureRecord,
    SyntheticSpec,
    SyntheticWindowSource,
    build_training_sets,
    featurize,
    generate_synthetic,
    mean_heads,
    read_feature_file,
    write_feature_file,
)
from .filtering import FilterDecision, FilterResult, LayerEnsemble, filter_context, score_window
from .metrics import AnswerRecord, MetricsReport, compute_report, exact_match, psi_tre_correlation
from .theory import (
    MixRatioScenario,
    TiltedFamily,
    mix_ratio_uncertainty,
    psi_vs_delta_i_curve,
    tilted_distribution,
    tilted_entropy_derivative,
)
from .uncertainty import (
    DiscreteDistribution,
    ResponseTally,
    TokenLikelihoods,
    conditional_entropy,
    entropy_drop_proxy,
    gaussian_kl_to_standard,
    instance_uncertainty,
    mean_psi,
    total_response_entropy,
)
from .validation import FormatError, ValidationError
from .windows import (
    CorpusSample,
    LabeledWindow,
    TokenSequence,
    WindowSpec,
    interleave_mixed,
    label_window,
    partition_windows,
    random_window,
    read_corpus,
)

__version__ = "0.1.0"
