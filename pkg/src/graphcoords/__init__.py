"""Anchor-based graph coordinates (VC, TC, DVC) feeding a plain feed-forward classifier."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    UNREACHABLE,
    ComponentLabeling,
    Graph,
    GraphFormatError,
    MultilayerGraph,
    connected_components,
    load_edge_list,
    load_multilayer_edge_list,
    sssp,
)
from .coords import (  # noqa: E402
    AnchorSet,
    Embedding,
    PartialDistanceMatrix,
    SingularSpectrum,
    choose_nc_by_variance,
    compute_dvc,
    compute_multilayer_coords,
    compute_tc,
    compute_vc,
    pair_anchors,
    select_anchors,
    singular_spectrum,
)
from .features import (  # noqa: E402
    FeatureMatrix,
    NormStats,
    SplitAssignment,
    apply_normalizer,
    concat_representation,
    fit_normalizer,
    load_labels,
    load_splits,
    one_hot,
    random_split,
)
from .nn import (  # noqa: E402
    MlpSpec,
    TrainConfig,
    TrainedModel,
    count_parameters,
    evaluate_accuracy,
    evaluate_mean_roc_auc,
    forward,
    train,
)
from .diagnostics import (  # noqa: E402
    AmbiguityReport,
    DuplicateReport,
    count_duplicate_coordinates,
    estimate_ambiguous_edges,
    spectrum_stability,
)
