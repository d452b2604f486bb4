"""funcband: finite-sample prediction bands for partially observed
functional data, with elastic registration of amplitude and phase."""

from .conformal import (
    ConformalConfig,
    PredictionBand,
    TrialGridSpec,
    WarpPredictionSet,
    ffcp,
    lower_quantile,
    sfcp,
    sfcp_from_split,
    sfcpp,
    sfcpp_from_split,
    trial_grid,
)
from .errors import (
    DataError,
    DegenerateDistances,
    EmptySupport,
    EmptyWarpSet,
    FuncbandError,
    GridMismatch,
    MetricPatternMismatch,
    SupportMismatch,
)
from .funcore import (
    Curve,
    Fragments,
    Interval,
    PartialCurve,
    SparsePoints,
    TimeGrid,
    euclid_distance,
    l2_distance,
    prod_distance,
    restrict,
)
from .registration import (
    RegistrationResult,
    amplitude_distance,
    karcher_mean,
    multiple_register,
    pairwise_register,
    warp_distance,
)
from .simeval import (
    EvalReport,
    FixedPattern,
    GeneratorSpec,
    UniformTruncation,
    gen_curves,
    gen_warp,
    monte_carlo,
)
from .smoothing import (
    BandwidthTuning,
    DistanceMatrix,
    KernelSpec,
    bandwidth_candidates,
    distance_matrix,
    fourier_project,
    moving_average,
    ns_predict,
    tune_bandwidth,
)
from .srsf import Srsf, Warp, fr_distance, srsf_inverse, srsf_transform, warp_curve, warp_srsf

__version__ = "0.1.0"
