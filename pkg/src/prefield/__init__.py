"""Scale-aware multisampled grid features and prefiltered histogram losses."""

from .contraction import ContractedSample, contract, contract_det_root, contract_sample
from .distance import (
    DistanceMap,
    PowerParams,
    power_transform,
    power_transform_inverse,
    to_metric,
    to_normalized,
)
from .geometry import (
    ConicalFrustum,
    MultisampleSet,
    Ray,
    RenderDeterministic,
    TrainRandom,
    cylinder_pattern,
    frustum_t_values,
    hex_angles,
    multisample,
    train_rng,
)
from .gridfield import (
    GridPyramid,
    Level,
    aggregate_features,
    convolve_oracle_1d,
    downweight,
    fast_erf,
    interpolate,
    load_pyramid,
    make_level,
    make_pyramid,
    normalized_weight_decay,
    save_pyramid,
)
from .render import RaySamples, SamplingConfig, compositing_weights, sample_intervals, training_losses
from .stepfun import (
    Histogram,
    PiecewiseLinear,
    StepFunction,
    antialiased_interlevel_loss,
    baseline_interlevel_loss,
    blur_stepfun,
    distortion_loss,
    load_histogram_csv,
    resample_histogram,
    save_histogram_csv,
)

__version__ = "0.1.0"
