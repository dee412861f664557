"""Recurrent recalibration of coarse dance primitive sequences, and the
metric suite used to evaluate generated dance (FID, diversity, foot skating,
beat alignment).

>>> import dancerecal as dr
>>> seq = dr.synthesize("iid-gaussian", n=13, seed=1234)
>>> out = dr.recalibrate_sequence(seq, dr.RecalConfig.ema(0.5))
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DanceRecalError,
    DegenerateRotationError,
    InsufficientDataError,
    InvalidMatrixError,
    InvariantError,
    LayoutError,
    NonFiniteError,
    NumericError,
    ParseError,
    SchemaError,
)
from .formats import (
    read_beats,
    read_motion,
    read_params,
    read_skeleton,
    read_templates,
    write_beats,
    write_motion,
    write_params,
    write_report,
    write_skeleton,
    write_templates,
)
from .metrics import (
    BeatTrack,
    FeatureSet,
    FsrThresholds,
    GaussianStats,
    Template,
    beat_alignment_score,
    boundary_discontinuity,
    default_templates,
    diversity,
    evaluate,
    feature_set,
    fid,
    foot_skating_ratio,
    gaussian_stats,
    geometric_features,
    kinematic_beats,
    kinetic_features,
)
from .motion import (
    LAYOUT,
    ChannelLayout,
    PrimitiveSequence,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    identity_primitive,
    join_channels,
    matrix_to_rot6d,
    mirror,
    mirror_sequence,
    rot6d_to_matrix,
    split_channels,
    validate,
)
from .noise import NoiseConfig, add_noise
from .pooling import (
    DEFAULT_ARCH,
    BatchNorm,
    ConvLayer,
    PoolingParams,
    ema_params,
    init_params,
    passthrough_params,
    pooling_block,
    pooling_jacobian_analytic,
    pooling_jacobian_fd,
)
from .recalibration import RecalConfig, recalibrate_sequence, recalibrate_step
from .synth import synthesize
