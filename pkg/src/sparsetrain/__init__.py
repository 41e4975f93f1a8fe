"""Sparse MLP training engine with rewiring policies and trajectory analytics."""

from .analytics import (
    DeltaProfile,
    SetEvolution,
    autocorrelation_at_lag,
    classify_sets,
    cumulative_distance,
    decorrelation_time,
    delta_by_magnitude_bins,
    inference_threshold,
    pearson,
    search_capacity,
)
from .config import RunConfig, ScheduleSpec, config_from_dict, config_to_dict, load_config, save_config
from .errors import (
    ConfigError,
    SequenceError,
    ShapeError,
    StructureError,
    ZeroVarianceError,
)
from .nn import (
    MLP,
    LinearLayer,
    SgdMomentum,
    cross_entropy_loss,
    linear_backward,
    linear_forward,
    loss,
    mse_loss,
    network_loss_and_grads,
)
from .patterns import (
    PatternKind,
    Violation,
    enumerate_24_2d_patterns,
    mask_24_1d,
    mask_24_2d,
    mask_block,
    validate_structure,
)
from .policy import (
    SparsityPolicy,
    apply_exploitation,
    lottery_mask,
    lottery_rewind,
    reduce_arch,
    rewire_fraction,
    rigl_rewire,
    scale_nonparticipating_grads,
    set_rewire,
    should_rewire,
    topd_mask,
)
from .runner import RunSummary, run_experiment, task_error
from .schedules import LrSchedule, lr_at
from .sweep import sweep
from .tasks import Dataset, TaskSpec, build_dataset
from .trajectory import TrajectoryLog, record_snapshot

__version__ = "0.1.0"
