"""Near-field wideband localization under controllable beam squint.

Channel synthesis for extremely large ULAs with visibility-region masking,
TTD/phase-shifter beamforming with per-subcarrier focal control, Fisher/CRB
analysis, beam-sweep localizers, and a Monte-Carlo/dataset harness.
"""

from .array_channel import (
    SPEED_OF_LIGHT,
    ChannelVector,
    PolarPosition,
    SystemConfig,
    VisibilityRegion,
    array_response,
    centered_antenna_index,
    channel,
    exact_distance,
    path_gain,
    path_gains,
    subcarrier_frequency,
    taylor_distance,
    taylor_distances,
    vr_mask,
)
from .beamforming import (
    GainMap,
    GroupedBeamPlan,
    TrajectorySpec,
    TtdConfig,
    focal_point,
    gain_map,
    grouped_plan,
    grouped_weight_matrix,
    ps_beamformer,
    ttd_from_trajectory,
    ttd_weight_matrix,
    ttd_weights,
    weight_matrix,
)
from .crb import (
    CrbResult,
    SingularFimError,
    crb,
    crb_from_fim,
    d_u_d_angle,
    d_u_d_range,
    fim,
    profile_crb,
)
from .harness import (
    CrbSweepRow,
    ExperimentSpec,
    RmseReport,
    RmseRow,
    crb_sweep,
    draw_position,
    draw_vr,
    export_dataset,
    factor_pair,
    load_split,
    monte_carlo,
    reshape_observations,
    score_external,
    unpack_frame_channel,
    write_crb_sweep_csv,
)
from .localization import (
    CbsBtParams,
    LocalizationEstimate,
    SearchRegion,
    StageRecord,
    angle_sweep_trajectory,
    cbs,
    cbs_angle_stage,
    cbs_bt,
    cbs_distance_stage,
    distance_sweep_trajectory,
    invert_angle,
    invert_distance,
)
from .signal_chain import (
    ReceivedFrame,
    add_noise,
    noise_var_for_snr,
    noiseless_signal,
    shaped_noise_vars,
    write_frame_csv,
)

__version__ = "0.1.0"
