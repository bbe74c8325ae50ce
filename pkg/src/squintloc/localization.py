"""Beam-sweep localizers built on controllable beam squint.

The baseline estimator (cbs) spends one frame sweeping the band's foci across
angle at the near edge of the region and one frame sweeping along range at the
estimated angle; the user feeds back the strongest subcarrier index and the
focal-point map inverts it to a coordinate. The three-stage refinement
(cbs_bt) replaces the range readout with grouped beams: a one-shot angle
refinement around the first estimate, then a shrinking-bracket range search.
"""

from dataclasses import dataclass

import numpy as np

from .array_channel import PolarPosition, SystemConfig, VisibilityRegion
from .beamforming import TrajectorySpec, focal_point, grouped_plan, ttd_from_trajectory
from .signal_chain import ReceivedFrame, add_noise, noiseless_signal


@dataclass(frozen=True)
class SearchRegion:
    """Polar box the user is known to occupy."""

    r_min_m: float = 5.0
    r_max_m: float = 50.0
    theta_min_rad: float = -np.pi / 3
    theta_max_rad: float = np.pi / 3

    def __post_init__(self):
        if self.r_min_m <= 0 or self.r_min_m >= self.r_max_m:
            raise ValueError("need 0 < r_min_m < r_max_m")
        if self.theta_min_rad >= self.theta_max_rad:
            raise ValueError("need theta_min_rad < theta_max_rad")
        if max(abs(self.theta_min_rad), abs(self.theta_max_rad)) >= np.pi / 2:
            raise ValueError("region angles must lie inside (-pi/2, pi/2)")

    def clamp(self, range_m: float, angle_rad: float) -> tuple[float, float]:
        return (
            float(np.clip(range_m, self.r_min_m, self.r_max_m)),
            float(np.clip(angle_rad, self.theta_min_rad, self.theta_max_rad)),
        )


@dataclass(frozen=True)
class CbsBtParams:
    """Group counts, iteration budget, and stop width for the refinement stages."""

    groups_angle: int = 64
    groups_distance: int = 16
    max_iters: int = 5
    stop_threshold_m: float = 0.5
    angle_window_rad: float = np.deg2rad(1.0)

    def __post_init__(self):
        if self.groups_angle < 2 or self.groups_distance < 2:
            raise ValueError("group counts must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_threshold_m <= 0:
            raise ValueError("stop_threshold_m must be positive")
        if self.angle_window_rad <= 0:
            raise ValueError("angle_window_rad must be positive")


@dataclass(frozen=True)
class StageRecord:
    """What one beam sweep saw: the winning feedback index and the raw frame."""

    stage: str
    winner_index: int
    frame: ReceivedFrame
    estimate: float


@dataclass(frozen=True)
class LocalizationEstimate:
    angle_rad: float
    range_m: float
    sweeps_used: int
    stage_diagnostics: tuple


def angle_sweep_trajectory(region: SearchRegion) -> TrajectorySpec:
    """Focus trajectory across the angular sector at the region's near range."""
    return TrajectorySpec(
        start=PolarPosition(region.r_min_m, region.theta_min_rad),
        end=PolarPosition(region.r_min_m, region.theta_max_rad),
    )


def distance_sweep_trajectory(region: SearchRegion, angle_rad: float) -> TrajectorySpec:
    """Focus trajectory along range at a fixed angle, near edge to far edge."""
    return TrajectorySpec(
        start=PolarPosition(region.r_min_m, angle_rad),
        end=PolarPosition(region.r_max_m, angle_rad),
    )


def invert_angle(cfg: SystemConfig, traj: TrajectorySpec, m_max: int) -> float:
    """Angle of the focal point addressed by feedback index m_max."""
    return focal_point(cfg, traj, m_max).angle_rad


def invert_distance(cfg: SystemConfig, traj: TrajectorySpec, theta_hat: float, m_max: int) -> float:
    """Range of the focal point addressed by m_max on a fixed-angle sweep."""
    if abs(traj.start.angle_rad - theta_hat) > 1e-9 or abs(traj.end.angle_rad - theta_hat) > 1e-9:
        raise ValueError("trajectory is not a fixed-angle sweep at theta_hat")
    return focal_point(cfg, traj, m_max).range_m


def _resolve_noise_var(u: np.ndarray, noise_var, snr_linear) -> float:
    """Exactly one of noise_var / snr_linear selects the stage's noise level."""
    if (noise_var is None) == (snr_linear is None):
        raise ValueError("pass exactly one of noise_var or snr_linear")
    if noise_var is not None:
        return float(noise_var)
    mean_power = float(np.mean(np.abs(u) ** 2))
    if mean_power == 0:
        raise ValueError("all-zero signal: cannot calibrate SNR")
    return mean_power / float(snr_linear)


def cbs_angle_stage(
    cfg: SystemConfig,
    region: SearchRegion,
    ue_pos: PolarPosition,
    vr: VisibilityRegion,
    noise_var: float | None = None,
    rng=None,
    *,
    snr_linear: float | None = None,
) -> tuple[float, ReceivedFrame]:
    """Angle sweep: strongest subcarrier's focal angle is the estimate."""
    traj = angle_sweep_trajectory(region)
    ttd = ttd_from_trajectory(cfg, traj)
    u = noiseless_signal(cfg, ue_pos, vr, ttd)
    frame = add_noise(u, _resolve_noise_var(u, noise_var, snr_linear), rng)
    m_max = int(np.argmax(np.abs(frame.samples))) + 1
    theta = invert_angle(cfg, traj, m_max)
    return float(np.clip(theta, region.theta_min_rad, region.theta_max_rad)), frame


def cbs_distance_stage(
    cfg: SystemConfig,
    region: SearchRegion,
    theta_hat: float,
    ue_pos: PolarPosition,
    vr: VisibilityRegion,
    noise_var: float | None = None,
    rng=None,
    *,
    snr_linear: float | None = None,
) -> tuple[float, ReceivedFrame]:
    """Range sweep at the estimated angle: strongest subcarrier's focal range."""
    traj = distance_sweep_trajectory(region, theta_hat)
    ttd = ttd_from_trajectory(cfg, traj)
    u = noiseless_signal(cfg, ue_pos, vr, ttd)
    frame = add_noise(u, _resolve_noise_var(u, noise_var, snr_linear), rng)
    m_max = int(np.argmax(np.abs(frame.samples))) + 1
    r = invert_distance(cfg, traj, theta_hat, m_max)
    return float(np.clip(r, region.r_min_m, region.r_max_m)), frame


def cbs(
    cfg: SystemConfig,
    region: SearchRegion,
    ue_pos: PolarPosition,
    vr: VisibilityRegion,
    noise_var: float | None = None,
    rng=None,
    *,
    snr_linear: float | None = None,
) -> LocalizationEstimate:
    """Two-sweep baseline: angle stage then distance stage."""
    theta, frame1 = cbs_angle_stage(
        cfg, region, ue_pos, vr, noise_var, rng, snr_linear=snr_linear
    )
    r, frame2 = cbs_distance_stage(
        cfg, region, theta, ue_pos, vr, noise_var, rng, snr_linear=snr_linear
    )
    records = (
        StageRecord("angle-sweep", int(np.argmax(np.abs(frame1.samples))) + 1, frame1, theta),
        StageRecord("distance-sweep", int(np.argmax(np.abs(frame2.samples))) + 1, frame2, r),
    )
    return LocalizationEstimate(
        angle_rad=theta, range_m=r, sweeps_used=2, stage_diagnostics=records
    )


def _group_powers(samples: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-group feedback metric: sum of |y_m| over the group's subcarriers."""
    return np.abs(samples).reshape(n_groups, -1).sum(axis=1)


def cbs_bt(
    cfg: SystemConfig,
    region: SearchRegion,
    params: CbsBtParams,
    ue_pos: PolarPosition,
    vr: VisibilityRegion,
    noise_var: float | None = None,
    rng=None,
    *,
    snr_linear: float | None = None,
) -> LocalizationEstimate:
    """Three-stage localization: angle sweep, grouped angle refine, bracket range search.

    Stage II spreads the configured group count over a window around the stage-I
    angle, clipped to the region, ordered from the upper edge down. Stage III
    repeatedly lays groups along the current range bracket and shrinks it to
    the winner's neighbors (the winner's own focus when it sits at an edge),
    stopping after max_iters sweeps or when the bracket is narrower than the
    stop threshold. Ties always break toward the lower group index.
    """
    for groups in (params.groups_angle, params.groups_distance):
        if cfg.n_subcarriers % groups != 0:
            raise ValueError(f"M={cfg.n_subcarriers} not divisible by {groups} groups")

    theta1, frame1 = cbs_angle_stage(
        cfg, region, ue_pos, vr, noise_var, rng, snr_linear=snr_linear
    )
    records = [
        StageRecord("angle-sweep", int(np.argmax(np.abs(frame1.samples))) + 1, frame1, theta1)
    ]

    # Stage II: grouped beams fan out over the clipped window, upper edge first.
    theta_hi = min(region.theta_max_rad, theta1 + params.angle_window_rad)
    theta_lo = max(region.theta_min_rad, theta1 - params.angle_window_rad)
    angles = np.linspace(theta_hi, theta_lo, params.groups_angle)
    targets = [PolarPosition(region.r_min_m, float(a)) for a in angles]
    plan = grouped_plan(cfg, targets, cfg.n_subcarriers // params.groups_angle)
    u = noiseless_signal(cfg, ue_pos, vr, plan)
    frame2 = add_noise(u, _resolve_noise_var(u, noise_var, snr_linear), rng)
    l_max = int(np.argmax(_group_powers(frame2.samples, params.groups_angle)))
    theta2 = float(angles[l_max])
    records.append(StageRecord("angle-refine", l_max + 1, frame2, theta2))

    # Stage III: shrink a range bracket at the refined angle.
    r_start, r_end = region.r_min_m, region.r_max_m
    r_hat = (r_start + r_end) / 2
    iters = 0
    while iters < params.max_iters and (r_end - r_start) >= params.stop_threshold_m:
        radii = np.linspace(r_start, r_end, params.groups_distance)
        targets = [PolarPosition(float(r), theta2) for r in radii]
        plan = grouped_plan(cfg, targets, cfg.n_subcarriers // params.groups_distance)
        u = noiseless_signal(cfg, ue_pos, vr, plan)
        frame = add_noise(u, _resolve_noise_var(u, noise_var, snr_linear), rng)
        l2 = int(np.argmax(_group_powers(frame.samples, params.groups_distance)))
        r_hat = float(radii[l2])
        r_start = float(radii[max(l2 - 1, 0)])
        r_end = float(radii[min(l2 + 1, params.groups_distance - 1)])
        iters += 1
        records.append(StageRecord(f"distance-refine-{iters}", l2 + 1, frame, r_hat))

    r_final, theta_final = region.clamp(r_hat, theta2)
    return LocalizationEstimate(
        angle_rad=theta_final,
        range_m=r_final,
        sweeps_used=2 + iters,
        stage_diagnostics=tuple(records),
    )
