"""Phase-shifter and TTD-line beamformers with controllable beam squint.

A phase-shifter front end applies one frequency-flat weight vector to every
subcarrier, so the focus drifts across the band. TTD lines add a per-antenna
delay whose phase grows linearly in frequency; choosing phases and delays from
a start/end position pair makes the per-subcarrier foci sweep a chosen
trajectory instead. Grouped plans reuse the same hardware model to aim blocks
of adjacent subcarriers at independent targets.
"""

from dataclasses import dataclass

import numpy as np

from .array_channel import (
    PolarPosition,
    SystemConfig,
    array_response,
    phase_ramp,
    subcarrier_frequency,
    taylor_distances,
)


@dataclass(frozen=True)
class TrajectorySpec:
    """Focus of the first subcarrier (start) and of the last subcarrier (end)."""

    start: PolarPosition
    end: PolarPosition


@dataclass(frozen=True)
class TtdConfig:
    """Per-antenna phase-shifter values (cycles) and TTD delays (seconds).

    base_freq_hz is the frequency at which the delay term contributes nothing;
    factories normalize delays so their minimum is exactly zero, which shifts
    every weight vector by a subcarrier-global phase and nothing else.
    """

    phases: np.ndarray
    delays: np.ndarray
    base_freq_hz: float

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        delays = np.asarray(self.delays, dtype=float)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "delays", delays)
        if phases.ndim != 1 or phases.shape != delays.shape:
            raise ValueError("phases and delays must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(phases)) and np.all(np.isfinite(delays))):
            raise ValueError("phases and delays must be finite")
        if np.any(delays < 0):
            raise ValueError("delays must be non-negative (normalize the global offset)")


@dataclass(frozen=True)
class GroupedBeamPlan:
    """L groups of group_size adjacent subcarriers, group l aimed at targets[l].

    Each group carries its own TtdConfig whose base frequency is the first
    subcarrier of the group, so in-group squint is fully compensated.
    """

    group_size: int
    targets: tuple
    ttds: tuple

    def __post_init__(self):
        if len(self.targets) != len(self.ttds):
            raise ValueError("one TtdConfig per target required")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")

    @property
    def n_groups(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class GainMap:
    """|a(r, theta, f_m)^H w| sampled on a polar grid, plus the argmax cell."""

    values: np.ndarray
    r_values: np.ndarray
    theta_values: np.ndarray
    peak: PolarPosition
    peak_indices: tuple


def ps_beamformer(cfg: SystemConfig, focus: PolarPosition) -> np.ndarray:
    """Frequency-flat weights matched to the focus at the first subcarrier.

    The same vector serves every subcarrier; the resulting focus drift across
    the band is the beam squint the TTD configurations exist to control.
    """
    return array_response(cfg, focus, 1)


def _span_hz(cfg: SystemConfig, literal_bandwidth: bool) -> float:
    if literal_bandwidth:
        return cfg.bandwidth_hz
    return cfg.last_subcarrier_hz - cfg.first_subcarrier_hz


def ttd_from_trajectory(
    cfg: SystemConfig, traj: TrajectorySpec, literal_bandwidth: bool = False
) -> TtdConfig:
    """Phases and delays that sweep the per-subcarrier focus from start to end.

    Phases match the first subcarrier to the start position; delays are chosen
    so the last subcarrier focuses on the end position. With
    literal_bandwidth=True the delay denominator is the nominal bandwidth B
    instead of f_M - f_1; the last focus then lands slightly short of the end.
    """
    if cfg.n_subcarriers < 2:
        raise ValueError("trajectory spreading needs at least 2 subcarriers")
    c = cfg.lightspeed_mps
    f1 = cfg.first_subcarrier_hz
    fM = cfg.last_subcarrier_hz
    span = _span_hz(cfg, literal_bandwidth)
    r_start = taylor_distances(cfg, traj.start.range_m, traj.start.angle_rad)
    r_end = taylor_distances(cfg, traj.end.range_m, traj.end.angle_rad)
    phases = f1 * r_start / c
    delays = fM * r_end / (c * span) - phases / span
    delays = delays - delays.min()
    return TtdConfig(phases=phases, delays=delays, base_freq_hz=f1)


def ttd_weights(cfg: SystemConfig, ttd: TtdConfig, m: int) -> np.ndarray:
    """Weight vector of subcarrier m: (1/sqrt(N)) e^{-j2pi phi_n} e^{-j2pi (f_m - base) t_n}."""
    f_offset = subcarrier_frequency(cfg, m) - ttd.base_freq_hz
    cycles = ttd.phases + f_offset * ttd.delays
    return np.exp(-2j * np.pi * cycles) / np.sqrt(cfg.n_antennas)


def ttd_weight_matrix(cfg: SystemConfig, ttd: TtdConfig) -> np.ndarray:
    """Weights for all subcarriers at once, shape (M, N)."""
    offset = ttd.base_freq_hz * ttd.delays - ttd.phases
    return phase_ramp(cfg.subcarrier_frequencies, -ttd.delays, offset) / np.sqrt(cfg.n_antennas)


def grouped_weight_matrix(cfg: SystemConfig, plan: GroupedBeamPlan) -> np.ndarray:
    """Weights for all subcarriers under a grouped plan, shape (M, N)."""
    if plan.group_size * plan.n_groups != cfg.n_subcarriers:
        raise ValueError("plan does not cover the subcarrier grid")
    n = cfg.n_antennas
    freqs = cfg.subcarrier_frequencies
    out = np.empty((cfg.n_subcarriers, n), dtype=complex)
    for l, ttd in enumerate(plan.ttds):
        rows = slice(l * plan.group_size, (l + 1) * plan.group_size)
        offset = ttd.base_freq_hz * ttd.delays - ttd.phases
        out[rows] = phase_ramp(freqs[rows], -ttd.delays, offset) / np.sqrt(n)
    return out


def weight_matrix(cfg: SystemConfig, weights) -> np.ndarray:
    """Resolve any supported weights description to an explicit (M, N) matrix.

    Accepts a TtdConfig, a GroupedBeamPlan, a single length-N vector applied to
    every subcarrier (the phase-shifter case), or an (M, N) matrix as-is.
    """
    if isinstance(weights, TtdConfig):
        return ttd_weight_matrix(cfg, weights)
    if isinstance(weights, GroupedBeamPlan):
        return grouped_weight_matrix(cfg, weights)
    w = np.asarray(weights, dtype=complex)
    if w.ndim == 1:
        if w.shape[0] != cfg.n_antennas:
            raise ValueError(f"weight vector length {w.shape[0]} != N={cfg.n_antennas}")
        return np.broadcast_to(w, (cfg.n_subcarriers, cfg.n_antennas))
    if w.shape != (cfg.n_subcarriers, cfg.n_antennas):
        raise ValueError(f"weight matrix shape {w.shape} != (M, N)")
    return w


def focal_point(
    cfg: SystemConfig, traj: TrajectorySpec, m: int, literal_bandwidth: bool = False
) -> PolarPosition:
    """Predicted maximum-gain position of subcarrier m under the trajectory.

    The angle is the arcsin of a two-coefficient blend of the endpoint sines;
    the range is the matching harmonic blend with cos^2 correction. m=1 and
    m=M reproduce the trajectory endpoints exactly (default denominator).
    """
    f = subcarrier_frequency(cfg, m)
    f1 = cfg.first_subcarrier_hz
    fM = cfg.last_subcarrier_hz
    span = _span_hz(cfg, literal_bandwidth)
    if span <= 0:
        raise ValueError("focal prediction needs at least 2 subcarriers")
    a_m = f1 * (fM - f) / (span * f)
    c_m = fM * (f - f1) / (span * f)
    start, end = traj.start, traj.end
    sin_blend = a_m * np.sin(start.angle_rad) + c_m * np.sin(end.angle_rad)
    if abs(sin_blend) > 1:
        raise ValueError(f"focal angle blend {sin_blend} outside [-1, 1]")
    theta = np.arcsin(sin_blend)
    inv_r = (
        a_m * np.cos(start.angle_rad) ** 2 / start.range_m
        + c_m * np.cos(end.angle_rad) ** 2 / end.range_m
    ) / np.cos(theta) ** 2
    if inv_r <= 0:
        raise ValueError("focal range blend is not positive")
    return PolarPosition(range_m=1.0 / inv_r, angle_rad=float(theta))


def grouped_plan(cfg: SystemConfig, targets, group_size: int) -> GroupedBeamPlan:
    """Aim each block of group_size adjacent subcarriers at its own target.

    Group l spans subcarriers (l-1)*group_size+1 .. l*group_size with base
    frequency at the group's first subcarrier; phases and delays both derive
    from the target's per-antenna distances, so every subcarrier of the group
    is an exact matched beam to the target. group_size=1 needs no delays.
    """
    targets = tuple(targets)
    if not targets:
        raise ValueError("at least one target required")
    if len(targets) * group_size != cfg.n_subcarriers:
        raise ValueError(
            f"{len(targets)} groups of {group_size} do not cover M={cfg.n_subcarriers}"
        )
    c = cfg.lightspeed_mps
    ttds = []
    for l, target in enumerate(targets):
        base = subcarrier_frequency(cfg, 1 + l * group_size)
        dist = taylor_distances(cfg, target.range_m, target.angle_rad)
        phases = base * dist / c
        if group_size > 1:
            delays = dist / c
            delays = delays - delays.min()
        else:
            delays = np.zeros_like(dist)
        ttds.append(TtdConfig(phases=phases, delays=delays, base_freq_hz=base))
    return GroupedBeamPlan(group_size=group_size, targets=targets, ttds=tuple(ttds))


def gain_map(
    cfg: SystemConfig,
    weights: np.ndarray,
    m: int,
    r_values: np.ndarray,
    theta_values: np.ndarray,
) -> GainMap:
    """Brute-force |a(r, theta, f_m)^H w| over a polar grid.

    Evaluates the stationary array response (no visibility mask) row by row to
    keep memory flat; ties in the argmax resolve to the lowest flat index.
    """
    r_values = np.asarray(r_values, dtype=float)
    theta_values = np.asarray(theta_values, dtype=float)
    if r_values.size == 0 or theta_values.size == 0:
        raise ValueError("gain map grid must be non-empty")
    w = np.asarray(weights, dtype=complex)
    if w.shape != (cfg.n_antennas,):
        raise ValueError("weights must be a length-N vector for one subcarrier")
    f = subcarrier_frequency(cfg, m)
    wavenumber = 2 * np.pi * f / cfg.lightspeed_mps
    idx = cfg.centered_indices
    spacing = cfg.spacing_m
    sin_t = np.sin(theta_values)[:, None]
    cos2_t = np.cos(theta_values)[:, None] ** 2
    w_conj = np.conj(w) / np.sqrt(cfg.n_antennas)
    values = np.empty((r_values.size, theta_values.size))
    for i, r in enumerate(r_values):
        dist = r - idx[None, :] * spacing * sin_t + idx[None, :] ** 2 * spacing**2 * cos2_t / (
            2 * r
        )
        values[i] = np.abs(np.exp(-1j * wavenumber * dist) @ w_conj)
    flat = int(np.argmax(values))
    i, j = np.unravel_index(flat, values.shape)
    peak = PolarPosition(range_m=float(r_values[i]), angle_rad=float(theta_values[j]))
    return GainMap(
        values=values,
        r_values=r_values,
        theta_values=theta_values,
        peak=peak,
        peak_indices=(int(i), int(j)),
    )
