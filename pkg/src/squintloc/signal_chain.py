"""Received-signal synthesis per subcarrier, noise generation, SNR calibration.

A downlink frame is one pilot per subcarrier: the user observes
y_m = h_m^H w_m s + n_m, with h the masked near-field channel, w the
beamforming weights of the active plan, and n circularly symmetric complex
Gaussian noise.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .array_channel import (
    PolarPosition,
    SystemConfig,
    VisibilityRegion,
    path_gains,
    phase_ramp,
    taylor_distances,
    vr_mask,
)
from .beamforming import GroupedBeamPlan, TtdConfig, weight_matrix


@dataclass(frozen=True)
class ReceivedFrame:
    """One OFDM pilot frame at the user: M complex samples plus noise bookkeeping."""

    samples: np.ndarray
    noise_var: float
    pilot: complex = 1.0 + 0.0j

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("samples must be a 1-D complex vector")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")


def noiseless_signal(
    cfg: SystemConfig,
    pos: PolarPosition,
    vr: VisibilityRegion,
    weights,
    pilot: complex = 1.0,
) -> np.ndarray:
    """Noise-free received samples u_m = h_m^H w_m * pilot for all M subcarriers.

    weights may be a TtdConfig, a GroupedBeamPlan, a single length-N vector, or
    an explicit (M, N) matrix.
    """
    mask = vr_mask(cfg, vr)
    dist = taylor_distances(cfg, pos.range_m, pos.angle_rad)
    betas = path_gains(cfg, pos.range_m)
    freqs = cfg.subcarrier_frequencies
    # h_{m,n} = beta_m e^{-j 2 pi f_m r^(n) / c} b_n, conjugated inside h^H w.
    # For delay-line beamformers the channel phase and the weight phase fold
    # into a single exponential, halving the cost of the (M, N) synthesis.
    if isinstance(weights, TtdConfig):
        comb = _fused_rows(cfg, freqs, dist, weights) @ mask
    elif isinstance(weights, GroupedBeamPlan):
        comb = np.empty(cfg.n_subcarriers, dtype=complex)
        for idx, ttd in enumerate(weights.ttds):
            rows = slice(idx * weights.group_size, (idx + 1) * weights.group_size)
            comb[rows] = _fused_rows(cfg, freqs[rows], dist, ttd) @ mask
    else:
        w = weight_matrix(cfg, weights)
        phase = phase_ramp(freqs, dist / cfg.lightspeed_mps, 0.0)
        comb = (phase * w) @ mask
    return betas * comb * pilot


def _fused_rows(cfg: SystemConfig, freqs: np.ndarray, dist: np.ndarray, ttd: TtdConfig):
    """Rows of (channel phase x TTD weight) as one complex exponential."""
    a = dist / cfg.lightspeed_mps - ttd.delays
    b = ttd.base_freq_hz * ttd.delays - ttd.phases
    return phase_ramp(freqs, a, b) / np.sqrt(cfg.n_antennas)


def add_noise(u: np.ndarray, noise_var: float, rng, pilot: complex = 1.0) -> ReceivedFrame:
    """Add circularly symmetric complex Gaussian noise of the given variance.

    rng is an integer seed or a numpy Generator; passing a Generator lets
    successive stages of one trial consume a single reproducible stream.
    noise_var=0 returns the samples unchanged without consuming the stream.
    """
    u = np.asarray(u, dtype=complex)
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    if noise_var == 0:
        return ReceivedFrame(samples=u.copy(), noise_var=0.0, pilot=pilot)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    scale = np.sqrt(noise_var / 2)
    noise = scale * (gen.standard_normal(u.size) + 1j * gen.standard_normal(u.size))
    return ReceivedFrame(samples=u + noise, noise_var=float(noise_var), pilot=pilot)


def noise_var_for_snr(
    cfg: SystemConfig,
    pos: PolarPosition,
    vr: VisibilityRegion,
    weights,
    snr_linear: float,
    pilot: complex = 1.0,
) -> float:
    """Noise variance that sets the frame-average per-subcarrier SNR to the target.

    sigma^2 = mean_m |h_m^H w_m s|^2 / snr_linear.
    """
    if snr_linear <= 0:
        raise ValueError("snr_linear must be positive")
    u = noiseless_signal(cfg, pos, vr, weights, pilot)
    mean_power = float(np.mean(np.abs(u) ** 2))
    if mean_power == 0:
        raise ValueError("all-zero signal: no visible antennas under these weights")
    return mean_power / snr_linear


def shaped_noise_vars(
    u: np.ndarray,
    snr_linear: float,
    n_subcarriers_ref: int | None = None,
    dynamic_range_floor: float = 1e-6,
) -> np.ndarray:
    """Per-subcarrier noise variances that equalize SNR across the band.

    sigma_m^2 tracks |u_m|^2 so every subcarrier sees the same SNR, floored at
    dynamic_range_floor times the frame-mean power (a receiver cannot resolve
    arbitrarily deep nulls; 1e-6 is a 60 dB dynamic range). When the frame has
    fewer subcarriers than n_subcarriers_ref over the same band, each one is
    proportionally wider and collects proportionally more noise power, so the
    variances scale by n_subcarriers_ref / len(u).
    """
    if snr_linear <= 0:
        raise ValueError("snr_linear must be positive")
    if dynamic_range_floor < 0:
        raise ValueError("dynamic_range_floor must be >= 0")
    power = np.abs(np.asarray(u, dtype=complex)) ** 2
    mean_power = float(np.mean(power))
    if mean_power == 0:
        raise ValueError("all-zero signal: cannot calibrate SNR")
    ref = len(power) if n_subcarriers_ref is None else n_subcarriers_ref
    return np.maximum(power, dynamic_range_floor * mean_power) * (ref / len(power)) / snr_linear


def write_frame_csv(frame: ReceivedFrame, path) -> None:
    """Serialize a frame as CSV rows (m, re, im) for export and debugging."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "re", "im"])
        for m, sample in enumerate(frame.samples, start=1):
            writer.writerow([m, repr(float(sample.real)), repr(float(sample.imag))])
