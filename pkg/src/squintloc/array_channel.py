"""Array geometry, subcarrier grid, spherical-wave responses, and LoS channels.

The model is a uniform linear array of N antennas on the y-axis, centered at
the origin, serving single-antenna users in the near field. OFDM occupies a
band of width B around the carrier, and spatial non-stationarity is modeled
by masking antennas outside a user's visibility region.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class SystemConfig:
    """Array and OFDM parameters shared by every formula in the package.

    spacing_m defaults to half the carrier wavelength when omitted.
    """

    n_antennas: int = 512
    carrier_hz: float = 100e9
    bandwidth_hz: float = 6e9
    n_subcarriers: int = 2048
    spacing_m: float | None = None
    lightspeed_mps: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError(f"n_antennas must be >= 2, got {self.n_antennas}")
        if self.n_subcarriers < 1:
            raise ValueError(f"n_subcarriers must be >= 1, got {self.n_subcarriers}")
        if not self.bandwidth_hz < self.carrier_hz:
            raise ValueError("bandwidth_hz must be smaller than carrier_hz")
        if self.spacing_m is None:
            wavelength = self.lightspeed_mps / self.carrier_hz
            object.__setattr__(self, "spacing_m", wavelength / 2)
        if self.spacing_m <= 0:
            raise ValueError("spacing_m must be positive")

    @cached_property
    def subcarrier_frequencies(self) -> np.ndarray:
        """All M subcarrier frequencies in Hz, strictly increasing, symmetric about the carrier."""
        m = np.arange(1, self.n_subcarriers + 1)
        return self.carrier_hz + (self.bandwidth_hz / self.n_subcarriers) * (
            m - 1 - (self.n_subcarriers - 1) / 2
        )

    @cached_property
    def centered_indices(self) -> np.ndarray:
        """n'_n for all antennas: (2n - N - 1)/2, symmetric in [-(N-1)/2, (N-1)/2]."""
        n = np.arange(1, self.n_antennas + 1)
        return (2 * n - self.n_antennas - 1) / 2.0

    @property
    def first_subcarrier_hz(self) -> float:
        return float(self.subcarrier_frequencies[0])

    @property
    def last_subcarrier_hz(self) -> float:
        return float(self.subcarrier_frequencies[-1])

    @property
    def aperture_m(self) -> float:
        return self.n_antennas * self.spacing_m


@dataclass(frozen=True)
class PolarPosition:
    """(r, theta) of a user or a beam focus, theta measured from broadside."""

    range_m: float
    angle_rad: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError(f"range_m must be positive, got {self.range_m}")
        if not abs(self.angle_rad) < np.pi / 2:
            raise ValueError(f"angle_rad must lie in (-pi/2, pi/2), got {self.angle_rad}")

    def to_xy(self) -> tuple[float, float]:
        return (
            self.range_m * np.cos(self.angle_rad),
            self.range_m * np.sin(self.angle_rad),
        )


@dataclass(frozen=True)
class VisibilityRegion:
    """Set of visible sub-array indices (1-based) out of n_subarrays equal blocks."""

    n_subarrays: int = 4
    visible: frozenset = field(default_factory=lambda: frozenset({1, 2, 3, 4}))

    def __post_init__(self):
        object.__setattr__(self, "visible", frozenset(self.visible))
        if self.n_subarrays < 1:
            raise ValueError("n_subarrays must be >= 1")
        if not self.visible:
            raise ValueError("visible set must be non-empty")
        if not all(1 <= i <= self.n_subarrays for i in self.visible):
            raise ValueError(f"visible indices must lie in [1, {self.n_subarrays}]")

    @classmethod
    def stationary(cls, n_subarrays: int = 4) -> "VisibilityRegion":
        return cls(n_subarrays, frozenset(range(1, n_subarrays + 1)))

    @property
    def is_stationary(self) -> bool:
        return len(self.visible) == self.n_subarrays


@dataclass(frozen=True)
class ChannelVector:
    """Channel h for one subcarrier; entries are zero outside the visibility region."""

    entries: np.ndarray
    subcarrier_index: int


def subcarrier_frequency(cfg: SystemConfig, m: int) -> float:
    """Frequency of the m-th subcarrier (1-based), f_c + (B/M)(m - 1 - (M-1)/2)."""
    if not 1 <= m <= cfg.n_subcarriers:
        raise IndexError(f"subcarrier index {m} outside [1, {cfg.n_subcarriers}]")
    return float(cfg.subcarrier_frequencies[m - 1])


def centered_antenna_index(cfg: SystemConfig, n: int) -> float:
    """Signed element offset n'_n = (2n - N - 1)/2 for the n-th antenna (1-based)."""
    if not 1 <= n <= cfg.n_antennas:
        raise IndexError(f"antenna index {n} outside [1, {cfg.n_antennas}]")
    return float(cfg.centered_indices[n - 1])


def exact_distance(cfg: SystemConfig, pos: PolarPosition, n) -> float | np.ndarray:
    """Euclidean distance from antenna n to the position; n may be an index array."""
    idx = np.asarray(cfg.centered_indices[np.asarray(n) - 1])
    x = pos.range_m * np.cos(pos.angle_rad)
    y = pos.range_m * np.sin(pos.angle_rad)
    d = np.sqrt(x**2 + (y - idx * cfg.spacing_m) ** 2)
    return float(d) if np.isscalar(n) else d


def taylor_distance(cfg: SystemConfig, pos: PolarPosition, n) -> float | np.ndarray:
    """Second-order expansion of exact_distance in the element offset; the channel model."""
    idx = np.asarray(cfg.centered_indices[np.asarray(n) - 1])
    d = _taylor(pos.range_m, pos.angle_rad, idx, cfg.spacing_m)
    return float(d) if np.isscalar(n) else d


def taylor_distances(cfg: SystemConfig, range_m: float, angle_rad: float) -> np.ndarray:
    """taylor_distance for every antenna at once; the hot path for beam synthesis."""
    return _taylor(range_m, angle_rad, cfg.centered_indices, cfg.spacing_m)


def _taylor(r, theta, idx, spacing):
    return r - idx * spacing * np.sin(theta) + idx**2 * spacing**2 * np.cos(theta) ** 2 / (2 * r)


def path_gain(cfg: SystemConfig, r: float, m: int) -> float:
    """Free-space amplitude beta = c/(4 pi f_m r), common across antennas."""
    if r <= 0:
        raise ValueError(f"range must be positive, got {r}")
    return cfg.lightspeed_mps / (4 * np.pi * subcarrier_frequency(cfg, m) * r)


def path_gains(cfg: SystemConfig, r: float) -> np.ndarray:
    """path_gain for every subcarrier at once."""
    if r <= 0:
        raise ValueError(f"range must be positive, got {r}")
    return cfg.lightspeed_mps / (4 * np.pi * cfg.subcarrier_frequencies * r)


def phase_ramp(freqs: np.ndarray, slope_s: np.ndarray, offset_cycles: np.ndarray) -> np.ndarray:
    """Unit phasors exp(j 2 pi (f_m * slope_n + offset_n)) as an (M, N) matrix.

    freqs must be evenly spaced (subcarrier grids always are); the matrix is
    then geometric along the frequency axis, so each row is the previous one
    times a fixed per-antenna ratio.  One trig row plus M-1 vector multiplies
    is an order of magnitude cheaper than M*N complex exponentials.
    """
    f = np.asarray(freqs, dtype=float)
    slope_s = np.asarray(slope_s, dtype=float)
    offset_cycles = np.broadcast_to(np.asarray(offset_cycles, dtype=float), slope_s.shape)
    out = np.empty((f.size, slope_s.size), dtype=complex)
    out[0] = np.exp(2j * np.pi * (f[0] * slope_s + offset_cycles))
    if f.size > 1:
        step = (f[-1] - f[0]) / (f.size - 1)
        ratio = np.exp(2j * np.pi * (step * slope_s))
        for m in range(1, f.size):
            np.multiply(out[m - 1], ratio, out=out[m])
    return out


def array_response(cfg: SystemConfig, pos: PolarPosition, m: int) -> np.ndarray:
    """Near-field steering vector (1/sqrt(N)) exp(-j 2 pi (f_m/c) r^(n))."""
    f = subcarrier_frequency(cfg, m)
    dist = taylor_distances(cfg, pos.range_m, pos.angle_rad)
    return np.exp(-2j * np.pi * (f / cfg.lightspeed_mps) * dist) / np.sqrt(cfg.n_antennas)


def vr_mask(cfg: SystemConfig, vr: VisibilityRegion) -> np.ndarray:
    """Binary antenna mask: entry n is 1 iff ceil(n*N_s/N) is a visible sub-array."""
    if cfg.n_antennas % vr.n_subarrays != 0:
        raise ValueError(
            f"n_antennas={cfg.n_antennas} not divisible by n_subarrays={vr.n_subarrays}"
        )
    n = np.arange(1, cfg.n_antennas + 1)
    subarray = -(-n * vr.n_subarrays // cfg.n_antennas)  # ceil division
    return np.isin(subarray, list(vr.visible)).astype(float)


def channel(cfg: SystemConfig, pos: PolarPosition, vr: VisibilityRegion, m: int) -> ChannelVector:
    """LoS channel h = sqrt(N) beta a(pos, f_m) masked by the visibility region."""
    beta = path_gain(cfg, pos.range_m, m)
    a = array_response(cfg, pos, m)
    h = np.sqrt(cfg.n_antennas) * beta * a * vr_mask(cfg, vr)
    return ChannelVector(entries=h, subcarrier_index=m)
