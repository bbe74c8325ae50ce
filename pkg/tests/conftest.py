"""Shared fixtures.

Most module tests run on a deliberately small array/subcarrier grid so the
whole suite stays fast; the acceptance tests build the full-size system
themselves.
"""

from __future__ import annotations

import numpy as np
import pytest

from squintloc.array_channel import PolarPosition, SystemConfig, VisibilityRegion
from squintloc.localization import CbsBtParams, SearchRegion


@pytest.fixture(scope="session")
def small_cfg() -> SystemConfig:
    """A 32-antenna, 64-subcarrier system that keeps per-test cost tiny."""
    return SystemConfig(
        n_antennas=32,
        carrier_hz=100e9,
        bandwidth_hz=6e9,
        n_subcarriers=64,
    )


@pytest.fixture(scope="session")
def full_cfg() -> SystemConfig:
    """The default full-size system (512 antennas, 2048 subcarriers)."""
    return SystemConfig()


@pytest.fixture(scope="session")
def region() -> SearchRegion:
    return SearchRegion()


@pytest.fixture(scope="session")
def stationary_vr() -> VisibilityRegion:
    return VisibilityRegion.stationary()


@pytest.fixture(scope="session")
def small_params() -> CbsBtParams:
    """Beam-training parameters sized for the 64-subcarrier fixture."""
    return CbsBtParams(groups_angle=16, groups_distance=8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mid_position() -> PolarPosition:
    return PolarPosition(range_m=15.0, angle_rad=0.2)
