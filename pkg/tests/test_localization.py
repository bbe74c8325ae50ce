"""Beam-sweep localizer tests.

Frozen numeric pins were measured on the full-size system with noise-free
frames; they guard against regressions in the sweep, feedback, and inversion
chain. Strict xfails document idealized discrimination properties that the
measured physics does not deliver: a wideband sweep's winning subcarrier can
sit tens of indices away from the nearest focal point once the user leaves
the focal arc, and the refinement stages inherit that angle error.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squintloc.array_channel import PolarPosition, SystemConfig, VisibilityRegion
from squintloc.beamforming import focal_point, grouped_plan, ttd_from_trajectory
from squintloc.localization import (
    CbsBtParams,
    LocalizationEstimate,
    SearchRegion,
    angle_sweep_trajectory,
    cbs,
    cbs_angle_stage,
    cbs_bt,
    cbs_distance_stage,
    distance_sweep_trajectory,
    invert_angle,
    invert_distance,
)
from squintloc.signal_chain import noiseless_signal


def _xy_error(est: LocalizationEstimate, pos: PolarPosition) -> float:
    ex = est.range_m * np.cos(est.angle_rad) - pos.range_m * np.cos(pos.angle_rad)
    ey = est.range_m * np.sin(est.angle_rad) - pos.range_m * np.sin(pos.angle_rad)
    return float(np.hypot(ex, ey))


class TestSearchRegion:
    def test_defaults(self, region):
        assert region.r_min_m == 5.0
        assert region.r_max_m == 50.0
        assert region.theta_min_rad == pytest.approx(-np.pi / 3)
        assert region.theta_max_rad == pytest.approx(np.pi / 3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"r_min_m": 0.0},
            {"r_min_m": -1.0},
            {"r_min_m": 50.0, "r_max_m": 50.0},
            {"theta_min_rad": 0.5, "theta_max_rad": 0.4},
            {"theta_min_rad": -2.0},
            {"theta_max_rad": 2.0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SearchRegion(**kwargs)

    def test_clamp(self, region):
        assert region.clamp(3.0, 0.0) == (5.0, 0.0)
        assert region.clamp(60.0, 2.0) == (50.0, pytest.approx(np.pi / 3))
        assert region.clamp(20.0, -0.1) == (20.0, -0.1)


class TestCbsBtParams:
    def test_defaults(self):
        p = CbsBtParams()
        assert p.groups_angle == 64
        assert p.groups_distance == 16
        assert p.max_iters == 5
        assert p.stop_threshold_m == 0.5
        assert p.angle_window_rad == pytest.approx(np.deg2rad(1.0))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"groups_angle": 1},
            {"groups_distance": 1},
            {"max_iters": 0},
            {"stop_threshold_m": 0.0},
            {"angle_window_rad": 0.0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            CbsBtParams(**kwargs)


class TestTrajectories:
    def test_angle_sweep_endpoints(self, region):
        traj = angle_sweep_trajectory(region)
        assert traj.start.range_m == region.r_min_m
        assert traj.end.range_m == region.r_min_m
        assert traj.start.angle_rad == region.theta_min_rad
        assert traj.end.angle_rad == region.theta_max_rad

    def test_distance_sweep_endpoints(self, region):
        traj = distance_sweep_trajectory(region, 0.3)
        assert traj.start.range_m == region.r_min_m
        assert traj.end.range_m == region.r_max_m
        assert traj.start.angle_rad == 0.3
        assert traj.end.angle_rad == 0.3


class TestInversion:
    def test_invert_angle_is_focal_angle(self, small_cfg, region):
        traj = angle_sweep_trajectory(region)
        for m in (1, 17, small_cfg.n_subcarriers):
            assert invert_angle(small_cfg, traj, m) == focal_point(small_cfg, traj, m).angle_rad

    def test_invert_distance_is_focal_range(self, small_cfg, region):
        traj = distance_sweep_trajectory(region, 0.2)
        for m in (1, 30, small_cfg.n_subcarriers):
            assert invert_distance(small_cfg, traj, 0.2, m) == focal_point(
                small_cfg, traj, m
            ).range_m

    def test_invert_distance_rejects_mismatched_trajectory(self, small_cfg, region):
        traj = distance_sweep_trajectory(region, 0.2)
        with pytest.raises(ValueError):
            invert_distance(small_cfg, traj, 0.25, 3)
        with pytest.raises(ValueError):
            invert_distance(small_cfg, angle_sweep_trajectory(region), 0.0, 3)


class TestNoiseSelection:
    def test_exactly_one_noise_argument(self, small_cfg, region, stationary_vr):
        pos = PolarPosition(10.0, 0.1)
        with pytest.raises(ValueError):
            cbs(small_cfg, region, pos, stationary_vr)
        with pytest.raises(ValueError):
            cbs(small_cfg, region, pos, stationary_vr, noise_var=0.0, snr_linear=10.0)

    def test_snr_route_reproducible(self, small_cfg, region, stationary_vr):
        pos = PolarPosition(10.0, 0.1)
        a = cbs(
            small_cfg, region, pos, stationary_vr,
            rng=np.random.default_rng(5), snr_linear=100.0,
        )
        b = cbs(
            small_cfg, region, pos, stationary_vr,
            rng=np.random.default_rng(5), snr_linear=100.0,
        )
        assert a.angle_rad == b.angle_rad and a.range_m == b.range_m

    def test_stage_noise_variance_matches_frame_power(self, small_cfg, region, stationary_vr):
        pos = PolarPosition(10.0, 0.1)
        theta, frame = cbs_angle_stage(
            small_cfg, region, pos, stationary_vr,
            rng=np.random.default_rng(0), snr_linear=50.0,
        )
        ttd = ttd_from_trajectory(small_cfg, angle_sweep_trajectory(region))
        u = noiseless_signal(small_cfg, pos, stationary_vr, ttd)
        assert frame.noise_var == pytest.approx(float(np.mean(np.abs(u) ** 2)) / 50.0)


class TestCbsBaseline:
    def test_structure(self, small_cfg, region, stationary_vr):
        est = cbs(small_cfg, region, PolarPosition(12.0, 0.3), stationary_vr, noise_var=0.0)
        assert est.sweeps_used == 2
        assert [r.stage for r in est.stage_diagnostics] == ["angle-sweep", "distance-sweep"]
        for rec in est.stage_diagnostics:
            assert 1 <= rec.winner_index <= small_cfg.n_subcarriers
            assert rec.frame.samples.shape == (small_cfg.n_subcarriers,)
        assert region.theta_min_rad <= est.angle_rad <= region.theta_max_rad
        assert region.r_min_m <= est.range_m <= region.r_max_m

    def test_full_size_boresight_regression(self, full_cfg, region, stationary_vr):
        # frozen noise-free pins for a user at (15 m, 0 deg), all antennas lit
        est = cbs(full_cfg, region, PolarPosition(15.0, 0.0), stationary_vr, noise_var=0.0)
        assert np.rad2deg(est.angle_rad) == pytest.approx(0.009220, abs=1e-4)
        assert est.range_m == pytest.approx(14.973585, abs=1e-3)

    def test_full_size_partial_visibility_regression(self, full_cfg, region):
        # only the first quarter of the array lit: the effective aperture
        # center shifts, biasing both coordinates
        vr = VisibilityRegion(visible=frozenset({1}))
        est = cbs(full_cfg, region, PolarPosition(15.0, 0.0), vr, noise_var=0.0)
        assert np.rad2deg(est.angle_rad) == pytest.approx(0.251802, abs=1e-4)
        assert est.range_m == pytest.approx(19.300159, abs=1e-3)

    def test_distance_stage_uses_estimated_angle(self, small_cfg, region, stationary_vr):
        pos = PolarPosition(12.0, 0.3)
        theta, _ = cbs_angle_stage(small_cfg, region, pos, stationary_vr, noise_var=0.0)
        r, _ = cbs_distance_stage(small_cfg, region, theta, pos, stationary_vr, noise_var=0.0)
        est = cbs(small_cfg, region, pos, stationary_vr, noise_var=0.0)
        assert est.angle_rad == theta
        assert est.range_m == r


class TestCbsBtStages:
    def test_structure_and_convergence_regression(self, full_cfg, region, stationary_vr):
        est = cbs_bt(
            full_cfg, region, CbsBtParams(), PolarPosition(15.0, 0.0), stationary_vr,
            noise_var=0.0,
        )
        # the bracket shrinks by 2/(L2-1) per sweep: 45 -> 6 -> 0.8 -> 0.107,
        # crossing the 0.5 m stop width after three distance sweeps
        assert est.sweeps_used == 5
        assert [r.stage for r in est.stage_diagnostics] == [
            "angle-sweep",
            "angle-refine",
            "distance-refine-1",
            "distance-refine-2",
            "distance-refine-3",
        ]
        # frozen pins: the one-degree refinement window cannot recover from
        # the sweep stage's angle bias, so the range search lands far short
        assert np.rad2deg(est.angle_rad) == pytest.approx(0.913982, abs=1e-3)
        assert est.range_m == pytest.approx(7.053333, abs=1e-3)

    def test_group_counts_must_divide_band(self, small_cfg, region, stationary_vr):
        pos = PolarPosition(10.0, 0.0)
        with pytest.raises(ValueError):
            cbs_bt(
                small_cfg, region, CbsBtParams(groups_angle=7), pos, stationary_vr,
                noise_var=0.0,
            )
        with pytest.raises(ValueError):
            cbs_bt(
                small_cfg, region, CbsBtParams(groups_distance=7), pos, stationary_vr,
                noise_var=0.0,
            )

    def test_refined_angle_stays_inside_window_and_region(
        self, small_cfg, region, stationary_vr, small_params
    ):
        pos = PolarPosition(9.0, 0.45)
        est = cbs_bt(small_cfg, region, small_params, pos, stationary_vr, noise_var=0.0)
        stage1 = est.stage_diagnostics[0].estimate
        assert est.angle_rad <= min(region.theta_max_rad, stage1 + small_params.angle_window_rad) + 1e-12
        assert est.angle_rad >= max(region.theta_min_rad, stage1 - small_params.angle_window_rad) - 1e-12

    def test_sweep_budget(self, small_cfg, region, stationary_vr, small_params):
        est = cbs_bt(
            small_cfg, region, small_params, PolarPosition(25.0, -0.4), stationary_vr,
            noise_var=0.0,
        )
        assert 3 <= est.sweeps_used <= 2 + small_params.max_iters


class TestSweepDiscrimination:
    """Winner-index properties of the wideband angle sweep, full-size system."""

    def test_user_on_a_focal_point_wins_that_subcarrier(self, full_cfg, region, stationary_vr):
        traj = angle_sweep_trajectory(region)
        ttd = ttd_from_trajectory(full_cfg, traj)
        for m in (100, 500, 1024, 1600, 2000):
            fp = focal_point(full_cfg, traj, m)
            u = noiseless_signal(full_cfg, fp, stationary_vr, ttd)
            assert int(np.argmax(np.abs(u))) + 1 == m

    def test_on_arc_winner_within_sixty_indices_of_nearest_focus(
        self, full_cfg, region, stationary_vr
    ):
        # between foci the energy argmax can drift; the measured worst drift
        # on this grid is 47 subcarriers (about 2.8 degrees of focal sweep)
        traj = angle_sweep_trajectory(region)
        ttd = ttd_from_trajectory(full_cfg, traj)
        fangles = np.array(
            [focal_point(full_cfg, traj, m).angle_rad for m in range(1, full_cfg.n_subcarriers + 1)]
        )
        worst = 0
        for th in np.linspace(-50.0, 50.0, 16):
            pos = PolarPosition(region.r_min_m, np.deg2rad(th))
            u = noiseless_signal(full_cfg, pos, stationary_vr, ttd)
            m_win = int(np.argmax(np.abs(u)))
            m_near = int(np.argmin(np.abs(fangles - pos.angle_rad)))
            worst = max(worst, abs(m_win - m_near))
        assert worst <= 60

    @pytest.mark.xfail(
        strict=True,
        reason="the energy argmax is not always the nearest focal point; measured "
        "drift reaches 47 subcarriers on the focal arc itself",
    )
    def test_winner_always_nearest_focus(self, full_cfg, region, stationary_vr):
        traj = angle_sweep_trajectory(region)
        ttd = ttd_from_trajectory(full_cfg, traj)
        fangles = np.array(
            [focal_point(full_cfg, traj, m).angle_rad for m in range(1, full_cfg.n_subcarriers + 1)]
        )
        for th in np.linspace(-50.0, 50.0, 16):
            pos = PolarPosition(region.r_min_m, np.deg2rad(th))
            u = noiseless_signal(full_cfg, pos, stationary_vr, ttd)
            m_win = int(np.argmax(np.abs(u)))
            m_near = int(np.argmin(np.abs(fangles - pos.angle_rad)))
            assert m_win == m_near

    def test_distance_stage_error_bounded_by_focal_spacing(
        self, full_cfg, region, stationary_vr
    ):
        # with the true angle supplied, the winning subcarrier's focal range
        # stays within a dozen local inter-focus spacings of the true range
        # (brute-force spacing oracle from the focal map)
        worst_ratio = 0.0
        for th_deg in np.linspace(-50.0, 50.0, 5):
            theta = np.deg2rad(th_deg)
            traj = distance_sweep_trajectory(region, theta)
            ttd = ttd_from_trajectory(full_cfg, traj)
            franges = np.array(
                [
                    focal_point(full_cfg, traj, m).range_m
                    for m in range(1, full_cfg.n_subcarriers + 1)
                ]
            )
            for r in np.linspace(6.0, 45.0, 6):
                pos = PolarPosition(r, theta)
                u = noiseless_signal(full_cfg, pos, stationary_vr, ttd)
                m_win = int(np.argmax(np.abs(u)))
                m_near = int(np.argmin(np.abs(franges - r)))
                lo, hi = max(m_near - 1, 0), min(m_near + 1, full_cfg.n_subcarriers - 1)
                spacing = (franges[hi] - franges[lo]) / (hi - lo)
                worst_ratio = max(worst_ratio, abs(franges[m_win] - r) / spacing)
        assert worst_ratio <= 12.0

    @pytest.mark.xfail(
        strict=True,
        reason="range discrimination along the sweep is far coarser than half a "
        "focal spacing; measured errors reach about eleven spacings",
    )
    def test_distance_stage_error_within_half_spacing(self, full_cfg, region, stationary_vr):
        theta = np.deg2rad(-50.0)
        traj = distance_sweep_trajectory(region, theta)
        ttd = ttd_from_trajectory(full_cfg, traj)
        franges = np.array(
            [focal_point(full_cfg, traj, m).range_m for m in range(1, full_cfg.n_subcarriers + 1)]
        )
        for r in np.linspace(6.0, 45.0, 6):
            pos = PolarPosition(r, theta)
            u = noiseless_signal(full_cfg, pos, stationary_vr, ttd)
            m_win = int(np.argmax(np.abs(u)))
            m_near = int(np.argmin(np.abs(franges - r)))
            lo, hi = max(m_near - 1, 0), min(m_near + 1, full_cfg.n_subcarriers - 1)
            spacing = (franges[hi] - franges[lo]) / (hi - lo)
            assert abs(franges[m_win] - r) <= 0.5 * spacing


class TestBracketSearch:
    def _first_bracket(self, cfg, region, pos, theta, n_groups=16):
        """Replay one grouped range sweep at a known angle, return its bracket."""
        radii = np.linspace(region.r_min_m, region.r_max_m, n_groups)
        plan = grouped_plan(
            cfg, [PolarPosition(float(r), theta) for r in radii], cfg.n_subcarriers // n_groups
        )
        u = noiseless_signal(cfg, pos, VisibilityRegion.stationary(), plan)
        l2 = int(np.argmax(np.abs(u).reshape(n_groups, -1).sum(axis=1)))
        return radii[max(l2 - 1, 0)], radii[min(l2 + 1, n_groups - 1)]

    def test_bracket_contains_true_range_given_true_angle(self, full_cfg, region):
        # the grouped range search is sound when fed the exact user angle
        gen = np.random.default_rng(3)
        for th_deg in np.linspace(-50.0, 50.0, 7):
            theta = np.deg2rad(th_deg)
            pos = PolarPosition(region.r_min_m, theta)
            lo, hi = self._first_bracket(full_cfg, region, pos, theta)
            assert lo - 1e-9 <= pos.range_m <= hi + 1e-9
        for _ in range(20):
            r, theta = gen.uniform(5.0, 45.0), np.deg2rad(gen.uniform(-50.0, 50.0))
            lo, hi = self._first_bracket(full_cfg, region, PolarPosition(r, theta), theta)
            assert lo - 1e-9 <= r <= hi + 1e-9

    @pytest.mark.xfail(
        strict=True,
        reason="the pipeline's refined angle carries enough error that the first "
        "range bracket misses the true range for some users on the near edge",
    )
    def test_pipeline_bracket_contains_true_range(self, full_cfg, region, stationary_vr):
        params = CbsBtParams()
        radii = np.linspace(region.r_min_m, region.r_max_m, params.groups_distance)
        for th_deg in np.linspace(-50.0, 50.0, 7):
            pos = PolarPosition(region.r_min_m, np.deg2rad(th_deg))
            est = cbs_bt(full_cfg, region, params, pos, stationary_vr, noise_var=0.0)
            rec = next(
                r for r in est.stage_diagnostics if r.stage == "distance-refine-1"
            )
            l2 = rec.winner_index - 1
            lo = radii[max(l2 - 1, 0)]
            hi = radii[min(l2 + 1, params.groups_distance - 1)]
            assert lo - 1e-9 <= pos.range_m <= hi + 1e-9

    def test_shrink_factor_meets_stop_width_only_from_six_groups(self, region):
        # pure bracket geometry: each sweep multiplies the width by 2/(L-1)
        # when the winner is interior; five sweeps from a 45 m region reach
        # the 0.5 m stop width only for six or more groups
        def final_width(n_groups, iters=5):
            width = region.r_max_m - region.r_min_m
            for _ in range(iters):
                if width < 0.5:
                    break
                width *= 2 / (n_groups - 1)
            return width

        assert final_width(4) >= 0.5
        assert final_width(5) >= 0.5
        assert final_width(6) < 0.5
        assert final_width(16) < 0.5

    @pytest.mark.xfail(
        strict=True,
        reason="four groups shrink the bracket by 2/3 per sweep, which cannot "
        "reach the 0.5 m stop width within five sweeps from a 45 m region",
    )
    def test_four_groups_reach_stop_width(self, region):
        width = region.r_max_m - region.r_min_m
        for _ in range(5):
            width *= 2 / 3
        assert width < 0.5


class TestRefinementVersusBaseline:
    @pytest.mark.xfail(
        strict=True,
        reason="noise-free the refinement usually loses to the baseline: its "
        "angle window is narrower than the sweep stage's angle error, so the "
        "range stages search at a wrong angle (9 of these 10 users regress)",
    )
    def test_refinement_never_worse_noise_free(self, full_cfg, region, stationary_vr):
        gen = np.random.default_rng(7)
        params = CbsBtParams()
        for _ in range(10):
            pos = PolarPosition(gen.uniform(5.0, 50.0), np.deg2rad(gen.uniform(-55.0, 55.0)))
            base = cbs(full_cfg, region, pos, stationary_vr, noise_var=0.0)
            refined = cbs_bt(full_cfg, region, params, pos, stationary_vr, noise_var=0.0)
            assert _xy_error(refined, pos) <= _xy_error(base, pos) + 1e-9


class TestEstimateInvariants:
    @given(
        r=st.floats(min_value=5.5, max_value=49.0),
        theta_deg=st.floats(min_value=-58.0, max_value=58.0),
        snr_db=st.floats(min_value=0.0, max_value=30.0),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(deadline=None, max_examples=12)
    def test_estimates_always_inside_region(self, small_cfg, r, theta_deg, snr_db, seed):
        region = SearchRegion()
        pos = PolarPosition(r, np.deg2rad(theta_deg))
        vr = VisibilityRegion.stationary()
        gen = np.random.default_rng(seed)
        params = CbsBtParams(groups_angle=16, groups_distance=8)
        for est in (
            cbs(small_cfg, region, pos, vr, rng=gen, snr_linear=10 ** (snr_db / 10)),
            cbs_bt(
                small_cfg, region, params, pos, vr, rng=gen,
                snr_linear=10 ** (snr_db / 10),
            ),
        ):
            assert region.r_min_m <= est.range_m <= region.r_max_m
            assert region.theta_min_rad <= est.angle_rad <= region.theta_max_rad
            assert est.sweeps_used >= 2
