"""Command-line front end: experiments in, CSV/JSON out.

Subcommands: trajectory, gainmap, localize, monte-carlo, crb-sweep,
export-dataset. System, region, and search parameters come from a key=value
config file (angles in degrees); everything run-specific is a flag. Exit codes:
0 success, 2 bad arguments/config/data, 3 completed with flagged anomalies
(failed trials or degenerate bound rows).
"""

import argparse
import csv
import json
import sys

import numpy as np

from .array_channel import PolarPosition, SystemConfig, VisibilityRegion
from .beamforming import (
    TrajectorySpec,
    focal_point,
    gain_map,
    ps_beamformer,
    ttd_from_trajectory,
    ttd_weights,
)
from .harness import (
    ExperimentSpec,
    crb_sweep,
    export_dataset,
    monte_carlo,
    score_external,
    write_crb_sweep_csv,
)
from .localization import CbsBtParams, SearchRegion, cbs, cbs_bt

CONFIG_KEYS = {
    "n_antennas": int,
    "carrier_hz": float,
    "bandwidth_hz": float,
    "n_subcarriers": int,
    "spacing_m": float,
    "r_min_m": float,
    "r_max_m": float,
    "theta_min_deg": float,
    "theta_max_deg": float,
    "n_subarrays": int,
    "groups_angle": int,
    "groups_distance": int,
    "max_iters": int,
    "stop_threshold_m": float,
    "angle_window_deg": float,
}


def load_config(path):
    """Parse a key = value config file; unknown keys are errors, not warnings."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = CONFIG_KEYS[key](value.strip())
    return values


def build_setup(config_path):
    """Config file -> (SystemConfig, SearchRegion, CbsBtParams, n_subarrays)."""
    values = load_config(config_path) if config_path else {}
    cfg_kwargs = {
        k: values[k]
        for k in ("n_antennas", "carrier_hz", "bandwidth_hz", "n_subcarriers", "spacing_m")
        if k in values
    }
    cfg = SystemConfig(**cfg_kwargs)
    region_kwargs = {}
    if "r_min_m" in values:
        region_kwargs["r_min_m"] = values["r_min_m"]
    if "r_max_m" in values:
        region_kwargs["r_max_m"] = values["r_max_m"]
    if "theta_min_deg" in values:
        region_kwargs["theta_min_rad"] = np.deg2rad(values["theta_min_deg"])
    if "theta_max_deg" in values:
        region_kwargs["theta_max_rad"] = np.deg2rad(values["theta_max_deg"])
    region = SearchRegion(**region_kwargs)
    params_kwargs = {
        k: values[k]
        for k in ("groups_angle", "groups_distance", "max_iters", "stop_threshold_m")
        if k in values
    }
    if "angle_window_deg" in values:
        params_kwargs["angle_window_rad"] = np.deg2rad(values["angle_window_deg"])
    params = CbsBtParams(**params_kwargs)
    return cfg, region, params, values.get("n_subarrays", 4)


def parse_vr(text, n_subarrays):
    """'stationary' or a comma list of visible sub-array indices like '1' or '1,2'."""
    if text == "stationary":
        return VisibilityRegion.stationary(n_subarrays)
    try:
        visible = frozenset(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ValueError(f"bad visibility spec {text!r}") from exc
    return VisibilityRegion(n_subarrays, visible)


def parse_position(text):
    """'r_m,theta_deg' -> PolarPosition."""
    try:
        r_text, theta_text = text.split(",")
        return PolarPosition(float(r_text), float(np.deg2rad(float(theta_text))))
    except ValueError as exc:
        raise ValueError(f"bad position spec {text!r}, expected 'r_m,theta_deg'") from exc


def _comma_floats(text):
    return tuple(float(tok) for tok in text.split(","))


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _cmd_trajectory(args):
    cfg, region, _, _ = build_setup(args.config)
    start = (
        PolarPosition(args.r_start, np.deg2rad(args.theta_start_deg))
        if args.r_start is not None
        else PolarPosition(region.r_min_m, region.theta_min_rad)
    )
    end = (
        PolarPosition(args.r_end, np.deg2rad(args.theta_end_deg))
        if args.r_end is not None
        else PolarPosition(region.r_min_m, region.theta_max_rad)
    )
    traj = TrajectorySpec(start, end)
    fh = _open_out(args.out)
    try:
        writer = csv.writer(fh)
        writer.writerow(["m", "r_focus_m", "theta_focus_deg"])
        for m in range(1, cfg.n_subcarriers + 1):
            p = focal_point(cfg, traj, m, literal_bandwidth=args.literal_bandwidth)
            writer.writerow([m, repr(float(p.range_m)), repr(float(np.rad2deg(p.angle_rad)))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_gainmap(args):
    cfg, _, _, _ = build_setup(args.config)
    m = args.m if args.m is not None else cfg.n_subcarriers
    if args.beamformer == "ps":
        weights = ps_beamformer(cfg, PolarPosition(args.focus_r, np.deg2rad(args.focus_theta_deg)))
    else:
        traj = TrajectorySpec(
            PolarPosition(args.r_start, np.deg2rad(args.theta_start_deg)),
            PolarPosition(args.r_end, np.deg2rad(args.theta_end_deg)),
        )
        weights = ttd_weights(cfg, ttd_from_trajectory(cfg, traj), m)
    r_values = np.arange(args.r_lo, args.r_hi + args.r_step / 2, args.r_step)
    theta_values = np.deg2rad(
        np.arange(args.theta_lo_deg, args.theta_hi_deg + args.theta_step_deg / 2, args.theta_step_deg)
    )
    gm = gain_map(cfg, weights, m, r_values, theta_values)
    fh = _open_out(args.out)
    try:
        writer = csv.writer(fh)
        writer.writerow(["r_m", "theta_deg", "gain"])
        for i, r in enumerate(gm.r_values):
            for j, theta in enumerate(gm.theta_values):
                writer.writerow([repr(float(r)), repr(float(np.rad2deg(theta))), repr(float(gm.values[i, j]))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(
        f"peak gain {gm.values[gm.peak_indices]:.6g} at "
        f"r={gm.peak.range_m:.4f} m, theta={np.rad2deg(gm.peak.angle_rad):.4f} deg",
        file=sys.stderr,
    )
    return 0


def _cmd_localize(args):
    cfg, region, params, n_subarrays = build_setup(args.config)
    pos = PolarPosition(args.r, np.deg2rad(args.theta_deg))
    vr = parse_vr(args.vr, n_subarrays)
    rng = np.random.default_rng(args.seed)
    kwargs = {"noise_var": 0.0} if args.snr_db is None else {"snr_linear": 10 ** (args.snr_db / 10)}
    if args.estimator == "cbs":
        est = cbs(cfg, region, pos, vr, rng=rng, **kwargs)
    else:
        est = cbs_bt(cfg, region, params, pos, vr, rng=rng, **kwargs)
    payload = {
        "estimator": args.estimator,
        "angle_rad": est.angle_rad,
        "angle_deg": float(np.rad2deg(est.angle_rad)),
        "range_m": est.range_m,
        "sweeps_used": est.sweeps_used,
        "snr_db": args.snr_db,
        "seed": args.seed,
        "stages": [
            {"stage": rec.stage, "winner_index": rec.winner_index, "estimate": rec.estimate}
            for rec in est.stage_diagnostics
        ],
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_monte_carlo(args):
    cfg, region, params, n_subarrays = build_setup(args.config)
    if args.estimator == "external":
        if not (args.labels and args.predictions):
            raise ValueError("--estimator external requires --labels and --predictions")
        report = score_external(args.labels, args.predictions)
    else:
        vr_law = args.vr_law if args.vr_law in ("stationary", "random") else parse_vr(args.vr_law, n_subarrays)
        spec = ExperimentSpec(
            cfg=cfg,
            region=region,
            snr_grid_db=_comma_floats(args.snr_db),
            n_trials=args.trials,
            position=parse_position(args.position) if args.position else None,
            vr_law=vr_law,
            estimator=args.estimator,
            seed=args.seed,
            params=params,
            n_subarrays=n_subarrays,
            with_crb=args.crb,
        )
        report = monte_carlo(spec, threads=args.threads)
    if args.out:
        report.to_csv(args.out)
    else:
        report.to_csv(sys.stdout)
    return 3 if report.any_failures else 0


def _cmd_crb_sweep(args):
    cfg, region, _, n_subarrays = build_setup(args.config)
    vrs = [parse_vr(tok, n_subarrays) for tok in (args.vr or ["stationary"])]
    rows = crb_sweep(
        cfg,
        region,
        _comma_floats(args.snr_db),
        subcarrier_counts=[int(t) for t in args.subcarriers.split(",")] if args.subcarriers else None,
        bandwidths_hz=[g * 1e9 for g in _comma_floats(args.bandwidths_ghz)] if args.bandwidths_ghz else None,
        vrs=vrs,
        position=parse_position(args.position) if args.position else None,
        n_positions=args.random_positions,
        seed=args.seed,
        bound=args.bound,
        dynamic_range_floor=args.floor,
    )
    if args.out:
        write_crb_sweep_csv(rows, args.out)
    else:
        write_crb_sweep_csv(rows, "/dev/stdout")
    return 3 if any(r.flagged for r in rows) else 0


def _cmd_export_dataset(args):
    cfg, region, params, n_subarrays = build_setup(args.config)
    vr_law = args.vr_law if args.vr_law in ("stationary", "random") else parse_vr(args.vr_law, n_subarrays)
    spec = ExperimentSpec(
        cfg=cfg,
        region=region,
        snr_grid_db=_comma_floats(args.snr_db),
        n_trials=max(args.count, 1),
        position=parse_position(args.position) if args.position else None,
        vr_law=vr_law,
        estimator="cbs",
        seed=args.seed,
        params=params,
        n_subarrays=n_subarrays,
    )
    manifest = export_dataset(spec, args.count, args.out, split=args.split, norm_from=args.norm_from)
    print(json.dumps(manifest["splits"][args.split], indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="squintloc",
        description="Near-field wideband localization simulator: beam sweeps, bounds, datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", help="key=value config file (angles in degrees)")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--out", help=out_help)
        p.add_argument("--threads", type=int, default=1, help="worker threads for trial loops")

    p = sub.add_parser("trajectory", help="per-subcarrier focal points of a TTD trajectory")
    common(p, "output CSV path (default stdout)")
    p.add_argument("--r-start", type=float)
    p.add_argument("--theta-start-deg", type=float, default=0.0)
    p.add_argument("--r-end", type=float)
    p.add_argument("--theta-end-deg", type=float, default=0.0)
    p.add_argument("--literal-bandwidth", action="store_true", help="use the nominal B denominator")
    p.set_defaults(fn=_cmd_trajectory)

    p = sub.add_parser("gainmap", help="brute-force gain of one subcarrier over a polar grid")
    common(p, "output CSV path (default stdout)")
    p.add_argument("--beamformer", choices=["ps", "ttd"], default="ps")
    p.add_argument("--m", type=int, help="subcarrier index (default M)")
    p.add_argument("--focus-r", type=float, help="PS focus range (m)")
    p.add_argument("--focus-theta-deg", type=float, default=0.0)
    p.add_argument("--r-start", type=float, help="TTD trajectory start range (m)")
    p.add_argument("--theta-start-deg", type=float, default=0.0)
    p.add_argument("--r-end", type=float)
    p.add_argument("--theta-end-deg", type=float, default=0.0)
    p.add_argument("--r-lo", type=float, required=True)
    p.add_argument("--r-hi", type=float, required=True)
    p.add_argument("--r-step", type=float, required=True)
    p.add_argument("--theta-lo-deg", type=float, required=True)
    p.add_argument("--theta-hi-deg", type=float, required=True)
    p.add_argument("--theta-step-deg", type=float, required=True)
    p.set_defaults(fn=_cmd_gainmap)

    p = sub.add_parser("localize", help="run one localization and print JSON diagnostics")
    common(p, "output JSON path (default stdout)")
    p.add_argument("--r", type=float, required=True, help="true range (m)")
    p.add_argument("--theta-deg", type=float, required=True, help="true angle (deg)")
    p.add_argument("--vr", default="stationary", help="'stationary' or visible sub-arrays '1,2'")
    p.add_argument("--snr-db", type=float, help="per-stage frame SNR; omit for noise-free")
    p.add_argument("--estimator", choices=["cbs", "cbs-bt"], default="cbs-bt")
    p.set_defaults(fn=_cmd_localize)

    p = sub.add_parser("monte-carlo", help="RMSE over an SNR grid, or score external predictions")
    common(p, "output CSV path (default stdout)")
    p.add_argument("--snr-db", default="10,20,30", help="comma list of SNR points (dB)")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument(
        "--estimator", choices=["cbs", "cbs-bt", "oracle", "center", "external"], default="cbs-bt"
    )
    p.add_argument("--vr-law", default="stationary", help="'stationary', 'random', or sub-arrays '1,2'")
    p.add_argument("--position", help="fixed true position 'r_m,theta_deg' (default: uniform law)")
    p.add_argument("--crb", action="store_true", help="add root-CRB columns (angle-sweep excitation)")
    p.add_argument("--labels", help="labels CSV for --estimator external")
    p.add_argument("--predictions", help="predictions CSV for --estimator external")
    p.set_defaults(fn=_cmd_monte_carlo)

    p = sub.add_parser("crb-sweep", help="root CRBs over (SNR, M, B, visibility) grids")
    common(p, "output CSV path (default stdout)")
    p.add_argument("--snr-db", default="10,20,30")
    p.add_argument("--subcarriers", help="comma list of subcarrier counts, e.g. 256,2048")
    p.add_argument("--bandwidths-ghz", help="comma list of bandwidths in GHz, e.g. 1,3,6")
    p.add_argument("--vr", action="append", help="repeatable: 'stationary' or sub-arrays '1'")
    p.add_argument("--position", help="fixed position 'r_m,theta_deg'")
    p.add_argument("--random-positions", type=int, default=1, help="positions to average when not fixed")
    p.add_argument("--bound", choices=["shaped", "coherent"], default="shaped")
    p.add_argument("--floor", type=float, default=1e-6, help="receiver dynamic-range floor")
    p.set_defaults(fn=_cmd_crb_sweep)

    p = sub.add_parser("export-dataset", help="export localization frames as learning tensors")
    common(p, "output dataset directory")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--snr-db", default="10,20,30")
    p.add_argument("--vr-law", default="stationary")
    p.add_argument("--position", help="fixed true position 'r_m,theta_deg'")
    p.add_argument("--norm-from", help="manifest.json whose channel scales to reuse")
    p.set_defaults(fn=_cmd_export_dataset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "export-dataset" and not args.out:
        parser.error("export-dataset requires --out")
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
