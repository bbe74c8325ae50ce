"""Monte-Carlo RMSE experiments, bound sweeps, and training-dataset export.

Everything here is plumbing over the physics modules: draw users, run an
estimator, accumulate errors; sweep the bound over (SNR, M, B, visibility)
grids; pack received frames into fixed-shape real tensors for learning.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .array_channel import PolarPosition, SystemConfig, VisibilityRegion
from .beamforming import ttd_from_trajectory
from .crb import SingularFimError, crb_from_fim, fim, profile_crb
from .localization import (
    CbsBtParams,
    SearchRegion,
    angle_sweep_trajectory,
    cbs,
    cbs_bt,
)
from .signal_chain import ReceivedFrame, noiseless_signal, shaped_noise_vars

ESTIMATORS = ("cbs", "cbs-bt", "oracle", "center")
VR_LAWS = ("stationary", "random")


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: who transmits, who estimates, how often."""

    cfg: SystemConfig = SystemConfig()
    region: SearchRegion = SearchRegion()
    snr_grid_db: tuple = (10.0, 20.0, 30.0)
    n_trials: int = 500
    position: PolarPosition | None = None
    vr_law: str | VisibilityRegion = "stationary"
    estimator: str = "cbs-bt"
    seed: int = 0
    params: CbsBtParams = CbsBtParams()
    n_subarrays: int = 4
    with_crb: bool = False

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must be non-empty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if isinstance(self.vr_law, str) and self.vr_law not in VR_LAWS:
            raise ValueError(f"vr_law must be a VisibilityRegion or one of {VR_LAWS}")


@dataclass(frozen=True)
class RmseRow:
    snr_db: float
    rmse_angle_rad: float
    rmse_range_m: float
    rmse_2d_m: float
    n_trials: int
    n_failed: int
    root_crb_angle_rad: float | None = None
    root_crb_range_m: float | None = None


@dataclass(frozen=True)
class RmseReport:
    rows: tuple
    estimator: str
    seed: int

    def to_csv(self, path) -> None:
        with_crb = any(r.root_crb_angle_rad is not None for r in self.rows)
        header = ["snr_db", "rmse_theta_rad", "rmse_r_m", "rmse_2d_m", "n_trials", "n_failed"]
        if with_crb:
            header += ["root_crb_theta_rad", "root_crb_r_m"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in self.rows:
                row = [
                    r.snr_db,
                    repr(r.rmse_angle_rad),
                    repr(r.rmse_range_m),
                    repr(r.rmse_2d_m),
                    r.n_trials,
                    r.n_failed,
                ]
                if with_crb:
                    row += [
                        "" if r.root_crb_angle_rad is None else repr(r.root_crb_angle_rad),
                        "" if r.root_crb_range_m is None else repr(r.root_crb_range_m),
                    ]
                writer.writerow(row)

    @property
    def any_failures(self) -> bool:
        return any(r.n_failed > 0 for r in self.rows)


def draw_position(region: SearchRegion, rng: np.random.Generator) -> PolarPosition:
    """Uniform position law: r and theta independently uniform over the region."""
    r = rng.uniform(region.r_min_m, region.r_max_m)
    theta = rng.uniform(region.theta_min_rad, region.theta_max_rad)
    return PolarPosition(float(r), float(theta))


def draw_vr(vr_law, n_subarrays: int, rng: np.random.Generator) -> VisibilityRegion:
    """Resolve a visibility-region law, consuming the stream only when random.

    The random law is uniform over all non-empty subsets of the sub-array set.
    """
    if isinstance(vr_law, VisibilityRegion):
        return vr_law
    if vr_law == "stationary":
        return VisibilityRegion.stationary(n_subarrays)
    if vr_law == "random":
        mask = int(rng.integers(1, 2**n_subarrays))
        visible = frozenset(i + 1 for i in range(n_subarrays) if (mask >> i) & 1)
        return VisibilityRegion(n_subarrays, visible)
    raise ValueError(f"unknown vr_law {vr_law!r}")


def _position_stream(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, trial])


def _noise_stream(seed: int, snr_idx: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1 + snr_idx, trial])


def _estimate(spec: ExperimentSpec, pos, vr, snr_linear, rng):
    if spec.estimator == "cbs":
        est = cbs(spec.cfg, spec.region, pos, vr, rng=rng, snr_linear=snr_linear)
        return est.range_m, est.angle_rad
    if spec.estimator == "cbs-bt":
        est = cbs_bt(spec.cfg, spec.region, spec.params, pos, vr, rng=rng, snr_linear=snr_linear)
        return est.range_m, est.angle_rad
    if spec.estimator == "oracle":
        return pos.range_m, pos.angle_rad
    region = spec.region
    return (
        (region.r_min_m + region.r_max_m) / 2,
        (region.theta_min_rad + region.theta_max_rad) / 2,
    )


def _run_trial(spec: ExperimentSpec, trial: int):
    """All SNR points for one trial; positions are shared across the SNR grid."""
    pos_rng = _position_stream(spec.seed, trial)
    pos = spec.position if spec.position is not None else draw_position(spec.region, pos_rng)
    vr = draw_vr(spec.vr_law, spec.n_subarrays, pos_rng)

    crb_base = None
    mean_power = None
    if spec.with_crb:
        ttd = ttd_from_trajectory(spec.cfg, angle_sweep_trajectory(spec.region))
        u = noiseless_signal(spec.cfg, pos, vr, ttd)
        mean_power = float(np.mean(np.abs(u) ** 2))
        try:
            crb_base = fim(spec.cfg, pos, vr, ttd, noise_var=1.0)
        except (ValueError, ArithmeticError):
            crb_base = None

    x, y = pos.to_xy()
    outcomes = []
    for snr_idx, snr_db in enumerate(spec.snr_grid_db):
        snr_linear = 10 ** (snr_db / 10)
        rng = _noise_stream(spec.seed, snr_idx, trial)
        try:
            r_hat, theta_hat = _estimate(spec, pos, vr, snr_linear, rng)
            x_hat = r_hat * math.cos(theta_hat)
            y_hat = r_hat * math.sin(theta_hat)
            errors = (
                (theta_hat - pos.angle_rad) ** 2,
                (r_hat - pos.range_m) ** 2,
                (x_hat - x) ** 2 + (y_hat - y) ** 2,
            )
        except (ValueError, ArithmeticError):
            errors = None

        crb_pair = None
        if crb_base is not None and mean_power and mean_power > 0:
            noise_var = mean_power / snr_linear
            try:
                res = crb_from_fim(crb_base / noise_var)
                crb_pair = (res.crb_angle, res.crb_range)
            except SingularFimError:
                crb_pair = None
        outcomes.append((errors, crb_pair))
    return outcomes


def monte_carlo(spec: ExperimentSpec, threads: int = 1) -> RmseReport:
    """Estimator RMSE over the SNR grid; failed trials are counted, not hidden.

    The position and visibility draws for trial t are identical at every SNR,
    so rows differ only through the noise. Aggregation order is fixed by trial
    index, which keeps reports bit-stable under any thread count.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    trials = range(spec.n_trials)
    if threads == 1:
        per_trial = [_run_trial(spec, t) for t in trials]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(lambda t: _run_trial(spec, t), trials))

    rows = []
    for snr_idx, snr_db in enumerate(spec.snr_grid_db):
        sums = np.zeros(3)
        n_ok = 0
        n_failed = 0
        crb_sums = np.zeros(2)
        n_crb = 0
        for outcomes in per_trial:
            errors, crb_pair = outcomes[snr_idx]
            if errors is None:
                n_failed += 1
            else:
                sums += errors
                n_ok += 1
            if crb_pair is not None:
                crb_sums += crb_pair
                n_crb += 1
        if n_ok:
            rmse = np.sqrt(sums / n_ok)
        else:
            rmse = np.full(3, np.nan)
        rows.append(
            RmseRow(
                snr_db=snr_db,
                rmse_angle_rad=float(rmse[0]),
                rmse_range_m=float(rmse[1]),
                rmse_2d_m=float(rmse[2]),
                n_trials=spec.n_trials,
                n_failed=n_failed,
                root_crb_angle_rad=float(np.sqrt(crb_sums[0] / n_crb)) if n_crb else None,
                root_crb_range_m=float(np.sqrt(crb_sums[1] / n_crb)) if n_crb else None,
            )
        )
    return RmseReport(rows=tuple(rows), estimator=spec.estimator, seed=spec.seed)


def score_external(labels_csv, predictions_csv) -> RmseReport:
    """Score an external predictor's CSV against an exported labels CSV.

    Labels: sample_id, r_m, theta_rad, snr_db, seed. Predictions: sample_id,
    r_hat_m, theta_hat_rad. Samples without a prediction count as failures.
    """
    labels = {}
    with open(labels_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"sample_id", "r_m", "theta_rad", "snr_db"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"labels CSV must have columns {sorted(required)}")
        for row in reader:
            labels[row["sample_id"]] = (
                float(row["r_m"]),
                float(row["theta_rad"]),
                float(row["snr_db"]),
            )
    if not labels:
        raise ValueError("labels CSV has no rows")

    preds = {}
    with open(predictions_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"sample_id", "r_hat_m", "theta_hat_rad"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"predictions CSV must have columns {sorted(required)}")
        for row in reader:
            preds[row["sample_id"]] = (float(row["r_hat_m"]), float(row["theta_hat_rad"]))

    snr_values = sorted({snr for _, _, snr in labels.values()})
    rows = []
    for snr in snr_values:
        sums = np.zeros(3)
        n_ok = 0
        n_failed = 0
        n_total = 0
        for sample_id, (r, theta, row_snr) in labels.items():
            if row_snr != snr:
                continue
            n_total += 1
            if sample_id not in preds:
                n_failed += 1
                continue
            r_hat, theta_hat = preds[sample_id]
            x, y = r * math.cos(theta), r * math.sin(theta)
            x_hat, y_hat = r_hat * math.cos(theta_hat), r_hat * math.sin(theta_hat)
            sums += (
                (theta_hat - theta) ** 2,
                (r_hat - r) ** 2,
                (x_hat - x) ** 2 + (y_hat - y) ** 2,
            )
            n_ok += 1
        rmse = np.sqrt(sums / n_ok) if n_ok else np.full(3, np.nan)
        rows.append(
            RmseRow(
                snr_db=snr,
                rmse_angle_rad=float(rmse[0]),
                rmse_range_m=float(rmse[1]),
                rmse_2d_m=float(rmse[2]),
                n_trials=n_total,
                n_failed=n_failed,
            )
        )
    return RmseReport(rows=tuple(rows), estimator="external", seed=0)


@dataclass(frozen=True)
class CrbSweepRow:
    snr_db: float
    n_subcarriers: int
    bandwidth_hz: float
    stationary: bool
    root_crb_angle_rad: float
    root_crb_range_m: float
    bound_mode: str

    @property
    def flagged(self) -> bool:
        return not (
            np.isfinite(self.root_crb_angle_rad) and np.isfinite(self.root_crb_range_m)
        )


def write_crb_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["snr_db", "M", "B_hz", "stationary_flag", "root_crb_theta_rad", "root_crb_r_m", "bound_mode"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.snr_db,
                    r.n_subcarriers,
                    r.bandwidth_hz,
                    int(r.stationary),
                    repr(r.root_crb_angle_rad),
                    repr(r.root_crb_range_m),
                    r.bound_mode,
                ]
            )


def crb_sweep(
    cfg: SystemConfig,
    region: SearchRegion,
    snr_grid_db,
    *,
    subcarrier_counts=None,
    bandwidths_hz=None,
    vrs=None,
    position: PolarPosition | None = None,
    n_positions: int = 1,
    seed: int = 0,
    bound: str = "shaped",
    dynamic_range_floor: float = 1e-6,
) -> tuple:
    """Root CRBs over the (SNR, M, B, visibility) grid under angle-sweep excitation.

    Every row keeps the band fixed and rescales per-subcarrier noise by
    cfg.n_subcarriers / M, so sparser grids see proportionally wider, noisier
    subcarriers. bound="shaped" equalizes per-subcarrier SNR (floored 60 dB
    below the frame mean) and profiles out the unknown complex gain;
    bound="coherent" is the plain 2x2 bound under flat noise. Rows average
    over n_positions draws when no fixed position is given; positions that
    yield a degenerate Fisher matrix are skipped, and a row with no valid
    position reports NaN (flagged).
    """
    if bound not in ("shaped", "coherent"):
        raise ValueError("bound must be 'shaped' or 'coherent'")
    subcarrier_counts = tuple(subcarrier_counts or (cfg.n_subcarriers,))
    bandwidths_hz = tuple(bandwidths_hz or (cfg.bandwidth_hz,))
    vrs = tuple(vrs) if vrs else (VisibilityRegion.stationary(),)
    if position is not None:
        positions = [position]
    else:
        positions = [draw_position(region, _position_stream(seed, i)) for i in range(n_positions)]

    ref_m = cfg.n_subcarriers
    rows = []
    for m_count in subcarrier_counts:
        for b_hz in bandwidths_hz:
            cfg_row = replace(cfg, n_subcarriers=m_count, bandwidth_hz=b_hz)
            ttd = ttd_from_trajectory(cfg_row, angle_sweep_trajectory(region))
            for vr in vrs:
                signals = [(pos, noiseless_signal(cfg_row, pos, vr, ttd)) for pos in positions]
                for snr_db in snr_grid_db:
                    snr_linear = 10 ** (snr_db / 10)
                    acc = np.zeros(2)
                    n_valid = 0
                    for pos, u in signals:
                        try:
                            if bound == "shaped":
                                sigma2 = shaped_noise_vars(
                                    u,
                                    snr_linear,
                                    n_subcarriers_ref=ref_m,
                                    dynamic_range_floor=dynamic_range_floor,
                                )
                                crb_r, crb_t = profile_crb(cfg_row, pos, vr, ttd, sigma2)
                            else:
                                mean_power = float(np.mean(np.abs(u) ** 2))
                                if mean_power == 0:
                                    raise SingularFimError("all-zero signal")
                                noise_var = mean_power * (ref_m / m_count) / snr_linear
                                res = crb_from_fim(fim(cfg_row, pos, vr, ttd, noise_var))
                                crb_r, crb_t = res.crb_range, res.crb_angle
                        except (SingularFimError, ValueError):
                            continue
                        acc += (crb_t, crb_r)
                        n_valid += 1
                    root = np.sqrt(acc / n_valid) if n_valid else np.full(2, np.nan)
                    rows.append(
                        CrbSweepRow(
                            snr_db=float(snr_db),
                            n_subcarriers=m_count,
                            bandwidth_hz=float(b_hz),
                            stationary=vr.is_stationary,
                            root_crb_angle_rad=float(root[0]),
                            root_crb_range_m=float(root[1]),
                            bound_mode=bound,
                        )
                    )
    return tuple(rows)


def factor_pair(m_total: int) -> tuple[int, int]:
    """Closest factorization m1*m2 = m_total with m1 strictly greater than m2."""
    for m2 in range(int(math.isqrt(m_total)), 0, -1):
        if m_total % m2 == 0 and m_total // m2 > m2:
            return m_total // m2, m2
    raise ValueError(f"no factorization with distinct factors for {m_total}")


def _pack_frame(samples: np.ndarray, m1: int, m2: int) -> np.ndarray:
    """Complex frame -> real (m1, m2) matrix: decimate by 2, interleave re/im, reshape."""
    kept = samples[::2]
    interleaved = np.column_stack([kept.real, kept.imag]).ravel()
    return interleaved.reshape(m1, m2)


def unpack_frame_channel(matrix: np.ndarray) -> np.ndarray:
    """Inverse of the frame packing: (m1, m2) real matrix -> decimated complex frame."""
    flat = np.asarray(matrix).ravel()
    return flat[0::2] + 1j * flat[1::2]


def reshape_observations(
    frame1: ReceivedFrame,
    frame2: ReceivedFrame,
    theta_hat: float,
    r_hat: float,
    m1: int | None = None,
    m2: int | None = None,
    *,
    region: SearchRegion,
    channel_scales=None,
) -> np.ndarray:
    """Pack one localization run into the (4, m1, m2) learning tensor.

    Channels: packed angle-stage frame, packed distance-stage frame, and two
    constant planes holding the normalized sweep estimates (theta over the
    region's largest magnitude angle, r min-max scaled). channel_scales, when
    given, divides the two frame channels (dataset-level max-abs constants).
    """
    m_total = len(frame1.samples)
    if len(frame2.samples) != m_total:
        raise ValueError("frames must have equal length")
    if m_total % 2:
        raise ValueError("frame packing requires an even subcarrier count")
    if m1 is None or m2 is None:
        m1, m2 = factor_pair(m_total)
    if m1 * m2 != m_total:
        raise ValueError(f"{m1}x{m2} does not repack {m_total} subcarriers")
    ch1 = _pack_frame(frame1.samples, m1, m2)
    ch2 = _pack_frame(frame2.samples, m1, m2)
    if channel_scales is not None:
        ch1 = ch1 / channel_scales[0]
        ch2 = ch2 / channel_scales[1]
    theta_scale = max(abs(region.theta_min_rad), abs(region.theta_max_rad))
    ch3 = np.full((m1, m2), theta_hat / theta_scale)
    ch4 = np.full((m1, m2), (r_hat - region.r_min_m) / (region.r_max_m - region.r_min_m))
    return np.stack([ch1, ch2, ch3, ch4])


def export_dataset(
    spec: ExperimentSpec, count: int, out_dir, split: str = "train", norm_from=None
) -> dict:
    """Generate count baseline-localization samples and write one dataset split.

    Per split: a raw little-endian float32 tensor file of shape
    [count, 4, m1, m2] (C order) and a labels CSV; manifest.json in the same
    directory records shapes, normalization constants, and seeds, and is
    shared by all splits of the directory. norm_from reuses the frame-channel
    scales of an existing manifest (so test splits match their train split);
    otherwise scales are computed from this split and must agree with any
    manifest already present.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg, region = spec.cfg, spec.region
    m1, m2 = factor_pair(cfg.n_subcarriers)
    tensor_name = f"{split}.f32"
    labels_name = f"{split}_labels.csv"
    manifest_path = out_dir / "manifest.json"

    scales = None
    if norm_from is not None:
        with open(norm_from) as fh:
            scales = tuple(json.load(fh)["channel_scales"][:2])

    theta_scale = max(abs(region.theta_min_rad), abs(region.theta_max_rad))
    tensors = None
    if count:
        tensors = np.memmap(
            out_dir / tensor_name, dtype="<f4", mode="w+", shape=(count, 4, m1, m2)
        )

    label_rows = []
    for i in range(count):
        pos_rng = _position_stream(spec.seed, i)
        pos = spec.position if spec.position is not None else draw_position(region, pos_rng)
        vr = draw_vr(spec.vr_law, spec.n_subarrays, pos_rng)
        snr_idx = i % len(spec.snr_grid_db)
        snr_db = spec.snr_grid_db[snr_idx]
        rng = _noise_stream(spec.seed, snr_idx, i)
        est = cbs(cfg, region, pos, vr, rng=rng, snr_linear=10 ** (snr_db / 10))
        frame1 = est.stage_diagnostics[0].frame
        frame2 = est.stage_diagnostics[1].frame
        sample = reshape_observations(
            frame1, frame2, est.angle_rad, est.range_m, m1, m2, region=region
        )
        tensors[i] = sample.astype("<f4")
        label_rows.append((i, pos.range_m, pos.angle_rad, snr_db, spec.seed))

    if scales is None:
        if count:
            s1 = float(np.max(np.abs(tensors[:, 0]))) or 1.0
            s2 = float(np.max(np.abs(tensors[:, 1]))) or 1.0
            scales = (s1, s2)
        else:
            scales = (1.0, 1.0)
    if count:
        chunk = 256
        for lo in range(0, count, chunk):
            hi = min(lo + chunk, count)
            tensors[lo:hi, 0] /= np.float32(scales[0])
            tensors[lo:hi, 1] /= np.float32(scales[1])
        tensors.flush()

    with open(out_dir / labels_name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "r_m", "theta_rad", "snr_db", "seed"])
        for row in label_rows:
            writer.writerow([row[0], repr(row[1]), repr(row[2]), row[3], row[4]])

    manifest = {}
    if manifest_path.exists():
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        old = manifest.get("channel_scales")
        if old is not None and norm_from is None and tuple(old[:2]) != scales:
            raise ValueError(
                "channel scales differ from the existing manifest; pass norm_from to reuse them"
            )
    manifest.update(
        {
            "format_version": 1,
            "system": {
                "n_antennas": cfg.n_antennas,
                "carrier_hz": cfg.carrier_hz,
                "bandwidth_hz": cfg.bandwidth_hz,
                "n_subcarriers": cfg.n_subcarriers,
                "spacing_m": cfg.spacing_m,
            },
            "region": {
                "r_min_m": region.r_min_m,
                "r_max_m": region.r_max_m,
                "theta_min_rad": region.theta_min_rad,
                "theta_max_rad": region.theta_max_rad,
            },
            "snr_grid_db": list(spec.snr_grid_db),
            "vr_law": str(spec.vr_law),
            "estimator": "cbs",
            "dtype": "<f4",
            "layout": "C",
            "packing": {
                "decimation": 2,
                "interleave": "re-im",
                "rows_cols": [m1, m2],
            },
            "channels": ["angle-frame", "distance-frame", "angle-estimate", "range-estimate"],
            "channel_scales": [scales[0], scales[1], 1.0, 1.0],
            "label_normalization": {
                "theta_scale_rad": theta_scale,
                "r_min_m": region.r_min_m,
                "r_max_m": region.r_max_m,
            },
        }
    )
    splits = manifest.setdefault("splits", {})
    splits[split] = {
        "count": count,
        "shape": [count, 4, m1, m2],
        "tensor_file": tensor_name if count else None,
        "labels_file": labels_name,
        "seed": spec.seed,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_split(out_dir, split: str):
    """Read back one exported split: (tensors float32 array, label dict rows)."""
    out_dir = Path(out_dir)
    with open(out_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    info = manifest["splits"][split]
    shape = tuple(info["shape"])
    if info["tensor_file"] is None:
        tensors = np.zeros(shape, dtype="<f4")
    else:
        tensors = np.fromfile(out_dir / info["tensor_file"], dtype="<f4").reshape(shape)
    with open(out_dir / info["labels_file"], newline="") as fh:
        labels = list(csv.DictReader(fh))
    return tensors, labels
