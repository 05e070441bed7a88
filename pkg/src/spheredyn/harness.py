"""Experiment orchestration: runs seeded (beta, trial) sweeps with metric
observers, writes deterministic CSV artifacts (metrics, snapshots,
quantile bands) plus a machine-readable summary, and exposes the preset
and config entry points used by the CLI.

Determinism contract: a fixed config and seed produce byte-identical CSVs,
independent of the worker count; every artifact embeds the resolved config
and the spectral summary as ``#``-prefixed header lines.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundParams, metastability_envelope, zero_temperature_envelope
from .config import ExperimentConfig, config_from_dict, load_config, resolved_items
from .dynamics import Ensemble, SimConfig, simulate
from .errors import AssumptionViolationError, GridMismatchError
from .geometry import RngStream, VmfMixture, sample_uniform, sample_vmf_mixture
from .metrics import (
    CSV_COLUMNS,
    MetricRecord,
    alignment,
    interaction_energy,
    mean_perp_ratio,
    wasserstein2,
)
from .presets import preset_description, preset_names, resolve_preset
from .spectral import SpectralModel, Subspace, build_model, project_ensemble

ENVELOPE_COLUMNS = ("env_theorem", "env_w2", "env_w2_proof", "env_lyapunov")


def beta_label(beta: float) -> str:
    """Filename- and header-stable label of a beta value."""
    if math.isinf(beta):
        return "inf"
    return f"{beta:g}"


def _fmt(value: float) -> str:
    return repr(float(value))


def spectral_items(model: SpectralModel) -> list[tuple[str, str]]:
    """Spectral summary (key, value) pairs for CSV headers and summaries."""
    items = [
        ("spectral.vbt_symmetric", str(model.vbt_symmetric)),
        ("spectral.sigma_min_b", _fmt(model.sigma_min_b)),
        ("spectral.sigma_max_b", _fmt(model.sigma_max_b)),
    ]
    if model.eigenvalues_vbt is not None:
        items.append(("spectral.eigenvalues_vbt", json.dumps([float(x) for x in model.eigenvalues_vbt])))
        items.append(("spectral.gap", "inf" if math.isinf(model.gap) else _fmt(model.gap)))
        items.append(("spectral.dominant_dim", str(model.dominant.dim)))
    if model.dominant_general is not None:
        items.append(("spectral.dominant_general_dim", str(model.dominant_general.dim)))
    if model.eigenvalues_v is not None:
        items.append(("spectral.eigenvalues_v", json.dumps([float(x) for x in model.eigenvalues_v])))
        items.append(("spectral.value_dominant_dim", str(model.value_dominant.dim)))
        items.append(("spectral.value_dominant_abs_dim", str(model.value_dominant_abs.dim)))
    return items


def _basis_items(model: SpectralModel) -> list[tuple[str, str]]:
    """Subspace bases for snapshot headers, so plots can draw markers
    without recomputing spectra."""
    items = []
    named = [
        ("E_basis", model.dominant if model.dominant is not None else model.dominant_general),
        ("F_basis", model.value_dominant),
        ("Fabs_basis", model.value_dominant_abs),
    ]
    for key, sub in named:
        if sub is not None:
            items.append((key, json.dumps([[float(x) for x in row] for row in sub.basis])))
    return items


def _align_subspace(model: SpectralModel) -> Subspace | None:
    """Subspace used for the align_E column: the dominant eigenspace when
    V B^T is symmetric, else the best-effort real dominant direction."""
    return model.dominant if model.dominant is not None else model.dominant_general


def sample_init(cfg: ExperimentConfig, rng: RngStream) -> Ensemble:
    """Draw the initial ensemble described by the config's init spec."""
    if cfg.init.kind == "uniform":
        tokens = sample_uniform(cfg.d, rng, n=cfg.init.n)
    else:
        mix = VmfMixture(
            means=np.array(cfg.init.means, dtype=np.float64),
            kappas=np.array(cfg.init.kappas, dtype=np.float64),
            weights=np.array(cfg.init.weights, dtype=np.float64) if cfg.init.weights else None,
        )
        tokens = sample_vmf_mixture(mix, rng, n=cfg.init.n)
    return Ensemble(tokens=tokens, time=0.0)


def check_assumptions(cfg: ExperimentConfig, model: SpectralModel) -> None:
    """Fail fast when requested metrics need structure the model lacks."""
    problems = []
    if model.dominant is None:
        if cfg.metrics.w2:
            problems.append("w2_to_target needs the dominant eigenspace: V B^T must be symmetric")
        if cfg.metrics.v_p:
            problems.append("v_p needs the dominant eigenspace: V B^T must be symmetric")
        if cfg.envelopes:
            problems.append("envelopes need the spectral gap: V B^T must be symmetric")
    if problems:
        raise AssumptionViolationError("; ".join(problems))


class MetricObserver:
    """Streams MetricRecord rows during a simulation.

    The distance-to-target column is exact assignment, hence O(n^3)-ish;
    it is computed every ``w2_stride`` recorded steps plus at t=0 and the
    final step, and left empty in between. The cheap columns fill every
    recorded row.
    """

    def __init__(
        self,
        model: SpectralModel,
        cfg: ExperimentConfig,
        init: Ensemble,
        n_steps: int,
    ):
        self.model = model
        self.cfg = cfg
        self.n_steps = n_steps
        self.align_e_sub = _align_subspace(model) if cfg.metrics.align else None
        self.align_f_sub = model.value_dominant if cfg.metrics.align else None
        self.align_fabs_sub = model.value_dominant_abs if cfg.metrics.align else None
        self.target = None
        if cfg.metrics.w2 and model.dominant is not None:
            self.target = project_ensemble(init.tokens, model.dominant)

    def __call__(self, step: int, t: float, ens: Ensemble) -> MetricRecord:
        cfg = self.cfg
        w2 = None
        if self.target is not None and (step % cfg.w2_stride == 0 or step == self.n_steps):
            w2 = wasserstein2(ens.tokens, self.target)
        return MetricRecord(
            time=t,
            align_E=alignment(ens, self.align_e_sub) if self.align_e_sub is not None else None,
            align_F=alignment(ens, self.align_f_sub) if self.align_f_sub is not None else None,
            align_Fabs=alignment(ens, self.align_fabs_sub) if self.align_fabs_sub is not None else None,
            w2_to_target=w2,
            v_p=mean_perp_ratio(ens, self.model.dominant, cfg.p)
            if cfg.metrics.v_p and self.model.dominant is not None
            else None,
            energy=interaction_energy(ens, self.model.B) if cfg.metrics.energy else None,
        )


class SnapshotObserver:
    """Captures token positions at (the first recorded step at or past)
    each requested time."""

    def __init__(self, times: tuple, dt: float, n_steps: int):
        steps = sorted({min(n_steps, int(round(t / dt))) for t in times})
        self.pending = steps
        self.taken: list[tuple[float, np.ndarray]] = []

    def __call__(self, step: int, t: float, ens: Ensemble):
        while self.pending and step >= self.pending[0]:
            self.pending.pop(0)
            self.taken.append((t, np.array(ens.tokens)))
        return None


def _envelope_row(t: float, beta: float, bp: BoundParams | None) -> list[str]:
    if bp is None:
        return ["", "", "", ""]
    w2_stated, w2_proof = zero_temperature_envelope(t, bp, form="w2")
    lyap = zero_temperature_envelope(t, bp, form="lyapunov")
    theorem = "" if math.isinf(beta) else _fmt(metastability_envelope(t, bp))
    return [theorem, _fmt(w2_stated), _fmt(w2_proof), _fmt(lyap)]


def _bound_params(cfg: ExperimentConfig, model: SpectralModel, beta: float, v_p0: float) -> BoundParams | None:
    if not cfg.envelopes or model.gap is None or math.isinf(model.gap) or model.gap <= 0:
        return None
    return BoundParams(
        gap=model.gap,
        sigma_max_b=model.sigma_max_b,
        sigma_min_b=model.sigma_min_b,
        v_p0=v_p0,
        beta=beta if not math.isinf(beta) else 1.0,
        p=cfg.p,
        c0=cfg.c0,
        c1=cfg.c1,
    )


def _header_lines(cfg: ExperimentConfig, model: SpectralModel, beta: float, trial: int, kind: str) -> list[str]:
    lines = [f"spheredyn {kind} v1"]
    lines += [f"{k} = {v}" for k, v in resolved_items(cfg)]
    lines += [f"{k} = {v}" for k, v in spectral_items(model)]
    lines.append(f"run.beta = {beta_label(beta)}")
    lines.append(f"run.trial = {trial}")
    return lines


def metrics_filename(beta: float, trial: int) -> str:
    return f"metrics_beta{beta_label(beta)}_trial{trial:02d}.csv"


def snapshot_filename(beta: float, trial: int, t: float) -> str:
    return f"snap_beta{beta_label(beta)}_trial{trial:02d}_t{t:g}.csv"


def run_single(cfg: ExperimentConfig, beta_index: int, trial: int, out_dir: str) -> dict:
    """Run one (beta, trial) simulation and write its CSV artifacts.

    Returns a manifest entry with the final metric record, used by the
    coordinator to assemble bands and the summary.
    """
    beta = cfg.betas[beta_index]
    model = build_model(cfg.b_array(), cfg.v_array())
    check_assumptions(cfg, model)
    rng = RngStream(cfg.seed, key=(beta_index, trial))
    init = sample_init(cfg, rng)
    sim_cfg = SimConfig(
        beta=beta,
        dt=cfg.dt,
        t_final=cfg.t_final,
        record_stride=cfg.record_stride,
        seed=cfg.seed,
    )
    metric_obs = MetricObserver(model, cfg, init, sim_cfg.n_steps)
    observers: list = [metric_obs]
    snap_obs = None
    if cfg.snapshots_at:
        snap_obs = SnapshotObserver(cfg.snapshots_at, cfg.dt, sim_cfg.n_steps)
        observers.append(snap_obs)
    result = simulate(init, model, sim_cfg, observers=tuple(observers), store_snapshots=False)
    records: list[MetricRecord] = result.records[0]

    bp = None
    if cfg.envelopes:
        v_p0 = mean_perp_ratio(init, model.dominant, cfg.p) if model.dominant is not None else 0.0
        bp = _bound_params(cfg, model, beta, v_p0)

    path = os.path.join(out_dir, metrics_filename(beta, trial))
    header = _header_lines(cfg, model, beta, trial, "metrics")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        columns = list(CSV_COLUMNS) + (list(ENVELOPE_COLUMNS) if bp is not None else [])
        fh.write(",".join(columns) + "\n")
        for rec in records:
            row = rec.to_csv_row()
            if bp is not None:
                row = ",".join([row] + _envelope_row(rec.time, beta, bp))
            fh.write(row + "\n")

    snap_files = []
    if snap_obs is not None:
        for t, tokens in snap_obs.taken:
            sp = os.path.join(out_dir, snapshot_filename(beta, trial, t))
            with open(sp, "w", encoding="utf-8", newline="\n") as fh:
                for line in _header_lines(cfg, model, beta, trial, "snapshot"):
                    fh.write(f"# {line}\n")
                for key, value in _basis_items(model):
                    fh.write(f"# {key} = {value}\n")
                fh.write(f"# snapshot.time = {_fmt(t)}\n")
                fh.write(",".join(f"x{k}" for k in range(tokens.shape[1])) + "\n")
                for row in tokens:
                    fh.write(",".join(_fmt(x) for x in row) + "\n")
            snap_files.append(os.path.basename(sp))

    final = records[-1]
    return {
        "beta": beta_label(beta),
        "trial": trial,
        "metrics_file": os.path.basename(path),
        "snapshot_files": snap_files,
        "final": {k: getattr(final, k) for k in CSV_COLUMNS},
        "records": records,
    }


def _job(args):
    cfg, beta_index, trial, out_dir = args
    entry = run_single(cfg, beta_index, trial, out_dir)
    entry.pop("records")  # keep IPC payloads small; bands re-read the CSVs
    return entry


def quantile_bands(trial_series: list[list[MetricRecord]], lo: float, hi: float) -> dict:
    """Per-time nearest-rank quantiles and mean across trial series.

    All series must share the same time grid (GridMismatchError
    otherwise); needs at least two trials. Returns a dict with the common
    ``time`` array and ``(mean, lo, hi)`` triples per metric column that is
    present in every trial.
    """
    if len(trial_series) < 2:
        raise GridMismatchError("quantile bands need at least two trials")
    times = [rec.time for rec in trial_series[0]]
    for series in trial_series[1:]:
        if [rec.time for rec in series] != times:
            raise GridMismatchError("trial series do not share a common time grid")
    out: dict = {"time": np.array(times)}
    n = len(trial_series)

    def nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
        rank = math.ceil(q * n - 1e-9)
        rank = min(max(rank, 1), n)
        return float(sorted_vals[rank - 1])

    for name in CSV_COLUMNS[1:]:
        rows = []
        for ti in range(len(times)):
            vals = [getattr(series[ti], name) for series in trial_series]
            if any(v is None for v in vals):
                rows.append((math.nan, math.nan, math.nan))
                continue
            arr = np.sort(np.array(vals, dtype=np.float64))
            rows.append((float(arr.mean()), nearest_rank(arr, lo), nearest_rank(arr, hi)))
        arr = np.array(rows)
        if not np.all(np.isnan(arr)):
            out[name] = {"mean": arr[:, 0], "lo": arr[:, 1], "hi": arr[:, 2]}
    return out


def _write_bands(path: str, bands: dict, beta: float) -> None:
    names = [k for k in CSV_COLUMNS[1:] if k in bands]
    columns = ["time"]
    for name in names:
        columns += [f"{name}_mean", f"{name}_lo", f"{name}_hi"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# spheredyn bands v1\n")
        fh.write(f"# run.beta = {beta_label(beta)}\n")
        fh.write(",".join(columns) + "\n")
        for ti, t in enumerate(bands["time"]):
            cells = [_fmt(t)]
            for name in names:
                triple = bands[name]
                for part in ("mean", "lo", "hi"):
                    v = triple[part][ti]
                    cells.append("" if math.isnan(v) else _fmt(v))
            fh.write(",".join(cells) + "\n")


@dataclass
class RunSummary:
    """Machine-readable result manifest; byte-stable for a fixed
    config+seed apart from the wall-clock field."""

    preset: str | None
    seed: int
    sub_runs: dict
    wall_clock_s: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "preset": self.preset,
                "seed": self.seed,
                "sub_runs": self.sub_runs,
                "wall_clock_s": self.wall_clock_s,
            },
            indent=2,
            sort_keys=True,
        )


def _mean_final(entries: list[dict]) -> dict:
    out = {}
    for key in CSV_COLUMNS:
        vals = [e["final"][key] for e in entries if e["final"].get(key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out


def _parse_metric_csv(path: str) -> list[MetricRecord]:
    """Re-read a metrics CSV into records (used for band assembly)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            cells = line.split(",")
            kwargs = {}
            for name, cell in zip(header, cells):
                if name in CSV_COLUMNS:
                    kwargs[name] = None if cell == "" else float(cell)
            records.append(MetricRecord(**kwargs))
    return records


def run_experiment(
    named_cfgs: list[tuple[str, ExperimentConfig]],
    out_dir: str,
    preset: str | None = None,
    workers: int = 1,
    quiet: bool = False,
) -> RunSummary:
    """Run every (sub-experiment, beta, trial) job and write all artifacts.

    Jobs are independent and may execute in parallel; each owns the RNG
    stream keyed by (beta index, trial), so the artifacts are identical
    for any worker count. The summary is written last via atomic rename.
    """
    start = time.monotonic()
    os.makedirs(out_dir, exist_ok=True)
    sub_runs: dict = {}
    jobs = []
    for sub_name, cfg in named_cfgs:
        sub_dir = os.path.join(out_dir, sub_name) if sub_name else out_dir
        os.makedirs(sub_dir, exist_ok=True)
        # Surface assumption violations before any worker starts.
        check_assumptions(cfg, build_model(cfg.b_array(), cfg.v_array()))
        for bi in range(len(cfg.betas)):
            for trial in range(cfg.num_trials):
                jobs.append((sub_name, sub_dir, cfg, bi, trial))

    results: dict = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            payload = [(cfg, bi, trial, sub_dir) for (sub_name, sub_dir, cfg, bi, trial) in jobs]
            for (sub_name, _, cfg, bi, trial), entry in zip(jobs, pool.map(_job, payload)):
                results[(sub_name, bi, trial)] = entry
    else:
        for sub_name, sub_dir, cfg, bi, trial in jobs:
            entry = run_single(cfg, bi, trial, sub_dir)
            entry.pop("records")
            results[(sub_name, bi, trial)] = entry

    for sub_name, cfg in named_cfgs:
        sub_dir = os.path.join(out_dir, sub_name) if sub_name else out_dir
        model = build_model(cfg.b_array(), cfg.v_array())
        per_beta = {}
        for bi, beta in enumerate(cfg.betas):
            entries = [results[(sub_name, bi, t)] for t in range(cfg.num_trials)]
            bands_file = None
            if cfg.num_trials >= 2:
                series = [
                    _parse_metric_csv(os.path.join(sub_dir, e["metrics_file"])) for e in entries
                ]
                bands = quantile_bands(series, cfg.quantiles[0], cfg.quantiles[1])
                bands_file = f"bands_beta{beta_label(beta)}.csv"
                _write_bands(os.path.join(sub_dir, bands_file), bands, beta)
            per_beta[beta_label(beta)] = {
                "final_mean": _mean_final(entries),
                "files": [e["metrics_file"] for e in entries],
                "snapshot_files": sum((e["snapshot_files"] for e in entries), []),
                "bands_file": bands_file,
            }
            if not quiet:
                print(f"[spheredyn] {sub_name or 'run'} beta={beta_label(beta)}: {cfg.num_trials} trial(s) done")
        sub_runs[sub_name or "run"] = {
            "config": dict(resolved_items(cfg)),
            "spectral": dict(spectral_items(model)),
            "betas": per_beta,
        }

    summary = RunSummary(
        preset=preset,
        seed=named_cfgs[0][1].seed,
        sub_runs=sub_runs,
        wall_clock_s=round(time.monotonic() - start, 3),
    )
    tmp = os.path.join(out_dir, "summary.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(summary.to_json() + "\n")
    os.replace(tmp, os.path.join(out_dir, "summary.json"))
    return summary


def run_preset(
    name: str,
    overrides: dict | None = None,
    out_dir: str = "out",
    seed: int | None = None,
    workers: int = 1,
    quiet: bool = False,
) -> RunSummary:
    """Resolve a preset (optionally overridden) and run it."""
    named_cfgs = resolve_preset(name, overrides=overrides, seed=seed)
    return run_experiment(named_cfgs, out_dir, preset=name, workers=workers, quiet=quiet)


def run_config(
    path: str,
    out_dir: str = "out",
    overrides: dict | None = None,
    workers: int = 1,
    quiet: bool = False,
) -> RunSummary:
    """Load an explicit config file and run it (same contract as presets)."""
    cfg = load_config(path).with_overrides(overrides)
    return run_experiment([("", cfg)], out_dir, preset=None, workers=workers, quiet=quiet)


__all__ = [
    "RunSummary",
    "beta_label",
    "config_from_dict",
    "metrics_filename",
    "preset_description",
    "preset_names",
    "quantile_bands",
    "run_config",
    "run_experiment",
    "run_preset",
    "run_single",
    "snapshot_filename",
]
