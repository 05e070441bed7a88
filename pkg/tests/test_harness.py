import json
import math
import os

import numpy as np
import pytest

from spheredyn import cli, harness
from spheredyn.config import config_from_dict, config_to_toml, load_config
from spheredyn.errors import (
    AssumptionViolationError,
    ConfigParseError,
    ConfigValidationError,
    GridMismatchError,
    UnknownPresetError,
)
from spheredyn.metrics import CSV_COLUMNS, MetricRecord
from spheredyn.presets import resolve_preset
from spheredyn.spectral import build_model

MINIMAL = {
    "model": {"B": [[1.0, 0.0], [0.0, 1.0]], "V": [[1.0, 0.0], [0.0, 1.0]]},
    "init": {"kind": "uniform", "n": 2},
    "sim": {"betas": [1.0], "t_final": 0.1, "seed": 3},
}


def read_rows(path):
    header, rows = None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    return header, rows


def read_comments(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            body = line[2:].rstrip("\n")
            if " = " in body:
                key, value = body.split(" = ", 1)
                out[key] = value
    return out


def test_minimal_config_row_count(tmp_path):
    cfg = config_from_dict(MINIMAL)
    harness.run_experiment([("", cfg)], str(tmp_path), quiet=True)
    header, rows = read_rows(tmp_path / "metrics_beta1_trial00.csv")
    assert header == list(CSV_COLUMNS)
    assert len(rows) == 11  # t = 0.00, 0.01, ..., 0.10 at stride 1
    assert float(rows[0][0]) == 0.0
    assert float(rows[-1][0]) == pytest.approx(0.1)


def test_validation_reports_every_violation():
    bad = {
        "model": {"B": [[1.0, 0.0]], "V": [[1.0, 0.0], [0.0, 1.0]]},
        "init": {"kind": "uniform", "n": 0},
        "sim": {"betas": [], "t_final": -1.0},
    }
    with pytest.raises(ConfigValidationError) as err:
        config_from_dict(bad)
    text = str(err.value)
    assert "model.B" in text  # names the offending field
    assert "init.n" in text
    assert "sim.betas" in text
    assert len(err.value.violations) >= 4


def test_parse_error_has_diagnostics(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[model\nB = 1\n")
    with pytest.raises(ConfigParseError) as err:
        load_config(str(path))
    assert "broken.toml" in str(err.value)


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        resolve_preset("fig99")


def test_beta_inf_routes_to_zero_temperature(tmp_path):
    doc = dict(MINIMAL)
    doc["sim"] = {"betas": ["inf"], "t_final": 0.05, "seed": 3}
    cfg = config_from_dict(doc)
    assert math.isinf(cfg.betas[0])
    harness.run_experiment([("", cfg)], str(tmp_path), quiet=True)
    assert (tmp_path / "metrics_betainf_trial00.csv").exists()


def test_config_toml_roundtrip(tmp_path):
    _, cfg = resolve_preset("fig1")[0]
    path = tmp_path / "fig1.toml"
    path.write_text(config_to_toml(cfg))
    assert load_config(str(path)) == cfg


def test_preset_and_explicit_config_write_identical_csvs(tmp_path):
    overrides = {"num_trials": 2, "t_final": 0.3, "n": 40, "betas": (10.0, "inf")}
    named = resolve_preset("fig4", overrides=overrides, seed=77)
    harness.run_experiment(named, str(tmp_path / "preset"), quiet=True)
    cfg = named[0][1]
    cfg_path = tmp_path / "fig4.toml"
    cfg_path.write_text(config_to_toml(cfg))
    harness.run_config(str(cfg_path), str(tmp_path / "explicit"), quiet=True)
    names = sorted(p for p in os.listdir(tmp_path / "preset") if p.endswith(".csv"))
    assert names == sorted(p for p in os.listdir(tmp_path / "explicit") if p.endswith(".csv"))
    for name in names:
        a = (tmp_path / "preset" / name).read_bytes()
        b = (tmp_path / "explicit" / name).read_bytes()
        assert a == b, f"{name} differs between preset and explicit config"


def test_same_seed_byte_identical_and_worker_invariant(tmp_path):
    overrides = {"t_final": 0.5, "n": 30, "num_trials": 2}
    for sub, workers in (("a", 1), ("b", 1), ("c", 2)):
        harness.run_preset("fig3", overrides=overrides, out_dir=str(tmp_path / sub), seed=5, workers=workers, quiet=True)
    files = sorted(p for p in os.listdir(tmp_path / "a") if p.endswith(".csv"))
    assert files
    for name in files:
        ref = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == ref
        assert (tmp_path / "c" / name).read_bytes() == ref
    # different seed must change the artifacts
    harness.run_preset("fig3", overrides=overrides, out_dir=str(tmp_path / "d"), seed=6, quiet=True)
    assert (tmp_path / "d" / files[0]).read_bytes() != (tmp_path / "a" / files[0]).read_bytes()


def test_csv_header_embeds_config_and_spectral_summary(tmp_path):
    harness.run_preset("fig3", overrides={"t_final": 0.05, "n": 8}, out_dir=str(tmp_path), seed=1, quiet=True)
    meta = read_comments(tmp_path / "metrics_beta100_trial00.csv")
    assert json.loads(meta["B"]) == [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]
    assert json.loads(meta["V"]) == [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -2.0]]
    assert meta["init.n"] == "8"
    assert meta["spectral.vbt_symmetric"] == "True"
    assert json.loads(meta["spectral.eigenvalues_vbt"]) == [1.0, -1.0, -2.0]
    assert meta["spectral.gap"] == "2.0"
    assert meta["run.beta"] == "100"


def test_snapshot_files_written_with_bases(tmp_path):
    harness.run_preset(
        "fig3",
        overrides={"t_final": 0.1, "n": 12, "snapshots_at": (0.0, 0.1)},
        out_dir=str(tmp_path),
        seed=2,
        quiet=True,
    )
    snap = tmp_path / "snap_beta100_trial00_t0.csv"
    assert snap.exists()
    meta = read_comments(snap)
    assert json.loads(meta["E_basis"])  # marker bases are embedded for plots
    assert json.loads(meta["F_basis"])
    header, rows = read_rows(snap)
    assert header == ["x0", "x1", "x2"]
    assert len(rows) == 12
    assert (tmp_path / "snap_beta100_trial00_t0.1.csv").exists()


def test_tilted_plane_preset_assumption_checks():
    # unrotated spectrum (5, 5, 1) with V = Id: gap exactly 4
    model = build_model(np.diag([5.0, 5.0, 1.0]), np.eye(3))
    assert model.gap == 4.0
    _, cfg = resolve_preset("fig1")[0]
    rotated = build_model(cfg.b_array(), cfg.v_array())
    assert rotated.vbt_symmetric
    assert np.max(np.abs(rotated.VBt - rotated.VBt.T)) <= 1e-12
    assert rotated.dominant.dim == 2 and abs(rotated.gap - 4.0) <= 1e-12


def test_nonsym_preset_metric_presence(tmp_path):
    harness.run_preset("nonsym", overrides={"t_final": 0.05, "n": 6}, out_dir=str(tmp_path), seed=4, quiet=True)
    # rotating case: complex spectrum, no alignment target for V B^T
    _, rot_rows = read_rows(tmp_path / "rotating" / "metrics_beta100_trial00.csv")
    cols = dict(zip(CSV_COLUMNS, zip(*rot_rows)))
    assert all(v == "" for v in cols["align_E"])
    assert all(v == "" for v in cols["align_F"])  # V1 is not symmetric either
    assert all(v != "" for v in cols["energy"])
    # real-spectrum case: dominant direction exists, V2 is diagonal
    _, real_rows = read_rows(tmp_path / "real" / "metrics_beta100_trial00.csv")
    cols = dict(zip(CSV_COLUMNS, zip(*real_rows)))
    assert all(v != "" for v in cols["align_E"])
    assert all(v != "" for v in cols["align_F"])
    assert all(v != "" for v in cols["align_Fabs"])


def test_assumption_violation_surfaced(tmp_path):
    from spheredyn.presets import NONSYM_ROTATING_B, NONSYM_ROTATING_V

    doc = {
        "model": {"B": [list(r) for r in NONSYM_ROTATING_B], "V": [list(r) for r in NONSYM_ROTATING_V]},
        "init": {"kind": "uniform", "n": 4},
        "sim": {"betas": [10.0], "t_final": 0.05},
        "metrics": {"w2": True},
    }
    cfg = config_from_dict(doc)
    with pytest.raises(AssumptionViolationError):
        harness.run_experiment([("", cfg)], str(tmp_path / "out"), quiet=True)


def test_quantile_bands_rank_statistics():
    times = [0.0, 0.1]
    series = []
    for value in range(1, 21):
        series.append([MetricRecord(time=t, energy=float(value)) for t in times])
    bands = harness.quantile_bands(series, 0.10, 0.90)
    assert bands["energy"]["lo"][0] == 2.0  # ceil(0.1 * 20) = 2nd smallest
    assert bands["energy"]["hi"][0] == 18.0  # ceil(0.9 * 20) = 18th smallest
    assert bands["energy"]["mean"][0] == pytest.approx(10.5)
    # permutation invariance in trial order
    rng = np.random.default_rng(0)
    shuffled = [series[i] for i in rng.permutation(20)]
    other = harness.quantile_bands(shuffled, 0.10, 0.90)
    assert np.array_equal(other["energy"]["lo"], bands["energy"]["lo"])
    assert np.array_equal(other["energy"]["hi"], bands["energy"]["hi"])


def test_quantile_bands_identical_trials_and_grid_mismatch():
    a = [MetricRecord(time=0.0, energy=2.0), MetricRecord(time=0.1, energy=3.0)]
    bands = harness.quantile_bands([a, list(a)], 0.10, 0.90)
    assert np.array_equal(bands["energy"]["lo"], bands["energy"]["hi"])
    assert np.array_equal(bands["energy"]["lo"], bands["energy"]["mean"])
    with pytest.raises(GridMismatchError):
        harness.quantile_bands([a, [MetricRecord(time=0.5, energy=1.0)]], 0.1, 0.9)
    with pytest.raises(GridMismatchError):
        harness.quantile_bands([a], 0.1, 0.9)


def test_summary_written_last_and_stable(tmp_path):
    s1 = harness.run_preset("fig3", overrides={"t_final": 0.05, "n": 6}, out_dir=str(tmp_path / "x"), seed=9, quiet=True)
    s2 = harness.run_preset("fig3", overrides={"t_final": 0.05, "n": 6}, out_dir=str(tmp_path / "y"), seed=9, quiet=True)
    j1 = json.loads((tmp_path / "x" / "summary.json").read_text())
    j2 = json.loads((tmp_path / "y" / "summary.json").read_text())
    j1.pop("wall_clock_s"), j2.pop("wall_clock_s")
    assert j1 == j2
    assert s1.preset == "fig3" and s1.seed == 9
    assert j1["sub_runs"]["run"]["betas"]["100"]["final_mean"]["align_E"] is not None


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["list-presets"]) == 0
    assert cli.main(["run-preset", "nope", "--out", str(tmp_path)]) == 1
    cfg_path = tmp_path / "bad.toml"
    cfg_path.write_text("[model]\nB = [[1.0]]\n")
    assert cli.main(["run-config", str(cfg_path), "--out", str(tmp_path)]) == 1
    capsys.readouterr()


def test_cli_run_and_flag_overrides(tmp_path):
    _, cfg = resolve_preset("fig3", overrides={"t_final": 0.05, "n": 5})[0]
    cfg_path = tmp_path / "tiny.toml"
    cfg_path.write_text(config_to_toml(cfg))
    code = cli.main(
        ["run-config", str(cfg_path), "--out", str(tmp_path / "o"), "--seed", "11", "--beta", "inf", "--quiet"]
    )
    assert code == 0
    assert (tmp_path / "o" / "metrics_betainf_trial00.csv").exists()
    meta = read_comments(tmp_path / "o" / "metrics_betainf_trial00.csv")
    assert meta["seed"] == "11"


def test_cli_assumption_violation_exit_code(tmp_path):
    from spheredyn.presets import NONSYM_ROTATING_B, NONSYM_ROTATING_V

    doc_cfg = config_from_dict(
        {
            "model": {"B": [list(r) for r in NONSYM_ROTATING_B], "V": [list(r) for r in NONSYM_ROTATING_V]},
            "init": {"kind": "uniform", "n": 4},
            "sim": {"betas": [10.0], "t_final": 0.05},
        }
    )
    path = tmp_path / "nonsym.toml"
    path.write_text(config_to_toml(doc_cfg))
    assert cli.main(["run-config", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == 3


def test_cli_verify_passes():
    assert cli.main(["verify", "--quiet"]) == 0
