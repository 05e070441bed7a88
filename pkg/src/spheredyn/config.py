"""Experiment configuration: TOML parsing, validation, and the canonical
resolved form embedded in every CSV artifact header.

The config grammar is plain TOML (key/value pairs grouped into the tables
``[model]``, ``[init]``, ``[sim]``, ``[metrics]``, ``[output]``); see the
README for the full field list. Beta values may be given as numbers or the
string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigParseError, ConfigValidationError


@dataclass(frozen=True)
class InitSpec:
    """Initial token distribution: ``uniform`` on the sphere or a
    ``vmf_mixture`` with the given component parameters."""

    kind: str
    n: int
    means: tuple | None = None
    kappas: tuple | None = None
    weights: tuple | None = None


@dataclass(frozen=True)
class MetricToggles:
    align: bool = True
    w2: bool = True
    v_p: bool = True
    energy: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment sweep.

    One simulation runs per (beta, trial) pair; trial t of beta index b
    draws its randomness from the stream ``(seed, key=(b, t))``.
    """

    b_matrix: tuple
    v_matrix: tuple
    init: InitSpec
    betas: tuple
    t_final: float
    dt: float = 0.01
    record_stride: int = 1
    w2_stride: int = 10
    seed: int = 1234
    num_trials: int = 1
    p: float = 1.0
    metrics: MetricToggles = field(default_factory=MetricToggles)
    quantiles: tuple = (0.10, 0.90)
    snapshots_at: tuple = ()
    envelopes: bool = False
    c0: float = 1.0
    c1: float = 2.0

    @property
    def d(self) -> int:
        return len(self.b_matrix)

    def b_array(self) -> np.ndarray:
        return np.array(self.b_matrix, dtype=np.float64)

    def v_array(self) -> np.ndarray:
        return np.array(self.v_matrix, dtype=np.float64)

    def with_overrides(self, overrides: dict | None) -> "ExperimentConfig":
        """Apply a flat override dict (CLI flags, acceptance harness)."""
        if not overrides:
            return self
        known = {
            "betas",
            "t_final",
            "dt",
            "record_stride",
            "w2_stride",
            "seed",
            "num_trials",
            "p",
            "n",
            "snapshots_at",
            "envelopes",
            "quantiles",
        }
        unknown = set(overrides) - known
        if unknown:
            raise ConfigValidationError([f"unknown override field: {k}" for k in sorted(unknown)])
        fields = dict(overrides)
        if "betas" in fields:
            fields["betas"] = tuple(_parse_beta(b) for b in fields["betas"])
        if "snapshots_at" in fields:
            fields["snapshots_at"] = tuple(float(t) for t in fields["snapshots_at"])
        if "quantiles" in fields:
            fields["quantiles"] = tuple(float(q) for q in fields["quantiles"])
        n = fields.pop("n", None)
        cfg = replace(self, **fields)
        if n is not None:
            cfg = replace(cfg, init=replace(cfg.init, n=int(n)))
        if "t_final" in fields and "snapshots_at" not in fields:
            # a shortened horizon makes later preset snapshots unreachable
            reachable = tuple(t for t in cfg.snapshots_at if t <= cfg.t_final + 1e-9)
            cfg = replace(cfg, snapshots_at=reachable)
        validate_config(cfg)
        return cfg


def _parse_beta(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinite", "infinity"):
            return math.inf
        raise ConfigValidationError([f"beta string must be 'inf', got {value!r}"])
    return float(value)


def _matrix_tuple(rows) -> tuple:
    return tuple(tuple(float(x) for x in row) for row in rows)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"config file {path}: {exc}") from exc
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed TOML tables."""
    problems: list[str] = []

    def table(name: str) -> dict:
        part = doc.get(name, {})
        if not isinstance(part, dict):
            problems.append(f"[{name}] must be a table")
            return {}
        return part

    model = table("model")
    init_t = table("init")
    sim = table("sim")
    metrics_t = table("metrics")
    output = table("output")

    if "B" not in model or "V" not in model:
        problems.append("[model] must define matrices B and V")
        raise ConfigValidationError(problems)

    try:
        b_matrix = _matrix_tuple(model["B"])
        v_matrix = _matrix_tuple(model["V"])
    except (TypeError, ValueError):
        raise ConfigValidationError(["[model] B and V must be numeric row lists"])

    init = InitSpec(
        kind=str(init_t.get("kind", "uniform")),
        n=int(init_t.get("n", 0)),
        means=_matrix_tuple(init_t["means"]) if "means" in init_t else None,
        kappas=tuple(float(k) for k in init_t["kappas"]) if "kappas" in init_t else None,
        weights=tuple(float(w) for w in init_t["weights"]) if "weights" in init_t else None,
    )

    betas_raw = sim.get("betas", sim.get("beta", []))
    if not isinstance(betas_raw, (list, tuple)):
        betas_raw = [betas_raw]

    toggles = MetricToggles(
        align=bool(metrics_t.get("align", True)),
        w2=bool(metrics_t.get("w2", True)),
        v_p=bool(metrics_t.get("v_p", True)),
        energy=bool(metrics_t.get("energy", True)),
    )

    cfg = ExperimentConfig(
        b_matrix=b_matrix,
        v_matrix=v_matrix,
        init=init,
        betas=tuple(_parse_beta(b) for b in betas_raw),
        t_final=float(sim.get("t_final", 0.0)),
        dt=float(sim.get("dt", 0.01)),
        record_stride=int(sim.get("record_stride", 1)),
        w2_stride=int(sim.get("w2_stride", 10)),
        seed=int(sim.get("seed", 1234)),
        num_trials=int(sim.get("num_trials", 1)),
        p=float(metrics_t.get("p", 1.0)),
        metrics=toggles,
        quantiles=tuple(float(q) for q in metrics_t.get("quantiles", (0.10, 0.90))),
        snapshots_at=tuple(float(t) for t in output.get("snapshots_at", ())),
        envelopes=bool(output.get("envelopes", False)),
        c0=float(output.get("c0", 1.0)),
        c1=float(output.get("c1", 2.0)),
    )
    validate_config(cfg, problems)
    return cfg


def validate_config(cfg: ExperimentConfig, problems: list[str] | None = None) -> None:
    """Collect and raise every violated invariant at once."""
    problems = list(problems or [])
    d = len(cfg.b_matrix)
    if d < 2:
        problems.append("model dimension must be at least 2 (field: model.B)")
    if any(len(row) != d for row in cfg.b_matrix):
        problems.append("B must be square (field: model.B)")
    if len(cfg.v_matrix) != d or any(len(row) != d for row in cfg.v_matrix):
        problems.append("V must be square with the same dimension as B (field: model.V)")
    if cfg.init.kind not in ("uniform", "vmf_mixture"):
        problems.append(f"unknown init kind {cfg.init.kind!r} (field: init.kind)")
    if cfg.init.n < 1:
        problems.append("need at least one token (field: init.n)")
    if cfg.init.kind == "vmf_mixture":
        if cfg.init.means is None or cfg.init.kappas is None:
            problems.append("vmf_mixture init needs means and kappas (fields: init.means, init.kappas)")
        elif any(len(mu) != d for mu in cfg.init.means):
            problems.append("vmf means must have the model dimension (field: init.means)")
    if not cfg.betas:
        problems.append("need at least one beta value (field: sim.betas)")
    if any(not b > 0 for b in cfg.betas):
        problems.append("beta values must be positive (field: sim.betas)")
    if not cfg.t_final > 0:
        problems.append("t_final must be positive (field: sim.t_final)")
    if not 0 < cfg.dt <= cfg.t_final:
        problems.append("need 0 < dt <= t_final (fields: sim.dt, sim.t_final)")
    if cfg.record_stride < 1:
        problems.append("record_stride must be a positive integer (field: sim.record_stride)")
    if cfg.w2_stride < 1:
        problems.append("w2_stride must be a positive integer (field: sim.w2_stride)")
    if cfg.num_trials < 1:
        problems.append("num_trials must be at least 1 (field: sim.num_trials)")
    if not 0 < cfg.p <= 1:
        problems.append("p must lie in (0, 1] (field: metrics.p)")
    if len(cfg.quantiles) != 2 or not (0 < cfg.quantiles[0] < cfg.quantiles[1] < 1):
        problems.append("quantiles must be a pair 0 < lo < hi < 1 (field: metrics.quantiles)")
    if any(t < 0 or t > cfg.t_final + 1e-9 for t in cfg.snapshots_at):
        problems.append("snapshot times must lie in [0, t_final] (field: output.snapshots_at)")
    if not cfg.c1 > cfg.c0 > 0:
        problems.append("need C1 > C0 > 0 (fields: output.c0, output.c1)")
    if problems:
        raise ConfigValidationError(problems)


def _beta_repr(b: float):
    return "inf" if math.isinf(b) else b


def config_to_toml(cfg: ExperimentConfig) -> str:
    """Serialize a config to TOML that round-trips through load_config."""

    def val(x) -> str:
        return json.dumps(x)

    lines = ["[model]", f"B = {val(list(map(list, cfg.b_matrix)))}", f"V = {val(list(map(list, cfg.v_matrix)))}", ""]
    lines += ["[init]", f'kind = "{cfg.init.kind}"', f"n = {cfg.init.n}"]
    if cfg.init.means is not None:
        lines.append(f"means = {val(list(map(list, cfg.init.means)))}")
    if cfg.init.kappas is not None:
        lines.append(f"kappas = {val(list(cfg.init.kappas))}")
    if cfg.init.weights is not None:
        lines.append(f"weights = {val(list(cfg.init.weights))}")
    lines += [
        "",
        "[sim]",
        f"betas = {val([_beta_repr(b) for b in cfg.betas])}",
        f"t_final = {val(cfg.t_final)}",
        f"dt = {val(cfg.dt)}",
        f"record_stride = {cfg.record_stride}",
        f"w2_stride = {cfg.w2_stride}",
        f"seed = {cfg.seed}",
        f"num_trials = {cfg.num_trials}",
        "",
        "[metrics]",
        f"p = {val(cfg.p)}",
        f"align = {val(cfg.metrics.align)}",
        f"w2 = {val(cfg.metrics.w2)}",
        f"v_p = {val(cfg.metrics.v_p)}",
        f"energy = {val(cfg.metrics.energy)}",
        f"quantiles = {val(list(cfg.quantiles))}",
        "",
        "[output]",
        f"snapshots_at = {val(list(cfg.snapshots_at))}",
        f"envelopes = {val(cfg.envelopes)}",
        f"c0 = {val(cfg.c0)}",
        f"c1 = {val(cfg.c1)}",
        "",
    ]
    return "\n".join(lines)


def resolved_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Canonical (key, value) pairs of the resolved config, embedded as
    comment lines in every CSV artifact header."""
    items: list[tuple[str, str]] = [
        ("B", json.dumps(list(map(list, cfg.b_matrix)))),
        ("V", json.dumps(list(map(list, cfg.v_matrix)))),
        ("init.kind", cfg.init.kind),
        ("init.n", str(cfg.init.n)),
    ]
    if cfg.init.means is not None:
        items.append(("init.means", json.dumps(list(map(list, cfg.init.means)))))
    if cfg.init.kappas is not None:
        items.append(("init.kappas", json.dumps(list(cfg.init.kappas))))
    if cfg.init.weights is not None:
        items.append(("init.weights", json.dumps(list(cfg.init.weights))))
    items += [
        ("betas", json.dumps([_beta_repr(b) for b in cfg.betas])),
        ("t_final", repr(cfg.t_final)),
        ("dt", repr(cfg.dt)),
        ("record_stride", str(cfg.record_stride)),
        ("w2_stride", str(cfg.w2_stride)),
        ("seed", str(cfg.seed)),
        ("num_trials", str(cfg.num_trials)),
        ("p", repr(cfg.p)),
        ("metrics.align", str(cfg.metrics.align)),
        ("metrics.w2", str(cfg.metrics.w2)),
        ("metrics.v_p", str(cfg.metrics.v_p)),
        ("metrics.energy", str(cfg.metrics.energy)),
        ("quantiles", json.dumps(list(cfg.quantiles))),
        ("snapshots_at", json.dumps(list(cfg.snapshots_at))),
        ("envelopes", str(cfg.envelopes)),
        ("c0", repr(cfg.c0)),
        ("c1", repr(cfg.c1)),
    ]
    return items
