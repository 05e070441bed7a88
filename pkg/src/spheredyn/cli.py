"""Command-line interface.

Subcommands: ``run-preset <name>``, ``run-config <path>``,
``list-presets``, ``verify``. Exit codes: 0 success, 1 validation error,
2 runtime failure, 3 assumption violation.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import harness
from .errors import (
    AssumptionViolationError,
    ConfigParseError,
    ConfigValidationError,
    SpheredynError,
    UnknownPresetError,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_ASSUMPTION = 3


def _beta_arg(value: str) -> float:
    if value.lower() in ("inf", "infinite", "infinity"):
        return math.inf
    try:
        out = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number or 'inf', got {value!r}")
    if out <= 0:
        raise argparse.ArgumentTypeError("beta must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spheredyn",
        description="Simulate self-attention token dynamics on the sphere and emit CSV diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1, help="parallel (beta, trial) workers")
        p.add_argument("--dt", type=float, default=None, help="Euler timestep override")
        p.add_argument(
            "--beta",
            action="append",
            type=_beta_arg,
            default=None,
            metavar="B",
            help="beta value; repeatable; accepts 'inf' (overrides the sweep)",
        )
        p.add_argument("--quiet", action="store_true", help="suppress progress lines")

    p_preset = sub.add_parser("run-preset", help="run a named experiment preset")
    p_preset.add_argument("name")
    add_run_flags(p_preset)

    p_config = sub.add_parser("run-config", help="run an explicit TOML experiment config")
    p_config.add_argument("path")
    add_run_flags(p_config)

    sub.add_parser("list-presets", help="list preset names with one-line descriptions")

    p_verify = sub.add_parser("verify", help="run the built-in invariant suite")
    p_verify.add_argument("--quiet", action="store_true")

    return parser


def _overrides_from_args(args) -> dict:
    overrides: dict = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.beta:
        overrides["betas"] = tuple(args.beta)
    return overrides


def _cmd_run_preset(args) -> int:
    summary = harness.run_preset(
        args.name,
        overrides=_overrides_from_args(args),
        out_dir=args.out,
        seed=args.seed,
        workers=args.workers,
        quiet=args.quiet,
    )
    if not args.quiet:
        print(f"[spheredyn] summary written to {args.out}/summary.json ({summary.wall_clock_s}s)")
    return EXIT_OK


def _cmd_run_config(args) -> int:
    overrides = _overrides_from_args(args)
    if args.seed is not None:
        overrides["seed"] = args.seed
    summary = harness.run_config(
        args.path,
        out_dir=args.out,
        overrides=overrides,
        workers=args.workers,
        quiet=args.quiet,
    )
    if not args.quiet:
        print(f"[spheredyn] summary written to {args.out}/summary.json ({summary.wall_clock_s}s)")
    return EXIT_OK


def _cmd_list_presets(_args) -> int:
    for name in harness.preset_names():
        print(f"{name:16s} {harness.preset_description(name)}")
    return EXIT_OK


def _verify_checks():
    """Fast spot checks of the library invariants (seconds, not minutes)."""
    from . import (
        Ensemble,
        RngStream,
        Subspace,
        attention_consensus,
        build_model,
        cbo_consensus,
        mean_perp_ratio,
        perp_ratio,
        retract,
        sample_uniform,
        softmax_weights,
        symmetric_eigendecomposition,
        tangent_project,
        wasserstein2,
        zero_temperature_drift,
    )
    from .spectral import project_ensemble, spherical_projection_jacobian

    rng = RngStream(20_240_601)
    gen = rng.generator

    def check_eigen():
        a = gen.standard_normal((8, 8))
        a = a + a.T
        eig = symmetric_eigendecomposition(a)
        resid = np.max(np.abs(a @ eig.vectors - eig.vectors * eig.values[None, :]))
        orth = np.max(np.abs(eig.vectors.T @ eig.vectors - np.eye(8)))
        assert resid <= 1e-9 * (1 + np.linalg.norm(a)), f"eigen residual {resid:.2e}"
        assert orth <= 1e-10, f"eigenvector orthonormality {orth:.2e}"

    def check_geometry():
        x = sample_uniform(5, rng)[0]
        y = gen.standard_normal(5)
        p = tangent_project(x, y)
        assert abs(float(np.dot(x, p))) <= 1e-12, "tangent projection not orthogonal"
        assert abs(np.linalg.norm(retract(y)) - 1.0) <= 1e-12, "retraction not unit"

    def check_softmax_shift():
        ens = Ensemble(sample_uniform(4, rng, n=12))
        b = gen.standard_normal((4, 4))
        w1 = softmax_weights(ens, b, 7.0, 3)
        logits = 7.0 * (ens.tokens @ b.T @ ens.tokens[3]) + 11.25  # shifted by a constant
        naive = np.exp(logits - logits.max())
        naive /= naive.sum()
        assert np.max(np.abs(w1 - naive)) <= 1e-14, "softmax shift invariance"
        assert abs(float(w1.sum()) - 1.0) <= 1e-12, "softmax normalization"

    def check_cbo():
        b = gen.standard_normal((4, 4))
        b = b + b.T
        ens = Ensemble(sample_uniform(4, rng, n=15))
        for i in range(ens.n):
            lhs = cbo_consensus(ens, b, 5.0, ens.tokens[i])
            rhs = attention_consensus(ens, b, 5.0, i)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12, "CBO consensus equivalence"

    def check_w2_oracle():
        from itertools import permutations

        a = sample_uniform(3, rng, n=5)
        b = sample_uniform(3, rng, n=5)
        cost = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        brute = min(sum(cost[i, p[i]] for i in range(5)) for p in permutations(range(5)))
        got = wasserstein2(a, b)
        assert abs(got - math.sqrt(brute / 5)) <= 1e-9, "W2 vs enumeration"

    def check_lyapunov_inequalities():
        s = Subspace(np.eye(5)[:, :2])
        tokens = sample_uniform(5, rng, n=40)
        proj = project_ensemble(tokens, s)
        for p in (0.25, 0.5, 1.0):
            for x, px in zip(tokens, proj):
                assert np.dot(x - px, x - px) <= 2 * perp_ratio(s, x, p) + 1e-12
            ens = Ensemble(tokens)
            assert wasserstein2(tokens, proj) ** 2 <= 2 * mean_perp_ratio(ens, s, p) + 1e-9

    def check_stationarity():
        v_mat = np.diag([2.0, 1.0, 0.5])
        model = build_model(np.eye(3), v_mat)
        vec = np.array([1.0, 0.0, 0.0])
        collapsed = Ensemble(np.tile(vec, (6, 1)))
        for i in range(6):
            from .dynamics import finite_beta_drift

            assert np.max(np.abs(finite_beta_drift(collapsed, model, 10.0, i))) <= 1e-12

    def check_jacobian_identity():
        d = 4
        b = gen.standard_normal((d, d)) + 2.0 * np.eye(d)  # comfortably invertible
        s = gen.standard_normal((d, d))
        s = s + s.T
        v = s @ np.linalg.inv(b.T)  # makes V B^T symmetric by construction
        model = build_model(b, v)
        x = sample_uniform(d, rng)[0]
        jac = spherical_projection_jacobian(model.dominant, x)
        assert np.max(np.abs(jac @ zero_temperature_drift(x, model))) <= 1e-10

    return [
        ("symmetric eigendecomposition", check_eigen),
        ("sphere geometry", check_geometry),
        ("softmax shift invariance", check_softmax_shift),
        ("consensus equivalence", check_cbo),
        ("exact transport vs enumeration", check_w2_oracle),
        ("Lyapunov distance inequalities", check_lyapunov_inequalities),
        ("collapsed-state stationarity", check_stationarity),
        ("projection Jacobian identity", check_jacobian_identity),
    ]


def _cmd_verify(args) -> int:
    failures = 0
    for name, check in _verify_checks():
        try:
            check()
        except AssertionError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            if not args.quiet:
                print(f"ok   {name}")
    if failures:
        print(f"[spheredyn] verify: {failures} check(s) failed")
        return EXIT_RUNTIME
    if not args.quiet:
        print("[spheredyn] verify: all checks passed")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run-preset":
            return _cmd_run_preset(args)
        if args.command == "run-config":
            return _cmd_run_config(args)
        if args.command == "list-presets":
            return _cmd_list_presets(args)
        if args.command == "verify":
            return _cmd_verify(args)
        parser.error(f"unknown command {args.command!r}")
    except AssumptionViolationError as exc:
        print(f"[spheredyn] assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConfigParseError, ConfigValidationError, UnknownPresetError) as exc:
        print(f"[spheredyn] invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SpheredynError, OSError) as exc:
        print(f"[spheredyn] run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
