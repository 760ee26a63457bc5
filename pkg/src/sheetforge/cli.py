"""Command-line experiment runner.

    sheetforge <subcommand> --config path | --preset name
               [--set dotted.path=json]... [--out dir] [--seed u64]
               [--workers k]

Subcommands: simulate (one replicate, dump fields), covariance (full Monte
Carlo at the final n), kernel-table (kernel matrices + L2 identities),
check-hypotheses (profile checks and the bilinear / window-scaling probes),
sweep (covariance across the n schedule with a deviation trend table).

Every run writes provenance.json with the fully resolved config, the
recorded override list, derived constants, and a single timestamp field;
all other outputs are byte-deterministic given (config, seed).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace as dc_replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .approx import build_approximation
from .config import (
    ExperimentConfig,
    PRESET_NAMES,
    WindowScalingSettings,
    apply_overrides,
    config_from_json_obj,
    preset,
)
from .errors import ConfigError, SheetForgeError
from .harness import (
    StepFunction,
    bilinear_moment_probe,
    default_zero_mean,
    empirical_covariance,
    gaussianity_test,
    generate_coupled_replicates,
    generate_replicates,
    grid_points,
    independence_probe,
    theoretical_covariance,
    window_scaling_probe,
)
from .kernels import (
    FbmVolterra,
    Indicator,
    check_profile,
    default_profile,
    fit_window_profile,
    increment_l2,
    kernel_matrix,
    volterra_constant,
)
from .levy import min_real_exponent, normalizing_constant
from .sheet import Lattice, mix64
from .theta import integrate_field, levy_sin, realize_theta

__all__ = ["main", "run"]

_DEFAULT_OUT = "sheetforge-out"
_PROFILE_PAIRS = (
    (0.0, 0.25),
    (0.25, 0.5),
    (0.1, 0.35),
    (0.5, 1.0),
    (0.0, 1.0),
    (0.3, 0.31),
)
_PROFILE_WINDOWS = ((0.0, 0.25), (0.25, 0.5), (0.5, 1.0), (0.2, 0.3), (0.0, 1.0))
# anchored at s0 = t0 = 0.4 so only the window SIZE varies across the
# family (position effects would contaminate the fitted exponent); the
# base rect must cover every window or the masked quadrature rows vanish
_DEFAULT_WINDOW_SCALING = WindowScalingSettings(
    m_order=2,
    base_rect=(0.0, 1.0, 0.0, 1.0),
    windows=(
        (0.4, 0.5, 0.4, 0.5),
        (0.4, 0.54, 0.4, 0.54),
        (0.4, 0.6, 0.4, 0.6),
        (0.4, 0.68, 0.4, 0.68),
    ),
)


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("sheetforge")
    except Exception:
        return "0+unknown"


def _dump_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _derived_constants(cfg: ExperimentConfig) -> dict:
    spec = cfg.spec_for_n(cfg.n_schedule[-1])
    derived: dict = {
        "zero_mean_estimator": (
            default_zero_mean(spec) if cfg.zero_mean is None else cfg.zero_mean
        ),
    }
    if cfg.theta_kind in ("LevyCos", "LevySin"):
        derived["normalizing_constant"] = normalizing_constant(cfg.model, cfg.angle)
        derived["min_real_exponent"] = min_real_exponent(
            cfg.model, cfg.angle, cfg.m_guard
        )
    for name, k in (("kernel1", cfg.k1), ("kernel2", cfg.k2)):
        if isinstance(k, FbmVolterra):
            derived[f"volterra_constant_{name}"] = volterra_constant(k.alpha)
    return derived


def _resolve_zero_mean(cfg: ExperimentConfig) -> bool:
    if cfg.zero_mean is not None:
        return bool(cfg.zero_mean)
    return default_zero_mean(cfg.spec_for_n(cfg.n_schedule[-1]))


# -- subcommand bodies -------------------------------------------------------


def _cmd_simulate(cfg: ExperimentConfig, out: Path, workers: Optional[int]) -> list:
    n = cfg.n_schedule[-1]
    lattice = Lattice(cfg.lattice_m)
    spec = cfg.spec_for_n(n)
    theta = realize_theta(spec, lattice, mix64(cfg.master_seed, 0))
    zeta = integrate_field(theta)
    field = build_approximation(theta, cfg.k1, cfg.k2, cfg.eval_grid)
    theta.field.to_csv(out / "theta_field.csv")
    zeta.to_csv(out / "zeta_field.csv")
    field.to_csv(out / "approx_field.csv")
    field.to_json(out / "approx_field.json")
    return ["theta_field.csv", "zeta_field.csv", "approx_field.csv", "approx_field.json"]


def _covariance_outputs(cfg, reps, pts, zero_mean, out: Path, stem: str) -> dict:
    theo = theoretical_covariance(cfg.k1, cfg.k2, pts)
    report = empirical_covariance(reps.values, pts, theo, zero_mean)
    _dump_json(out / f"{stem}.json", report.to_json_obj())
    with open(out / f"{stem}.txt", "w") as fh:
        fh.write(report.to_text())
    report.to_csv(out / f"{stem}.csv")
    return {
        "report": report,
        "files": [f"{stem}.json", f"{stem}.txt", f"{stem}.csv"],
    }


def _cmd_covariance(cfg: ExperimentConfig, out: Path, workers: Optional[int]) -> list:
    wanted = [p for p in cfg.probes if p in ("covariance", "gaussianity", "independence")]
    if not wanted:
        return []
    n = cfg.n_schedule[-1]
    lattice = Lattice(cfg.lattice_m)
    spec = cfg.spec_for_n(n)
    zero_mean = _resolve_zero_mean(cfg)
    files: list = []
    if "independence" in wanted:
        if cfg.theta_kind != "LevyCos":
            raise ConfigError("independence probe requires a LevyCos theta spec")
        sin_spec = levy_sin(cfg.model, n, cfg.angle, cfg.m_guard)
        reps, reps_sin = generate_coupled_replicates(
            spec, sin_spec, cfg.k1, cfg.k2, cfg.eval_grid, lattice,
            cfg.replicates, cfg.master_seed, workers,
        )
        indep = independence_probe(reps, reps_sin)
        _dump_json(out / "independence.json", indep.to_json_obj())
        files.append("independence.json")
    else:
        reps = generate_replicates(
            spec, cfg.k1, cfg.k2, cfg.eval_grid, lattice,
            cfg.replicates, cfg.master_seed, workers,
        )
    pts = grid_points(cfg.eval_grid)
    if "covariance" in wanted:
        result = _covariance_outputs(cfg, reps, pts, zero_mean, out, "covariance_report")
        files.extend(result["files"])
    if "gaussianity" in wanted:
        target = (cfg.eval_grid.s_points[-1], cfg.eval_grid.t_points[-1])
        idx = pts.index(target)
        sigma2 = float(theoretical_covariance(cfg.k1, cfg.k2, [target])[0, 0])
        gauss = gaussianity_test(reps.values[:, idx], sigma2)
        obj = gauss.to_json_obj()
        obj["point"] = list(target)
        _dump_json(out / "gaussianity.json", obj)
        files.append("gaussianity.json")
    return files


def _cmd_kernel_table(cfg: ExperimentConfig, out: Path, workers: Optional[int]) -> list:
    lattice = Lattice(cfg.lattice_m)
    mids = lattice.midpoints()

    def write_matrix(name: str, spec, points) -> None:
        mat = kernel_matrix(spec, points, mids)
        with open(out / name, "w") as fh:
            fh.write("t\\r," + ",".join(repr(float(r)) for r in mids) + "\n")
            for t, row in zip(points, mat):
                fh.write(
                    repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n"
                )

    write_matrix("kernel1_matrix.csv", cfg.k1, cfg.eval_grid.s_points)
    write_matrix("kernel2_matrix.csv", cfg.k2, cfg.eval_grid.t_points)

    def closed_form(spec, s, s2):
        if isinstance(spec, FbmVolterra):
            return abs(s2 - s) ** (2.0 * spec.alpha)
        if isinstance(spec, Indicator):
            return abs(s2 - s)
        return None

    with open(out / "l2_identity.csv", "w") as fh:
        fh.write("kernel,s,s2,increment_l2,closed_form,rel_err\n")
        for name, spec, points in (
            ("kernel1", cfg.k1, cfg.eval_grid.s_points),
            ("kernel2", cfg.k2, cfg.eval_grid.t_points),
        ):
            pts = [0.0, *points]
            for s, s2 in zip(pts, pts[1:]):
                val = increment_l2(spec, s, s2)
                ref = closed_form(spec, s, s2)
                if ref is None:
                    fh.write(f"{name},{s!r},{s2!r},{val!r},,\n")
                else:
                    rel = abs(val - ref) / ref if ref else 0.0
                    fh.write(f"{name},{s!r},{s2!r},{val!r},{ref!r},{rel!r}\n")
    return ["kernel1_matrix.csv", "kernel2_matrix.csv", "l2_identity.csv"]


def _cmd_check_hypotheses(cfg: ExperimentConfig, out: Path, workers: Optional[int]) -> list:
    wanted = [p for p in cfg.probes if p in ("profiles", "bilinear", "window-scaling")]
    if not wanted:
        return []
    n = cfg.n_schedule[-1]
    lattice = Lattice(cfg.lattice_m)
    spec = cfg.spec_for_n(n)
    files: list = []
    if "profiles" in wanted:
        report = {}
        for name, k in (("kernel1", cfg.k1), ("kernel2", cfg.k2)):
            prof = default_profile(k)
            if prof.regime == "windowed" and prof.m_bound is None:
                m_bound, beta = fit_window_profile(k, _PROFILE_PAIRS, _PROFILE_WINDOWS)
                prof = dc_replace(prof, m_bound=m_bound, beta=beta)
            checked = check_profile(k, prof, _PROFILE_PAIRS, _PROFILE_WINDOWS)
            report[name] = {
                "profile": prof.to_json_obj(),
                "check": checked.to_json_obj(),
            }
        _dump_json(out / "profile_report.json", report)
        files.append("profile_report.json")
    if "bilinear" in wanted:
        pairs = cfg.bilinear_pairs or (
            (
                StepFunction((0.0, 1.0), (1.0,)),
                StepFunction((0.0, 1.0), (1.0,)),
            ),
        )
        results = []
        for i, (f, g) in enumerate(pairs):
            rep = bilinear_moment_probe(
                spec, f, g, lattice, cfg.replicates,
                mix64(cfg.master_seed, 500 + i), workers=workers,
            )
            results.append(rep.to_json_obj())
        _dump_json(out / "bilinear_probe.json", results)
        files.append("bilinear_probe.json")
    if "window-scaling" in wanted:
        ws = cfg.window_scaling or _DEFAULT_WINDOW_SCALING
        rep = window_scaling_probe(
            spec, cfg.k1, cfg.k2, ws.m_order, ws.base_rect, ws.windows,
            lattice, cfg.replicates, mix64(cfg.master_seed, 900),
            predicted_gamma=ws.gamma, workers=workers,
        )
        _dump_json(out / "window_scaling.json", rep.to_json_obj())
        files.append("window_scaling.json")
    return files


def _cmd_sweep(cfg: ExperimentConfig, out: Path, workers: Optional[int]) -> list:
    if "covariance" not in cfg.probes:
        return []
    lattice = Lattice(cfg.lattice_m)
    zero_mean = _resolve_zero_mean(cfg)
    pts = grid_points(cfg.eval_grid)
    theo = theoretical_covariance(cfg.k1, cfg.k2, pts)
    files: list = []
    trend = []
    for i, n in enumerate(cfg.n_schedule):
        spec = cfg.spec_for_n(n)
        reps = generate_replicates(
            spec, cfg.k1, cfg.k2, cfg.eval_grid, lattice,
            cfg.replicates, mix64(cfg.master_seed, 10_000 + i), workers,
        )
        report = empirical_covariance(reps.values, pts, theo, zero_mean)
        stem = f"covariance_n{i}"
        obj = report.to_json_obj()
        obj["n"] = n
        _dump_json(out / f"{stem}.json", obj)
        files.append(f"{stem}.json")
        trend.append(
            {
                "n": n,
                "max_abs_deviation": report.max_abs_deviation,
                "max_std_deviation": report.max_std_deviation,
                "passes": report.passes(),
            }
        )
    devs = [row["max_std_deviation"] for row in trend]
    summary = {
        "schema": "sheetforge/sweep/1",
        "trend": trend,
        "monotone_trend": bool(all(b <= a * 1.5 for a, b in zip(devs, devs[1:]))),
        "final_passes": trend[-1]["passes"],
    }
    _dump_json(out / "sweep_summary.json", summary)
    with open(out / "sweep_trend.csv", "w") as fh:
        fh.write("n,max_abs_deviation,max_std_deviation,passes\n")
        for row in trend:
            fh.write(
                f"{row['n']!r},{row['max_abs_deviation']!r},"
                f"{row['max_std_deviation']!r},{int(row['passes'])}\n"
            )
    files.extend(["sweep_summary.json", "sweep_trend.csv"])
    return files


_COMMANDS = {
    "simulate": _cmd_simulate,
    "covariance": _cmd_covariance,
    "kernel-table": _cmd_kernel_table,
    "check-hypotheses": _cmd_check_hypotheses,
    "sweep": _cmd_sweep,
}


def run(
    command: str,
    raw_config: dict,
    overrides: Sequence[str] = (),
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> Path:
    """Library entry point: apply overrides, validate, execute the
    subcommand, and write provenance.json. Returns the output directory."""
    recorded = list(overrides)
    if seed is not None:
        recorded.append(f"master_seed={int(seed)}")
    resolved = apply_overrides(raw_config, recorded)
    cfg = config_from_json_obj(resolved)
    out = Path(out_dir or cfg.output_dir or _DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    if command not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}")
    written = _COMMANDS[command](cfg, out, workers)
    provenance = {
        "schema": "sheetforge/provenance/1",
        "command": command,
        "config": cfg.to_json_obj(),
        "overrides": recorded,
        "derived": _derived_constants(cfg),
        "outputs": sorted(written),
        "package_version": _package_version(),
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    _dump_json(out / "provenance.json", provenance)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sheetforge",
        description="Random-kernel sheet approximation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "one replicate at the final n; dump the fields"),
        ("covariance", "Monte Carlo covariance / gaussianity / independence"),
        ("kernel-table", "dump kernel matrices and L2 identities"),
        ("check-hypotheses", "profile checks and moment probes"),
        ("sweep", "covariance runs across the n schedule"),
    ):
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a config JSON file")
        src.add_argument(
            "--preset", choices=PRESET_NAMES, help="named built-in config"
        )
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="PATH=JSON",
            help="override a config field (dotted path, JSON value); recorded in provenance",
        )
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--workers", type=int, help="worker threads (speed only)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                raw = json.load(fh)
        else:
            raw = preset(args.preset)
        out = run(
            args.command,
            raw,
            overrides=args.set,
            out_dir=args.out,
            seed=args.seed,
            workers=args.workers,
        )
    except json.JSONDecodeError as exc:
        print(json.dumps({"error": {"type": "ConfigError", "message": f"bad config JSON: {exc}"}}))
        return 2
    except ConfigError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 2
    except SheetForgeError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 3
    except OSError as exc:
        print(json.dumps({"error": {"type": "IoError", "message": str(exc)}}))
        return 4
    print(json.dumps({"ok": True, "out": str(out)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
