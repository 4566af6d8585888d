"""Command-line front end: ``qhydro {evolve,verify,ensemble,gaussian}``.

Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import gaussian as oracle
from .config import PRESETS, ConfigError, RunConfig, load_config, load_preset
from .ensemble import CandidateLaw, run_law_report
from .export import sha256, write_fields, write_json, write_law_report, write_ladder, write_rows, write_snapshots
from .madelung import enthalpy_residual, madelung_fields, masked_max
from .moments import verify_moment_ladder
from .schrodinger import NumericalAbort
from .verify import is_free_centred_gaussian, is_harmonic_ground_state, report, run_checks, run_evolution

log = logging.getLogger("qhydro")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
ASSERTED_LAW_PROPERTIES = ("density_tracking", "second_moment", "mean_velocity")


class _Run:
    """Collects output files and phase timings for the manifest."""

    def __init__(self, out: Path, config: RunConfig, command: str):
        self.out = out
        self.config = config
        self.command = command
        self.files = []
        self.timings = {}

    def phase(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = time.perf_counter() - self.t0

        return _Timer()

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def write_manifest(self):
        manifest = {
            "tool": "qhydro",
            "version": __version__,
            "command": self.command,
            "config": self.config.to_dict(),
            "timings_seconds": self.timings,
            "files": [{"path": p.relative_to(self.out).as_posix(), "sha256": sha256(p)} for p in self.files],
        }
        write_json(self.out / "manifest.json", manifest)


def _load(args) -> RunConfig:
    src = args.config
    if src is None:
        config = RunConfig()
    elif Path(src).exists():
        config = load_config(src)
    elif src in PRESETS or src.removesuffix(".cfg") in PRESETS:
        config = load_preset(src.removesuffix(".cfg"))
    else:
        raise ConfigError("--config", f"no such file or preset: {src}")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "law", None):
        overrides["laws"] = {
            "nelson": ["nelson_diffusion"],
            "bohm": ["bohmian_drift"],
            "both": ["nelson_diffusion", "bohmian_drift"],
        }[args.law]
    for key in ("ensemble_size", "n_points"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def cmd_evolve(config: RunConfig, out: Path, strict: bool = True) -> int:
    run = _Run(out, config, "evolve")
    cfg = config.physics
    with run.phase("evolve"):
        result = run_evolution(config)
    with run.phase("fields"):
        fields = [madelung_fields(psi, cfg, config.node_threshold) for _, psi in result.snapshots]
    run.add(write_snapshots(out / "snapshots.csv", result))
    run.add(write_fields(out / "fields.csv", fields))
    run.add(write_rows(out / "energy.csv", ("t", "E"), result.energy_series))

    summary = {
        "dt": config.dt,
        "t_final": config.t_final,
        "n_snapshots": len(result.snapshots),
        "norm_drift": float(max(abs(psi.norm() - 1) for _, psi in result.snapshots)),
        "enthalpy_residual_max": [masked_max(enthalpy_residual(f, cfg)) for f in fields],
        "ladder_residuals": [list(verify_moment_ladder(f.rho, cfg, config.k_max, f.time).ladder_residuals) for f in fields],
    }
    status = EXIT_OK
    if is_harmonic_ground_state(config):
        rho0 = fields[0].rho.values
        stat = max(float(np.max(np.abs(f.rho.values - rho0))) for f in fields)
        summary["stationarity_residual"] = {"value": stat, "tolerance": 1e-8, "passed": stat < 1e-8}
        if stat >= 1e-8 and strict:
            status = EXIT_CHECK
    run.add(write_json(out / "fields_summary.json", summary))
    run.write_manifest()
    return status


def cmd_verify(config: RunConfig, out: Path, strict: bool = True) -> int:
    run = _Run(out, config, "verify")
    with run.phase("evolve"):
        result = run_evolution(config)
    with run.phase("checks"):
        checks = run_checks(config, result)
    rep = report(checks)
    f0 = madelung_fields(result.snapshots[0][1], config.physics, config.node_threshold)
    run.add(write_json(out / "verification.json", rep))
    run.add(write_ladder(out / "ladder.csv", verify_moment_ladder(f0.rho, config.physics, config.k_max), config.physics))
    run.write_manifest()
    if rep["failed"]:
        log.warning("failed checks: %s", ", ".join(rep["failed"]))
        return EXIT_CHECK if strict else EXIT_OK
    return EXIT_OK


def cmd_ensemble(config: RunConfig, out: Path, strict: bool = True) -> int:
    run = _Run(out, config, "ensemble")
    with run.phase("evolve"):
        result = run_evolution(config, stride=1, t_final=config.ensemble_t_final)
    failed = []
    for law in config.laws:
        with run.phase(law):
            rep = run_law_report(
                CandidateLaw.parse(law), result, config.ensemble_size, config.seed,
                velocity_window=config.velocity_window, threshold=config.node_threshold,
            )
        run.add(*write_law_report(out, rep))
        failed += [f"{law}.{name}" for name in ASSERTED_LAW_PROPERTIES if rep.properties[name].passed is False]
    run.write_manifest()
    if failed:
        log.warning("failed properties: %s", ", ".join(failed))
        return EXIT_CHECK if strict else EXIT_OK
    return EXIT_OK


def cmd_gaussian(config: RunConfig, out: Path, strict: bool = True) -> int:
    if not is_free_centred_gaussian(config):
        raise ConfigError("initial", "the closed-form oracle covers only the centred free Gaussian")
    run = _Run(out, config, "gaussian")
    params = oracle.GaussianParams(config.initial.get("sigma0", 1.0), config.physics)
    n = int(round(config.t_final / (config.dt * config.stride)))
    times = np.linspace(0.0, config.t_final, max(n, 1) + 1)
    fields = [oracle.analytic_fields(params, float(t), config.grid) for t in times]
    run.add(write_fields(out / "gaussian_fields.csv", fields))
    run.write_manifest()
    return EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "verify": cmd_verify, "ensemble": cmd_ensemble, "gaussian": cmd_gaussian}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhydro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qhydro {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file (JSON) or preset name: " + ", ".join(PRESETS))
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--no-strict", dest="strict", action="store_false", help="exit 0 even if checks fail")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--n-points", dest="n_points", type=int)
        if name == "ensemble":
            p.add_argument("--law", choices=("nelson", "bohm", "both"))
            p.add_argument("--ensemble-size", dest="ensemble_size", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(name)s: %(message)s")
    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TypeError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        status = COMMANDS[args.command](config, out, args.strict)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished with exit code %d; outputs in %s", args.command, status, out)
    return status


if __name__ == "__main__":
    sys.exit(main())
