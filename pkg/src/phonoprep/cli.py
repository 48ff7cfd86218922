"""Command-line entry point: ``phonoprep {sweep,propagate,env,fit,gen-synthetic}``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 solver or fit
failure, 5 budget exceeded.  Every invocation writes ``manifest.json`` into
its output directory, also when it fails.  The output directory is taken
from ``--out``, else ``$PHONOPREP_OUTPUT_DIR``, else the config file's
``[output] directory``, else ``./phonoprep-out/<name>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import re
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER, EXIT_BUDGET = 0, 2, 3, 4, 5
OUTPUT_ENV = "PHONOPREP_OUTPUT_DIR"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}", EXIT_CONFIG)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    def __init__(self, subcommand: str, argv: list[str]):
        self.record = {
            "subcommand": subcommand,
            "arguments": argv,
            "status": "running",
            "exit_code": None,
            "error": None,
            "config_fingerprint": None,
            "inputs": [],
            "outputs": [],
            "tool_version": __version__,
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "python_version": platform.python_version(),
            "wall_time_s": None,
            "summary": None,
        }
        self.out_dir: Path | None = None
        self._t0 = time.perf_counter()

    def add_input(self, path) -> None:
        path = Path(path)
        entries = [path] if path.is_file() else sorted(p for p in path.rglob("*") if p.is_file())
        for p in entries:
            self.record["inputs"].append({"path": str(p), "sha256": _sha256(p)})

    def add_output(self, path) -> None:
        path = Path(path)
        rel = path.relative_to(self.out_dir) if self.out_dir and path.is_relative_to(self.out_dir) else path
        self.record["outputs"].append({"path": str(rel), "sha256": _sha256(path)})

    def finish(self, code: int, error: BaseException | None = None) -> None:
        self.record["exit_code"] = code
        self.record["status"] = "ok" if code == EXIT_OK else "failed"
        if error is not None:
            self.record["error"] = {"type": type(error).__name__, "message": str(error)}
        self.record["wall_time_s"] = round(time.perf_counter() - self._t0, 3)
        out = self.out_dir or Path(os.environ.get(OUTPUT_ENV) or "phonoprep-out")
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(self.record, indent=2) + "\n")


def _output_dir(args, default_name: str, cfg_dir: str | None = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    if cfg_dir:
        return Path(cfg_dir)
    return Path("phonoprep-out") / default_name


def _grid(text: str, what: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(",")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise CliError(f"--{what} expects MIN,MAX,COUNT, got {text!r}", EXIT_CONFIG) from None


def _load_config(args, manifest: Manifest, grid_overrides: bool = False):
    from .experiments import load_preset, load_sweep_config, preset_path

    if bool(args.config) == bool(args.preset):
        raise CliError("give exactly one of CONFIG or --preset", EXIT_CONFIG)
    path = Path(args.config) if args.config else preset_path(args.preset)
    cfg = load_sweep_config(path) if args.config else load_preset(args.preset)
    manifest.add_input(path)
    changes = {}
    if grid_overrides and args.detuning_nm:
        changes["detuning_nm"] = _grid(args.detuning_nm, "detuning-nm")
    if grid_overrides and args.area_pi:
        changes["area_pi"] = _grid(args.area_pi, "area-pi")
    if changes:
        cfg = cfg.replace(**changes)
    manifest.record["config_fingerprint"] = cfg.fingerprint
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_sweep(args, manifest: Manifest) -> int:
    from .experiments import run_sweep

    cfg = _load_config(args, manifest, grid_overrides=True)
    out = _output_dir(args, cfg.name, cfg.output_dir)
    manifest.out_dir = out
    pmap = run_sweep(cfg, jobs=args.jobs, budget=args.budget)
    for p in pmap.save(out, heatmap=args.heatmap or cfg.heatmap):
        manifest.add_output(p)
    manifest.record["summary"] = pmap.summary()
    print(json.dumps(pmap.summary(), indent=2))
    return EXIT_OK


def cmd_propagate(args, manifest: Manifest) -> int:
    from .driving import PulseSpec, SystemHamiltonian
    from .dynamics import final_population, propagate
    from .experiments import build_bath_tensors, total_polaron_shift

    cfg = _load_config(args, manifest)
    out = _output_dir(args, cfg.name + "_propagate", cfg.output_dir)
    manifest.out_dir = out
    pulse = PulseSpec.from_wavelength(args.area_pi * np.pi, cfg.lambda_x_nm, args.detuning, t_p=cfg.t_p_ps)
    ham = SystemHamiltonian(pulse, total_polaron_shift(cfg))
    traj = propagate(ham, build_bath_tensors(cfg), cfg.solver_config())
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectory.csv"
    path.write_text(traj.to_csv())
    manifest.add_output(path)
    summary = {
        "final_population": final_population(traj),
        "truncation_error": traj.truncation_error,
        "max_bond": traj.max_bond,
        "steps": len(traj.times) - 1,
    }
    manifest.record["summary"] = summary
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_env(args, manifest: Manifest) -> int:
    from .experiments import environment_report

    cfg = _load_config(args, manifest)
    out = _output_dir(args, cfg.name + "_env", cfg.output_dir)
    manifest.out_dir = out
    report = environment_report(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "environment.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    manifest.add_output(path)
    lines = [f"{'mode':<5}{'on':>4}{'E (meV)':>10}{'dlambda (nm)':>14}{'S':>10}{'D (meV)':>10}"]
    for r in report["modes"]:
        lines.append(
            f"{r['mode']:<5}{'y' if r['enabled'] else 'n':>4}{r['energy_meV']:>10.3f}{r['detuning_nm']:>14.3f}"
            f"{r['huang_rhys']:>10.4f}{r['polaron_shift_meV']:>10.4f}"
        )
    lines.append(f"total S = {report['total_huang_rhys']:.4f}, "
                 f"total D = {report['total_polaron_shift_rad_per_ps']:.4f} rad/ps")
    table = out / "environment.txt"
    table.write_text("\n".join(lines) + "\n")
    manifest.add_output(table)
    manifest.record["summary"] = {k: report[k] for k in ("total_huang_rhys", "total_polaron_shift_rad_per_ps")}
    print("\n".join(lines))
    return EXIT_OK


def cmd_fit(args, manifest: Manifest) -> int:
    from . import analysis as an

    data = Path(args.data)
    if not data.exists():
        raise an.DataError(f"no such data file or directory: {data}")
    manifest.add_input(data)
    out = _output_dir(args, f"fit_{args.kind}")
    manifest.out_dir = out
    if args.kind == "diffusion":
        res = an.spectral_diffusion(an.read_frames(data), bin_width=args.bin_width_nm,
                                    max_excluded=args.max_excluded, jobs=args.jobs)
        record = res.to_record()
    else:
        x, y = an.read_series(data)
        if args.kind == "spectrum":
            fit = an.fit_spectrum(x, y, resolution_nm=args.resolution_nm)
        elif args.kind == "trpl":
            fit = an.fit_trpl(x, y, n_exp=args.n_exp)
        else:
            fit, _ = an.fit_g2(x, y)
        record = fit.to_record()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"fit_{args.kind}.json"
    an.write_json(path, record)
    manifest.add_output(path)
    manifest.record["summary"] = {k: v for k, v in record.items() if k != "centers_nm"}
    print(json.dumps(manifest.record["summary"], indent=2))
    return EXIT_OK


def cmd_gen_synthetic(args, manifest: Manifest) -> int:
    from .analysis import synthetic_sets

    out = _output_dir(args, f"synthetic_{args.kind}")
    manifest.out_dir = out
    out.mkdir(parents=True, exist_ok=True)
    for p in synthetic_sets.write_set(args.kind, out, seed=args.seed):
        manifest.add_output(p)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="phonoprep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"phonoprep {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def config_args(sp):
        sp.add_argument("config", nargs="?", help="sweep config file (INI)")
        sp.add_argument("--preset", help="shipped preset name instead of a config file")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("sweep", help="population map over detuning and pulse area")
    config_args(sp)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sp.add_argument("--budget", type=float, default=None,
                    help="ceiling on the estimated cost in cell-seconds (default: none)")
    sp.add_argument("--detuning-nm", help="override the detuning grid, MIN,MAX,COUNT")
    sp.add_argument("--area-pi", help="override the pulse-area grid, MIN,MAX,COUNT (units of pi)")
    sp.add_argument("--heatmap", action="store_true", help="also write a PNG heat map")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("propagate", help="single trajectory at one detuning and pulse area")
    config_args(sp)
    sp.add_argument("--detuning", type=float, required=True, help="laser detuning in nm")
    sp.add_argument("--area-pi", type=float, required=True, help="pulse area in units of pi")
    sp.set_defaults(func=cmd_propagate)

    sp = sub.add_parser("env", help="spectral densities, Huang-Rhys factors and polaron shifts")
    config_args(sp)
    sp.set_defaults(func=cmd_env)

    sp = sub.add_parser("fit", help="fit measured or synthetic data")
    sp.add_argument("kind", choices=["spectrum", "trpl", "g2", "diffusion"])
    sp.add_argument("data", help="series file, or frame stack (file or directory) for diffusion")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--n-exp", type=int, choices=[1, 2], default=2, help="decay components (default 2)")
    sp.add_argument("--resolution-nm", type=float, default=None, help="spectrometer resolution to report a "
                    "quadrature-subtracted ZPL width")
    sp.add_argument("--bin-width-nm", type=float, default=0.005, help="diffusion histogram bin (default 0.005)")
    sp.add_argument("--max-excluded", type=float, default=0.2,
                    help="largest tolerated fraction of failed frames (default 0.2)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for per-frame fits (default 1)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("gen-synthetic", help="write a seeded synthetic data set and its generator record")
    sp.add_argument("kind", choices=["spectrum", "trpl", "g2", "diffusion"])
    sp.add_argument("--seed", type=int, default=2024, help="random seed (default 2024)")
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_gen_synthetic)
    return p


def _exit_code(exc: BaseException) -> int:
    from .analysis import DataError
    from .dynamics import BondDimensionError, InvariantViolation, PopulationRangeError
    from .experiments import BudgetExceeded, ConfigError, SweepFailed
    from .lsq import FitConvergenceError

    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (SweepFailed, InvariantViolation, PopulationRangeError, BondDimensionError,
                        FitConvergenceError)):
        return EXIT_SOLVER
    return EXIT_SOLVER


_VALUE_OPTIONS = ("--detuning-nm", "--area-pi", "--detuning")


def _attach_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-0.5,0,5" as an option flag; glue it to its option instead
    out: list[str] = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTIONS and i + 1 < len(argv) and re.match(r"-\.?\d", argv[i + 1]):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    command = argv[0] if argv and not argv[0].startswith("-") else "none"
    manifest = Manifest(command, argv)
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "out", None):
            manifest.out_dir = Path(args.out)
        code = args.func(args, manifest)
        manifest.finish(code)
        return code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # every failure still leaves a manifest behind
        code = _exit_code(exc)
        if code == EXIT_SOLVER and not _is_known(exc):
            manifest.finish(code, exc)
            raise
        partial = getattr(exc, "population_map", None)
        if partial is not None and manifest.out_dir is not None:
            for p in partial.save(manifest.out_dir):
                manifest.add_output(p)
        manifest.finish(code, exc)
        print(f"phonoprep: error: {exc}", file=sys.stderr)
        return code


def _is_known(exc: BaseException) -> bool:
    from .dynamics import BondDimensionError, InvariantViolation, PopulationRangeError
    from .experiments import SweepFailed
    from .lsq import FitConvergenceError

    return isinstance(exc, (CliError, SweepFailed, InvariantViolation, PopulationRangeError, BondDimensionError,
                            FitConvergenceError))


if __name__ == "__main__":
    sys.exit(main())
