"""Config-driven detuning x pulse-area sweeps of the final exciton population.

A sweep is described by an INI file (see :data:`SCHEMA`).  Process tensors
are built once per run and shared read-only by every cell; cells are
independent and may run in a process pool.  Output is a CSV matrix with axis
header rows, a per-cell diagnostics CSV, and optionally a heat map.

Bath grouping: the LA bath decays within a few ps and is truncated at the
configured memory ``K``; the gapped SM and BM modes ring for the whole pulse
window, so they get full-window memory and their own SVD threshold.
``split`` (default) builds one tensor for LA and one for the summed SM/BM
densities; ``separate`` builds one per mode (the propagation state is the
product of all bonds, so this is only affordable for short grids);
``combined`` sums every enabled mode into a single tensor.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .driving import PulseSpec, SystemHamiltonian, duration_from_fwhm, pulse_fwhm_wavelength
from .dynamics import (
    BondDimensionError,
    InvariantViolation,
    PopulationRangeError,
    SolverConfig,
    build_process_tensor,
    final_population,
    propagate,
)
from .phonon_env import PhononParameters, bilayer_modes, catalog_lookup, load_catalog, polaron_shift
from .units import thz_to_rad_per_ps

MODES = ("LA", "SM1", "SM2", "BM")
LONG_MEMORY_MODES = ("SM1", "SM2", "BM")
GROUPINGS = ("split", "combined", "separate")
MAX_INVALID_FRACTION = 0.01
PRESET_DIR = Path(__file__).resolve().parent / "data" / "presets"


class ConfigError(ValueError):
    """Sweep configuration rejected by schema or value validation."""


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate: float, budget: float):
        super().__init__(f"estimated cost {estimate:.0f} cell-seconds exceeds budget {budget:.0f}")
        self.estimate = estimate
        self.budget = budget


class SweepFailed(RuntimeError):
    """Too many cells failed; the partial map is attached."""

    def __init__(self, message: str, population_map: "PopulationMap"):
        super().__init__(message)
        self.population_map = population_map


# ---------------------------------------------------------------------------
# configuration

_REQ = object()

# section -> key -> (type, default); _REQ marks required keys
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "sweep": {
        "name": (str, "sweep"),
        "detuning_min_nm": (float, _REQ),
        "detuning_max_nm": (float, _REQ),
        "detuning_count": (int, _REQ),
        "area_min_pi": (float, _REQ),
        "area_max_pi": (float, _REQ),
        "area_count": (int, _REQ),
    },
    "pulse": {
        "lambda_x_nm": (float, 800.0),
        "fwhm_nm": (float, None),
        "t_p_ps": (float, None),
    },
    "phonons": {
        "modes": (str, "LA"),
        "temperature_k": (float, 4.0),
        "alpha_ps": (float, 0.29),
        "omega_c_thz": (float, 2.03),
        "bm_width_thz": (float, 0.2),
        "frequency_convention": (str, "angular"),
        "xi_bm": (float, 1.0),
        "ratio_sm1": (float, 1.0),
        "ratio_sm2": (float, 1.0),
        "d_ww_angstrom": (float, 6.5),
        "e_sm_mev": (float, None),
        "e_bm_mev": (float, None),
    },
    "solver": {
        "steps_per_tp": (int, 40),
        "memory_ps": (float, None),
        "svd_tol": (float, 1e-7),
        "long_memory_svd_tol": (float, 1e-4),
        "grouping": (str, "split"),
        "gamma_per_ps": (float, 0.3175),
        "max_bond": (int, 1024),
        "invariant_tol": (float, 1e-6),
    },
    "output": {
        "directory": (str, None),
        "heatmap": (bool, False),
    },
}


@dataclass(frozen=True)
class SweepConfig:
    """Resolved, validated sweep description."""

    name: str
    detuning_nm: tuple[float, float, int]
    area_pi: tuple[float, float, int]
    lambda_x_nm: float
    t_p_ps: float
    modes: tuple[str, ...]
    phonons: PhononParameters
    temperature_k: float
    d_ww_angstrom: float
    e_sm_mev: float
    e_bm_mev: float
    steps_per_tp: int
    memory_ps: float
    svd_tol: float
    long_memory_svd_tol: float
    grouping: str
    gamma_per_ps: float
    max_bond: int
    invariant_tol: float
    output_dir: str | None = None
    heatmap: bool = False

    def __post_init__(self):
        for label, (lo, hi, n) in (("detuning", self.detuning_nm), ("area", self.area_pi)):
            if n < 1:
                raise ConfigError(f"{label} grid is empty")
            if n == 1 and lo != hi:
                raise ConfigError(f"{label} grid with one point needs min == max")
            if n > 1 and not lo < hi:
                raise ConfigError(f"{label} grid must be strictly increasing (min < max)")
        if not set(self.modes) <= set(MODES):
            raise ConfigError(f"unknown modes {sorted(set(self.modes) - set(MODES))}")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError("duplicate modes")
        if self.grouping not in GROUPINGS:
            raise ConfigError(f"grouping must be one of {GROUPINGS}")
        if not (self.t_p_ps > 0 and self.lambda_x_nm > 0):
            raise ConfigError("pulse duration and exciton wavelength must be positive")
        if self.steps_per_tp < 2:
            raise ConfigError("steps_per_tp must be >= 2")
        if not self.memory_ps > 0:
            raise ConfigError("memory_ps must be positive")
        if self.temperature_k < 0:
            raise ConfigError("temperature must be non-negative")
        for tol in (self.svd_tol, self.long_memory_svd_tol):
            if not 0 <= tol < 1:
                raise ConfigError("SVD thresholds must lie in [0, 1)")

    # grids -----------------------------------------------------------------
    @property
    def detunings(self) -> np.ndarray:
        lo, hi, n = self.detuning_nm
        return np.linspace(lo, hi, n)

    @property
    def areas(self) -> np.ndarray:
        lo, hi, n = self.area_pi
        return np.pi * np.linspace(lo, hi, n)

    @property
    def n_cells(self) -> int:
        return self.detuning_nm[2] * self.area_pi[2]

    @property
    def dt(self) -> float:
        return self.t_p_ps / self.steps_per_tp

    @property
    def n_steps(self) -> int:
        return 6 * self.steps_per_tp

    @property
    def memory_steps(self) -> int:
        return min(max(1, math.ceil(self.memory_ps / self.dt - 1e-9)), self.n_steps - 1)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            dt=self.dt,
            memory=self.memory_steps,
            svd_tol=self.svd_tol,
            gamma=self.gamma_per_ps,
            max_bond=self.max_bond,
            invariant_tol=self.invariant_tol,
        )

    def replace(self, **changes) -> "SweepConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SweepConfig(**data)

    # identity ----------------------------------------------------------------
    def to_record(self) -> dict:
        """Every setting that affects the numbers, in a fixed order."""
        rec = asdict(self)
        rec.pop("output_dir")
        rec.pop("heatmap")
        rec["phonons"] = asdict(self.phonons)
        return rec

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in {"1", "true", "yes", "on"}:
        return True
    if low in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _raw_sections(text: str, source: str) -> dict[str, dict[str, object]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = [s for s in parser.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {unknown}")
    values: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        given = dict(parser.items(section)) if parser.has_section(section) else {}
        extra = sorted(set(given) - set(keys))
        if extra:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: {extra}")
        out = {}
        for key, (typ, default) in keys.items():
            if key in given:
                raw = given[key]
                try:
                    out[key] = _parse_bool(raw) if typ is bool else typ(raw.strip())
                except ValueError:
                    raise ConfigError(f"{source}: [{section}] {key} = {raw!r} is not a valid {typ.__name__}") from None
            elif default is _REQ:
                raise ConfigError(f"{source}: missing required key [{section}] {key}")
            else:
                out[key] = default
        values[section] = out
    return values


def _parse_modes(raw: str) -> tuple[str, ...]:
    items = [m.strip() for m in raw.replace(";", ",").split(",") if m.strip()]
    if not items:
        raise ConfigError("phonons.modes is empty; write 'none' for a closed system")
    if [m.lower() for m in items] == ["none"]:
        return ()
    return tuple(m.upper() for m in items)


def parse_sweep_config(text: str, source: str = "<config>") -> SweepConfig:
    v = _raw_sections(text, source)
    sw, pu, ph, so, out = v["sweep"], v["pulse"], v["phonons"], v["solver"], v["output"]
    if (pu["fwhm_nm"] is None) == (pu["t_p_ps"] is None):
        raise ConfigError(f"{source}: give exactly one of [pulse] fwhm_nm or t_p_ps")
    try:
        lam = pu["lambda_x_nm"]
        t_p = pu["t_p_ps"] if pu["t_p_ps"] is not None else duration_from_fwhm(pu["fwhm_nm"], lam)
        params = PhononParameters(
            alpha=ph["alpha_ps"],
            omega_c=thz_to_rad_per_ps(ph["omega_c_thz"], ph["frequency_convention"]),
            bm_width=thz_to_rad_per_ps(ph["bm_width_thz"], ph["frequency_convention"]),
            xi_bm=ph["xi_bm"],
            ratio_sm1=ph["ratio_sm1"],
            ratio_sm2=ph["ratio_sm2"],
        )
        e_sm, e_bm = ph["e_sm_mev"], ph["e_bm_mev"]
        if e_sm is None or e_bm is None:
            cat_sm, cat_bm = catalog_lookup(load_catalog(), ph["d_ww_angstrom"])
            e_sm = cat_sm if e_sm is None else e_sm
            e_bm = cat_bm if e_bm is None else e_bm
        memory = so["memory_ps"] if so["memory_ps"] is not None else 4.0 / params.omega_c
        return SweepConfig(
            name=sw["name"],
            detuning_nm=(sw["detuning_min_nm"], sw["detuning_max_nm"], sw["detuning_count"]),
            area_pi=(sw["area_min_pi"], sw["area_max_pi"], sw["area_count"]),
            lambda_x_nm=lam,
            t_p_ps=float(t_p),
            modes=_parse_modes(ph["modes"]),
            phonons=params,
            temperature_k=ph["temperature_k"],
            d_ww_angstrom=ph["d_ww_angstrom"],
            e_sm_mev=float(e_sm),
            e_bm_mev=float(e_bm),
            steps_per_tp=so["steps_per_tp"],
            memory_ps=float(memory),
            svd_tol=so["svd_tol"],
            long_memory_svd_tol=so["long_memory_svd_tol"],
            grouping=so["grouping"],
            gamma_per_ps=so["gamma_per_ps"],
            max_bond=so["max_bond"],
            invariant_tol=so["invariant_tol"],
            output_dir=out["directory"],
            heatmap=out["heatmap"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_sweep_config(path) -> SweepConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_sweep_config(text, str(path))


def preset_path(name: str) -> Path:
    """Path of a shipped preset (name with or without ``.cfg``)."""
    stem = name[:-4] if name.endswith(".cfg") else name
    path = PRESET_DIR / f"{stem}.cfg"
    if not path.is_file():
        known = sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))
        raise ConfigError(f"unknown preset {name!r}; shipped presets: {known}")
    return path


def load_preset(name: str) -> SweepConfig:
    return load_sweep_config(preset_path(name))


# ---------------------------------------------------------------------------
# environment and process tensors


def sweep_densities(cfg: SweepConfig):
    """Enabled spectral densities, labelled by mode."""
    if not cfg.modes:
        return []
    return bilayer_modes(cfg.phonons, cfg.e_sm_mev, cfg.e_bm_mev, enabled=cfg.modes)


def bath_groups(cfg: SweepConfig) -> list[tuple[list, int, float]]:
    """``(densities, memory_steps, svd_tol)`` for each process tensor to build."""
    dens = [J for J in sweep_densities(cfg) if not J.is_zero]
    full = cfg.n_steps - 1
    if not dens:
        return []
    if cfg.grouping == "separate":
        return [([J], full if J.label in LONG_MEMORY_MODES else cfg.memory_steps,
                 cfg.long_memory_svd_tol if J.label in LONG_MEMORY_MODES else cfg.svd_tol) for J in dens]
    if cfg.grouping == "combined":
        long_needed = any(J.label in LONG_MEMORY_MODES for J in dens)
        tol = cfg.long_memory_svd_tol if long_needed else cfg.svd_tol
        return [(dens, full if long_needed else cfg.memory_steps, tol)]
    short = [J for J in dens if J.label not in LONG_MEMORY_MODES]
    long = [J for J in dens if J.label in LONG_MEMORY_MODES]
    groups = []
    if short:
        groups.append((short, cfg.memory_steps, cfg.svd_tol))
    if long:
        groups.append((long, full, cfg.long_memory_svd_tol))
    return groups


def build_bath_tensors(cfg: SweepConfig) -> list:
    solver = cfg.solver_config()
    out = []
    for dens, memory, tol in bath_groups(cfg):
        gcfg = SolverConfig(dt=solver.dt, memory=memory, svd_tol=tol, max_bond=cfg.max_bond)
        out.append(build_process_tensor(dens, cfg.temperature_k, gcfg, cfg.n_steps))
    return out


def total_polaron_shift(cfg: SweepConfig) -> float:
    return float(sum(polaron_shift(J) for J in sweep_densities(cfg) if not J.is_zero))


# ---------------------------------------------------------------------------
# the map


@dataclass
class PopulationMap:
    """Final ``P_X`` over ``(pulse area, detuning)``; rows are areas."""

    detuning_nm: np.ndarray
    area: np.ndarray  # rad
    population: np.ndarray  # (n_area, n_detuning), NaN where invalid
    truncation_error: np.ndarray
    bond: np.ndarray
    trace_error: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity_defect: np.ndarray | None = None
    errors: dict[tuple[int, int], str] = field(default_factory=dict)
    fingerprint: str = ""
    build_seconds: float = 0.0

    def __post_init__(self):
        shape = (len(self.area), len(self.detuning_nm))
        if self.hermiticity_defect is None:
            self.hermiticity_defect = np.zeros(shape)
        for name in ("population", "truncation_error", "bond", "trace_error", "min_eigenvalue",
                     "hermiticity_defect"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")
        p = self.population[np.isfinite(self.population)]
        if p.size and (p.min() < -1e-6 or p.max() > 1 + 1e-6):
            raise ValueError("populations outside [0, 1]")

    @classmethod
    def from_values(cls, detuning_nm, area, population, fingerprint: str = "") -> "PopulationMap":
        """Map without solver diagnostics (analysis of external or synthetic data)."""
        pop = np.asarray(population, dtype=float)
        zeros = np.zeros_like(pop)
        return cls(np.asarray(detuning_nm, float), np.asarray(area, float), pop, zeros, zeros.astype(int),
                   zeros, zeros, zeros, {}, fingerprint)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.population)

    @property
    def invalid_fraction(self) -> float:
        return 1.0 - float(np.mean(self.valid))

    def row_index(self, theta: float) -> int:
        i = int(np.argmin(np.abs(self.area - theta)))
        if not math.isclose(self.area[i], theta, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"pulse area {theta / np.pi:g} pi is not on the grid")
        return i

    def slice(self, theta: float) -> np.ndarray:
        return self.population[self.row_index(theta)]

    def to_csv(self) -> str:
        """Matrix file: a header row of detunings, then one row per pulse area."""
        head = ["# final exciton population P_X; rows: pulse area (units of pi); columns: detuning (nm)",
                f"# fingerprint: {self.fingerprint}",
                "area_pi\\detuning_nm," + ",".join(f"{d:.6f}" for d in self.detuning_nm)]
        rows = []
        for a, row in zip(self.area, self.population):
            cells = ",".join("nan" if not np.isfinite(p) else f"{p:.10f}" for p in row)
            rows.append(f"{a / np.pi:.6f},{cells}")
        return "\n".join(head + rows) + "\n"

    def diagnostics_csv(self) -> str:
        lines = ["area_pi,detuning_nm,valid,population,truncation_error,max_bond,trace_error,min_eigenvalue,hermiticity_defect,error"]
        for i, a in enumerate(self.area):
            for j, d in enumerate(self.detuning_nm):
                err = self.errors.get((i, j), "").replace(",", ";")
                p = self.population[i, j]
                lines.append(
                    f"{a / np.pi:.6f},{d:.6f},{int(np.isfinite(p))},{'nan' if not np.isfinite(p) else f'{p:.10f}'},"
                    f"{self.truncation_error[i, j]:.3e},{int(self.bond[i, j])},{self.trace_error[i, j]:.3e},"
                    f"{self.min_eigenvalue[i, j]:.3e},{self.hermiticity_defect[i, j]:.3e},{err}"
                )
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        ok = self.valid
        out = {
            "cells": int(self.population.size),
            "invalid_cells": int(np.count_nonzero(~ok)),
            "max_truncation_error": float(np.max(self.truncation_error)) if ok.any() else None,
            "max_bond": int(np.max(self.bond)) if self.bond.size else 0,
            "max_trace_error": float(np.max(self.trace_error[ok])) if ok.any() else None,
            "min_eigenvalue": float(np.min(self.min_eigenvalue[ok])) if ok.any() else None,
            "max_hermiticity_defect": float(np.max(self.hermiticity_defect[ok])) if ok.any() else None,
        }
        if ok.any():
            k = int(np.nanargmax(self.population))
            i, j = np.unravel_index(k, self.population.shape)
            out["peak"] = {
                "population": float(self.population[i, j]),
                "area_pi": float(self.area[i] / np.pi),
                "detuning_nm": float(self.detuning_nm[j]),
            }
        return out

    def save(self, directory, *, heatmap: bool = False) -> list[Path]:
        """Write the matrix and diagnostics (and optionally a PNG); returns the paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / "population_map.csv", directory / "diagnostics.csv"]
        paths[0].write_text(self.to_csv())
        paths[1].write_text(self.diagnostics_csv())
        if heatmap:
            paths.append(self.save_heatmap(directory / "population_map.png"))
        return paths

    def save_heatmap(self, path) -> Path:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4), dpi=120)
        extent = [self.detuning_nm[0], self.detuning_nm[-1], self.area[0] / np.pi, self.area[-1] / np.pi]
        im = ax.imshow(self.population, origin="lower", aspect="auto", extent=extent, vmin=0, vmax=1, cmap="viridis")
        ax.set_xlabel("detuning (nm)")
        ax.set_ylabel("pulse area (pi)")
        fig.colorbar(im, ax=ax, label="P_X")
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        return Path(path)


@dataclass(frozen=True)
class Extremum:
    detuning_nm: float
    population: float
    boundary: bool


def smooth3(y) -> np.ndarray:
    """Three-point moving average; end points average their available neighbours."""
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        return y.copy()
    out = np.empty_like(y)
    out[1:-1] = (y[:-2] + y[1:-1] + y[2:]) / 3.0
    out[0] = 0.5 * (y[0] + y[1])
    out[-1] = 0.5 * (y[-2] + y[-1])
    return out


def slice_maxima(detuning, values) -> list[Extremum]:
    """Local maxima of a 1-D slice after three-point smoothing.

    Plateaus count once (at their first point). A maximum at either end of
    the slice is flagged as a boundary maximum.
    """
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(values, dtype=float)
    if y.size == 0 or not np.all(np.isfinite(y)):
        raise ValueError("slice is empty or contains invalid cells")
    if y.size == 1:
        return [Extremum(float(x[0]), float(y[0]), True)]
    s = smooth3(y)
    out = []
    n = s.size
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        left_ok = i == 0 or s[i - 1] < s[i]
        right_ok = j == n - 1 or s[j + 1] < s[i]
        if left_ok and right_ok and not (i == 0 and j == n - 1):
            out.append(Extremum(float(x[i]), float(y[i]), i == 0 or j == n - 1))
        i = j + 1
    return out


def map_extrema(pmap: PopulationMap, theta: float) -> list[Extremum]:
    """Local maxima of the detuning slice at pulse area ``theta`` (rad)."""
    return slice_maxima(pmap.detuning_nm, pmap.slice(theta))


# ---------------------------------------------------------------------------
# running

_WORKER: dict = {}


def _init_worker(payload):
    _WORKER.clear()
    _WORKER.update(payload)
    os.environ.setdefault("OMP_NUM_THREADS", "1")


def _run_cell(task):
    i, j, area, det_nm = task
    w = _WORKER
    pulse = PulseSpec.from_wavelength(area, w["lambda_x"], det_nm, t_p=w["t_p"])
    ham = SystemHamiltonian(pulse, w["shift"])
    try:
        traj = propagate(ham, w["baths"], w["solver"])
        p = final_population(traj, tol=max(w["solver"].invariant_tol, 1e-6))
        rho = traj.states
        trace_err = float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1.0)))
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + np.conj(np.transpose(rho, (0, 2, 1)))))))
        return i, j, p, trace_err, min_eig, traj.diagnostics.get("hermiticity_defect", 0.0), ""
    except (InvariantViolation, PopulationRangeError, BondDimensionError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return i, j, float("nan"), float("nan"), float("nan"), float("nan"), f"{type(exc).__name__}: {exc}"


def estimate_cell_seconds(cfg: SweepConfig, baths=None) -> float:
    """Cheap a-priori cost model: one dense bond contraction per step and bath."""
    if baths is None:
        return 1e-4 * cfg.n_steps
    dims = [int(pt.max_bond) for pt in baths]
    state = 4 * math.prod(dims) if dims else 4
    flops = cfg.n_steps * sum(16 * state * d for d in dims) + 64 * cfg.n_steps
    return 1e-4 * cfg.n_steps + flops / 2e9


def run_sweep(
    cfg: SweepConfig,
    *,
    jobs: int = 1,
    budget: float | None = None,
    progress=None,
) -> PopulationMap:
    """Propagate every grid cell and collect the final populations.

    ``budget`` caps the estimated total cost in cell-seconds (estimated after
    the process tensors are built and before any cell runs).
    """
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    solver = cfg.solver_config()
    t0 = time.perf_counter()
    baths = build_bath_tensors(cfg)
    build_seconds = time.perf_counter() - t0
    if budget is not None:
        estimate = cfg.n_cells * estimate_cell_seconds(cfg, baths)
        if estimate > budget:
            raise BudgetExceeded(estimate, budget)
    payload = {
        "baths": baths,
        "solver": solver,
        "shift": total_polaron_shift(cfg),
        "lambda_x": cfg.lambda_x_nm,
        "t_p": cfg.t_p_ps,
    }
    areas, dets = cfg.areas, cfg.detunings
    tasks = [(i, j, float(a), float(d)) for i, a in enumerate(areas) for j, d in enumerate(dets)]
    shape = (len(areas), len(dets))
    pop = np.full(shape, np.nan)
    trace_err = np.full(shape, np.nan)
    min_eig = np.full(shape, np.nan)
    herm = np.full(shape, np.nan)
    errors: dict[tuple[int, int], str] = {}

    def collect(result):
        i, j, p, te, me, hd, err = result
        pop[i, j], trace_err[i, j], min_eig[i, j], herm[i, j] = p, te, me, hd
        if err:
            errors[(i, j)] = err
        if progress is not None:
            progress(i, j)

    if jobs == 1:
        _init_worker(payload)
        try:
            for task in tasks:
                collect(_run_cell(task))
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(payload,)) as pool:
            for result in pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (8 * jobs))):
                collect(result)

    trunc = float(sum(pt.truncation_error for pt in baths))
    bond = int(math.prod(pt.max_bond for pt in baths)) if baths else 1
    pmap = PopulationMap(
        detuning_nm=dets,
        area=areas,
        population=pop,
        truncation_error=np.full(shape, trunc),
        bond=np.full(shape, bond, dtype=int),
        trace_error=np.nan_to_num(trace_err, nan=np.inf),
        min_eigenvalue=np.nan_to_num(min_eig, nan=-np.inf),
        hermiticity_defect=np.nan_to_num(herm, nan=np.inf),
        errors=errors,
        fingerprint=cfg.fingerprint,
        build_seconds=build_seconds,
    )
    if pmap.invalid_fraction > MAX_INVALID_FRACTION:
        raise SweepFailed(
            f"{len(errors)} of {pop.size} cells failed (limit {100 * MAX_INVALID_FRACTION:g}%)", pmap
        )
    return pmap


def environment_report(cfg: SweepConfig, omega=None) -> dict:
    """Per-mode Huang-Rhys factors, polaron shifts, energies and detuning equivalents."""
    from .phonon_env import huang_rhys, mode_energy_meV
    from .units import angular_to_energy, energy_to_detuning

    omega = np.linspace(0.0, 15.0, 151) if omega is None else np.asarray(omega, float)
    params = cfg.phonons
    rows = []
    for J in bilayer_modes(params, cfg.e_sm_mev, cfg.e_bm_mev):
        zero = J.is_zero
        S = 0.0 if zero else huang_rhys(J)
        D = 0.0 if zero else polaron_shift(J)
        e = mode_energy_meV(J)
        rows.append({
            "mode": J.label,
            "enabled": J.label in cfg.modes,
            "energy_meV": e,
            "detuning_nm": float(energy_to_detuning(e, cfg.lambda_x_nm)),
            "huang_rhys": S,
            "polaron_shift_rad_per_ps": D,
            "polaron_shift_meV": float(angular_to_energy(D)),
            "J": [float(v) for v in (np.zeros_like(omega) if zero else J(omega))],
        })
    enabled = [r for r in rows if r["enabled"]]
    return {
        "name": cfg.name,
        "d_ww_angstrom": cfg.d_ww_angstrom,
        "temperature_k": cfg.temperature_k,
        "t_p_ps": cfg.t_p_ps,
        "pulse_fwhm_nm": pulse_fwhm_wavelength(cfg.t_p_ps, cfg.lambda_x_nm),
        "omega_rad_per_ps": [float(w) for w in omega],
        "modes": rows,
        "total_huang_rhys": float(sum(r["huang_rhys"] for r in enabled)),
        "total_polaron_shift_rad_per_ps": float(sum(r["polaron_shift_rad_per_ps"] for r in enabled)),
        "version": __version__,
    }
