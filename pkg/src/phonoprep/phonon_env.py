"""Phonon spectral densities of bilayer WSe2 and derived bath quantities.

Four mode families couple to the exciton through ``|X><X|``:

* ``LA``  -- ``alpha w^2 exp(-w^2/wc^2)``
* ``SM``  -- gapped shear modes, ``alpha (w^2-M^2)/r^4 exp(-(w^2-M^2)/(r^2 wc^2))`` for ``w > M``
* ``BM``  -- breathing mode, Gaussian of width ``eps`` around ``w_BM`` with
  weight ``xi alpha wc^4 / (2 w_BM)``

Frequencies are angular (rad/ps), ``alpha`` is in ps.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .units import CONSTANTS, angular_to_energy, energy_to_angular, kelvin_to_angular

MODE_KINDS = ("LA", "SM", "BM")

# exp(-x^2) support truncation for the Gaussian-type factors (e^-49 ~ 5e-22)
_GAUSS_SPAN = 7.0
_BM_SPAN = 10.0


class QuadratureError(RuntimeError):
    """A spectral integral did not reach the requested accuracy."""

    def __init__(self, message: str, value=None, error_estimate: float | None = None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class SpectralDensity:
    """Coupling spectrum of one phonon mode family.

    Use the :meth:`la`, :meth:`shear` and :meth:`breathing` constructors.
    ``label`` distinguishes e.g. ``SM1`` from ``SM2``.
    """

    kind: str
    alpha: float
    omega_c: float
    gap: float = 0.0
    ratio: float = 1.0
    omega_bm: float = 0.0
    width: float = 0.0
    weight: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be non-negative")
        if not self.omega_c > 0:
            raise ValueError("omega_c must be positive")
        if self.kind == "SM" and (self.gap < 0 or self.ratio <= 0):
            raise ValueError("shear mode needs gap >= 0 and ratio > 0")
        if self.kind == "BM":
            if self.width <= 0 or self.weight < 0:
                raise ValueError("breathing mode needs width > 0 and weight >= 0")
            if self.omega_bm - _BM_SPAN * self.width <= 0:
                raise ValueError("breathing-mode Gaussian must vanish at w = 0 (need w_BM > 10 eps)")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    @classmethod
    def la(cls, alpha: float, omega_c: float, label: str = "LA") -> "SpectralDensity":
        return cls("LA", alpha, omega_c, label=label)

    @classmethod
    def shear(cls, alpha: float, omega_c: float, gap: float, ratio: float, label: str = "SM") -> "SpectralDensity":
        return cls("SM", alpha, omega_c, gap=gap, ratio=ratio, label=label)

    @classmethod
    def breathing(
        cls, alpha: float, omega_c: float, omega_bm: float, width: float, weight: float = 1.0, label: str = "BM"
    ) -> "SpectralDensity":
        return cls("BM", alpha, omega_c, omega_bm=omega_bm, width=width, weight=weight, label=label)

    def scaled(self, factor: float) -> "SpectralDensity":
        """Same shape, coupling multiplied by ``factor``."""
        from dataclasses import replace

        return replace(self, alpha=self.alpha * factor)

    @property
    def is_zero(self) -> bool:
        return self.alpha == 0.0 or (self.kind == "BM" and self.weight == 0.0)

    @property
    def bm_prefactor(self) -> float:
        """Integrated weight of the breathing-mode line, ``xi alpha wc^4 / (2 w_BM)``."""
        return self.weight * self.alpha * self.omega_c**4 / (2.0 * self.omega_bm)

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("spectral density is defined for finite w >= 0 only")
        out = self._eval(w)
        return float(out) if out.ndim == 0 else out

    def _eval(self, w: np.ndarray) -> np.ndarray:
        if self.kind == "LA":
            return self.alpha * w**2 * np.exp(-((w / self.omega_c) ** 2))
        if self.kind == "SM":
            q = np.maximum(w**2 - self.gap**2, 0.0)
            r = self.ratio
            return self.alpha * q / r**4 * np.exp(-q / (r**2 * self.omega_c**2))
        x = (w - self.omega_bm) / self.width
        return self.bm_prefactor / (math.sqrt(math.pi) * self.width) * np.exp(-(x**2))

    def support(self) -> tuple[float, float]:
        """Interval outside which J is below ~1e-21 of its scale."""
        if self.kind == "LA":
            return 0.0, _GAUSS_SPAN * self.omega_c
        if self.kind == "SM":
            return self.gap, math.sqrt(self.gap**2 + (_GAUSS_SPAN * self.ratio * self.omega_c) ** 2)
        return self.omega_bm - _BM_SPAN * self.width, self.omega_bm + _BM_SPAN * self.width

    def feature_scale(self) -> float:
        """Frequency scale on which J varies; sets quadrature panel widths."""
        if self.kind == "LA":
            return self.omega_c
        if self.kind == "SM":
            return min(self.ratio * self.omega_c, math.sqrt(self.gap**2 + (self.ratio * self.omega_c) ** 2) - self.gap)
        return self.width


def total_density(densities: Sequence[SpectralDensity]):
    """Callable summing several spectral densities."""

    def J(omega):
        return sum(d(omega) for d in densities)

    return J


def _as_list(J) -> list[SpectralDensity]:
    if isinstance(J, SpectralDensity):
        return [J]
    return list(J)


# ---------------------------------------------------------------------------
# moments


def _moment(J: SpectralDensity, power: int, rtol: float) -> float:
    if J.is_zero:
        return 0.0
    lo, hi = J.support()

    def f(w):
        # quad never samples the interval ends, so w > 0 here
        return float(J._eval(np.asarray(w))) / w**power

    # split the range so quad resolves narrow features
    n_split = max(1, int(math.ceil((hi - lo) / J.feature_scale())))
    edges = np.linspace(lo, hi, n_split + 1)
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
        total += val
        err += e
    if err > rtol * abs(total):
        raise QuadratureError(f"moment integral of {J.label} not converged", total, err)
    return float(total)


def huang_rhys(J, rtol: float = 1e-8) -> float:
    """``S = int_0^inf J(w) / w^2 dw`` (dimensionless)."""
    return sum(_moment(j, 2, rtol) for j in _as_list(J))


def polaron_shift(J, rtol: float = 1e-8) -> float:
    """``D = int_0^inf J(w) / w dw`` in rad/ps."""
    return sum(_moment(j, 1, rtol) for j in _as_list(J))


def huang_rhys_la_closed_form(alpha: float, omega_c: float) -> float:
    return alpha * omega_c * math.sqrt(math.pi) / 2.0


def polaron_shift_la_closed_form(alpha: float, omega_c: float) -> float:
    return alpha * omega_c**2 / 2.0


# ---------------------------------------------------------------------------
# spectral quadrature for oscillatory time-domain transforms

_GL_HI = np.polynomial.legendre.leggauss(24)
_GL_LO = np.polynomial.legendre.leggauss(16)


def _panel_rule(J: SpectralDensity, t_max: float, rule):
    lo, hi = J.support()
    width = J.feature_scale() / 4.0
    if t_max > 0:
        width = min(width, math.pi / t_max)
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    x, wts = rule
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()
    return nodes, weights


def _coth_factor(omega: np.ndarray, temperature: float) -> np.ndarray:
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        return np.ones_like(omega)
    x = omega / (2.0 * kelvin_to_angular(temperature))
    with np.errstate(over="ignore"):
        return 1.0 / np.tanh(x)


def spectral_transform(J, temperature: float, times, kernel, rtol: float = 1e-9, atol: float = 1e-13):
    """Integrate ``J(w) * kernel(w, t, coth)`` over ``w`` for every ``t``.

    Gauss-Legendre panels no wider than half an oscillation period at the
    largest ``t``; the result is accepted when a 16-point and a 24-point
    rule agree to ``rtol`` (relative to the largest magnitude) or ``atol``.
    Returns ``(values, error_estimate)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    t_max = float(np.max(np.abs(times))) if times.size else 0.0
    total_hi = np.zeros(times.shape, dtype=complex)
    total_lo = np.zeros(times.shape, dtype=complex)
    for j in _as_list(J):
        if j.is_zero:
            continue
        for rule, acc in ((_GL_HI, total_hi), (_GL_LO, total_lo)):
            nodes, weights = _panel_rule(j, t_max, rule)
            jw = j._eval(nodes) * weights
            coth = _coth_factor(nodes, temperature)
            # chunk over times to bound memory
            for start in range(0, times.size, 256):
                tt = times[start : start + 256]
                acc[start : start + 256] += kernel(nodes[None, :], tt[:, None], coth[None, :]) @ jw
    err = float(np.max(np.abs(total_hi - total_lo))) if times.size else 0.0
    scale = float(np.max(np.abs(total_hi))) if times.size else 0.0
    if err > max(rtol * scale, atol):
        raise QuadratureError("oscillatory spectral quadrature not converged", total_hi, err)
    return total_hi, err


def _correlation_kernel(w, t, coth):
    return coth * np.cos(w * t) - 1j * np.sin(w * t)


@dataclass(frozen=True)
class BathCorrelation:
    """Bath autocorrelation ``C(t)`` sampled on a time grid."""

    temperature: float
    times: np.ndarray
    values: np.ndarray
    error_estimate: float
    source: tuple[str, ...] = field(default=())

    def at(self, index: int) -> complex:
        return complex(self.values[index])


def bath_correlation(J, temperature: float, times) -> BathCorrelation:
    """``C(t) = int J(w) [coth(hbar w / 2 kT) cos wt - i sin wt] dw``.

    Negative times are evaluated through ``C(-t) = conj(C(t))``.
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    times = np.asarray(times, dtype=float)
    vals, err = spectral_transform(J, temperature, np.abs(times), _correlation_kernel)
    vals = np.where(times < 0, np.conj(vals), vals)
    vals = np.where(times == 0, vals.real + 0j, vals)
    return BathCorrelation(temperature, times, vals, err, tuple(j.label for j in _as_list(J)))


def _g_kernel(w, t, coth):
    # second antiderivative of the correlation kernel divided by w^2
    s = np.sin(0.5 * w * t)
    return (coth * 2.0 * s * s - 1j * (w * t - np.sin(w * t))) / (w * w)


def lineshape_function(J, temperature: float, times) -> np.ndarray:
    """``g(t) = int_0^t dt' int_0^t' dt'' C(t'')`` (the cumulant lineshape)."""
    vals, _ = spectral_transform(J, temperature, times, _g_kernel)
    return vals


# ---------------------------------------------------------------------------
# dispersion data


@dataclass(frozen=True)
class DispersionTable:
    """Samples ``(|k| [1/A], w [rad/ps])`` of one phonon branch."""

    branch: str
    k: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        w = np.asarray(self.omega, dtype=float)
        if k.shape != w.shape or k.ndim != 1:
            raise ValueError("k and omega must be 1-D arrays of equal length")
        if np.any(k < 0) or np.any(np.diff(k) <= 0):
            raise ValueError("|k| must be non-negative and strictly increasing")
        if np.any(w < 0):
            raise ValueError("phonon frequencies must be non-negative")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "omega", w)


# w [rad/ps] = c [m/s] * k [1/A] * 1e-2
_K_TO_OMEGA = 1e-2


def fit_la_velocity(table: DispersionTable, k_window: float | None = None) -> float:
    """Sound velocity (m/s) from a least-squares fit of ``w = c|k|`` near Gamma."""
    k, w = table.k, table.omega
    if k_window is not None:
        keep = k <= k_window
        k, w = k[keep], w[keep]
    if k.size < 2:
        raise ValueError("need at least two dispersion samples for a velocity fit")
    slope = float(np.dot(k, w) / np.dot(k, k))
    return slope / _K_TO_OMEGA


def fit_sm_dispersion(table: DispersionTable, max_iter: int = 200) -> tuple[float, float]:
    """Fit ``w = sqrt(c^2 |k|^2 + M^2)``; returns ``(c [m/s], M [rad/ps])``."""
    from .lsq import FitConvergenceError, levenberg_marquardt

    k, w = table.k, table.omega
    if k.size < 3:
        raise ValueError("need at least three dispersion samples")
    # w^2 is linear in (c^2, M^2): exact start on noiseless data
    A = np.column_stack([(k * _K_TO_OMEGA) ** 2, np.ones_like(k)])
    c2, m2 = np.linalg.lstsq(A, w**2, rcond=None)[0]
    p0 = np.array([math.sqrt(max(c2, 1e-12)), math.sqrt(max(m2, 0.0))])

    def model(p):
        return np.sqrt((p[0] * k * _K_TO_OMEGA) ** 2 + p[1] ** 2)

    scale = max(float(np.max(w)), 1e-300)
    if np.max(np.abs(model(p0) - w)) <= 1e-12 * scale:
        return float(p0[0]), float(p0[1])
    try:
        res = levenberg_marquardt(lambda p: model(p) - w, p0, max_iter=max_iter)
    except FitConvergenceError as exc:
        raise RuntimeError(f"shear-mode dispersion fit did not converge (residual {exc.residual_norm:.3g})") from exc
    return float(abs(res.x[0])), float(abs(res.x[1]))


@dataclass(frozen=True)
class PhononModeCatalog:
    """Interlayer mode energies at Gamma versus W-W distance."""

    distance: np.ndarray  # A, strictly increasing
    e_sm: np.ndarray  # meV
    e_bm: np.ndarray  # meV

    def __post_init__(self):
        d = np.asarray(self.distance, dtype=float)
        order = np.argsort(d)
        d = d[order]
        sm = np.asarray(self.e_sm, dtype=float)[order]
        bm = np.asarray(self.e_bm, dtype=float)[order]
        if np.any(np.diff(d) <= 0):
            raise ValueError("duplicate interlayer distances in catalog")
        if np.any(np.diff(sm) >= 0) or np.any(np.diff(bm) >= 0):
            raise ValueError("mode energies must decrease strictly with interlayer distance")
        object.__setattr__(self, "distance", d)
        object.__setattr__(self, "e_sm", sm)
        object.__setattr__(self, "e_bm", bm)


def catalog_lookup(catalog: PhononModeCatalog, d: float) -> tuple[float, float]:
    """``(E_SM, E_BM)`` in meV at W-W distance ``d`` (A); linear interpolation, no extrapolation."""
    lo, hi = catalog.distance[0], catalog.distance[-1]
    if not lo - 1e-12 <= d <= hi + 1e-12:
        raise ValueError(f"interlayer distance {d} A outside tabulated range [{lo}, {hi}]")
    hit = np.isclose(catalog.distance, d, rtol=0, atol=1e-12)
    if hit.any():
        i = int(np.argmax(hit))
        return float(catalog.e_sm[i]), float(catalog.e_bm[i])
    return float(np.interp(d, catalog.distance, catalog.e_sm)), float(np.interp(d, catalog.distance, catalog.e_bm))


# ---------------------------------------------------------------------------
# text tables

_UNITS_RE = re.compile(r"^#\s*units\s*:\s*(.*)$", re.IGNORECASE)


def _parse_units(line: str) -> dict[str, str]:
    units = {}
    for item in line.replace(",", " ").split():
        if "=" not in item:
            raise ValueError(f"malformed units declaration {item!r}")
        key, val = item.split("=", 1)
        units[key.strip().lower()] = val.strip()
    return units


def _read_rows(text: str) -> tuple[dict[str, str], list[list[str]]]:
    units: dict[str, str] | None = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _UNITS_RE.match(line)
            if m:
                units = _parse_units(m.group(1))
            continue
        rows.append((lineno, line.split()))
    if units is None:
        raise ValueError("table lacks a '# units:' header line")
    return units, rows


def _to_angular(values: np.ndarray, unit: str) -> np.ndarray:
    if unit == "meV":
        return energy_to_angular(values)
    if unit == "rad/ps":
        return values
    raise ValueError(f"unsupported frequency unit {unit!r} (use meV or rad/ps)")


def parse_dispersion_tables(text: str) -> dict[str, DispersionTable]:
    """Parse ``branch k energy`` rows into one table per branch."""
    units, rows = _read_rows(text)
    if units.get("k") != "1/angstrom":
        raise ValueError("dispersion tables must declare k=1/angstrom")
    eunit = units.get("energy", "")
    by_branch: dict[str, tuple[list[float], list[float]]] = {}
    for lineno, cols in rows:
        if len(cols) != 3:
            raise ValueError(f"line {lineno}: expected 'branch k energy', got {len(cols)} columns")
        try:
            k, e = float(cols[1]), float(cols[2])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        ks, es = by_branch.setdefault(cols[0], ([], []))
        ks.append(k)
        es.append(e)
    return {
        name: DispersionTable(name, np.array(ks), _to_angular(np.array(es), eunit)) for name, (ks, es) in by_branch.items()
    }


def parse_catalog(text: str) -> PhononModeCatalog:
    units, rows = _read_rows(text)
    if units.get("d") != "angstrom" or units.get("energy") != "meV":
        raise ValueError("catalog must declare d=angstrom energy=meV")
    data = []
    for lineno, cols in rows:
        if len(cols) != 3:
            raise ValueError(f"line {lineno}: expected 'd E_SM E_BM'")
        try:
            data.append([float(c) for c in cols])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not data:
        raise ValueError("empty catalog")
    arr = np.array(data)
    return PhononModeCatalog(arr[:, 0], arr[:, 1], arr[:, 2])


_DATA_DIR = Path(__file__).resolve().parent / "data"


def load_dispersion_tables(path: str | Path | None = None) -> dict[str, DispersionTable]:
    path = Path(path) if path is not None else _DATA_DIR / "dispersion_bilayer_wse2.txt"
    return parse_dispersion_tables(path.read_text())


def load_catalog(path: str | Path | None = None) -> PhononModeCatalog:
    path = Path(path) if path is not None else _DATA_DIR / "interlayer_modes_wse2.txt"
    return parse_catalog(path.read_text())


# ---------------------------------------------------------------------------
# the bilayer environment


@dataclass(frozen=True)
class PhononParameters:
    """Material parameters for the four-mode bilayer environment."""

    alpha: float = 0.29  # ps
    omega_c: float = 2.03  # rad/ps
    bm_width: float = 0.2  # rad/ps
    xi_bm: float = 1.0
    ratio_sm1: float = 1.0
    ratio_sm2: float = 1.0
    la_velocity: float = 4.4e3  # m/s, reporting only

    def __post_init__(self):
        if self.alpha < 0 or self.omega_c <= 0 or self.bm_width <= 0 or self.xi_bm < 0:
            raise ValueError("invalid phonon parameters")
        if self.ratio_sm1 <= 0 or self.ratio_sm2 <= 0:
            raise ValueError("shear-mode velocity ratios must be positive")


def bilayer_modes(
    params: PhononParameters,
    e_sm_meV: float,
    e_bm_meV: float,
    enabled: Iterable[str] = ("LA", "SM1", "SM2", "BM"),
) -> list[SpectralDensity]:
    """Spectral densities for the enabled subset of ``LA, SM1, SM2, BM``."""
    gap = energy_to_angular(e_sm_meV)
    wbm = energy_to_angular(e_bm_meV)
    table = {
        "LA": lambda: SpectralDensity.la(params.alpha, params.omega_c),
        "SM1": lambda: SpectralDensity.shear(params.alpha, params.omega_c, gap, params.ratio_sm1, label="SM1"),
        "SM2": lambda: SpectralDensity.shear(params.alpha, params.omega_c, gap, params.ratio_sm2, label="SM2"),
        "BM": lambda: SpectralDensity.breathing(params.alpha, params.omega_c, wbm, params.bm_width, params.xi_bm),
    }
    out = []
    for name in enabled:
        if name not in table:
            raise ValueError(f"unknown phonon mode {name!r}")
        out.append(table[name]())
    return out


def mode_energy_meV(J: SpectralDensity) -> float:
    """Characteristic phonon energy: the gap for SM, the centre for BM, the cutoff for LA."""
    if J.kind == "SM":
        return float(angular_to_energy(J.gap))
    if J.kind == "BM":
        return float(angular_to_energy(J.omega_bm))
    return float(angular_to_energy(J.omega_c))


__all__ = [
    "BathCorrelation",
    "CONSTANTS",
    "DispersionTable",
    "PhononModeCatalog",
    "PhononParameters",
    "QuadratureError",
    "SpectralDensity",
    "bath_correlation",
    "bilayer_modes",
    "catalog_lookup",
    "fit_la_velocity",
    "fit_sm_dispersion",
    "huang_rhys",
    "lineshape_function",
    "load_catalog",
    "load_dispersion_tables",
    "mode_energy_meV",
    "parse_catalog",
    "parse_dispersion_tables",
    "polaron_shift",
    "spectral_transform",
    "total_density",
]
