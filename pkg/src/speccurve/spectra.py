"""Wavelength grid, tabulated spectra and the CIE daylight model."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CoverageError, FormatError, OutOfRange

DATA_ENV = "SPECCURVE_DATA_DIR"

# CIE daylight locus: y = -3.000 x^2 + 2.870 x - 0.275
DAYLIGHT_PARABOLA = (-3.000, 2.870, -0.275)
T_MIN = 4000.0
T_MAX = 25000.0


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavelength grid ``lambda_i = lambda_min + i * delta``."""

    n: int = 31
    lambda_min: float = 400.0
    lambda_max: float = 700.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least two samples")
        if not self.lambda_max > self.lambda_min:
            raise ValueError("lambda_max must exceed lambda_min")

    @property
    def delta(self) -> float:
        return (self.lambda_max - self.lambda_min) / (self.n - 1)

    @property
    def wavelengths(self) -> np.ndarray:
        return self.lambda_min + np.arange(self.n) * self.delta


DEFAULT_GRID = SpectralGrid()


@dataclass(frozen=True)
class SpectralCurve:
    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectral values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ObserverMatrix:
    """CIE 1931 2 degree colour matching functions as an n x 3 matrix."""

    grid: SpectralGrid
    data: np.ndarray


@dataclass(frozen=True)
class IlluminantMatrix:
    """Diagonal of the illuminant matrix: SPD samples times the grid step."""

    grid: SpectralGrid
    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=np.float64)
        if d.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {d.shape}")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("illuminant samples must be finite and non-negative")
        object.__setattr__(self, "diag", d)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


# -- CSV ingestion ------------------------------------------------------------

def read_spectral_table(path, grid: SpectralGrid = DEFAULT_GRID,
                        columns: tuple[str, ...] | None = None) -> np.ndarray:
    """Read a ``wavelength_nm,<cols...>`` CSV and resample it onto ``grid``.

    Returns an ``n x len(columns)`` array. Sources sampled differently from
    the grid are linearly interpolated.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "wavelength_nm" or len(header) < 2:
        raise FormatError(f"{path}: header must start with 'wavelength_nm'")
    if columns is not None and tuple(header[1:]) != tuple(columns):
        raise FormatError(f"{path}: expected columns {columns}, got {header[1:]}")
    width = len(header)
    table = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields")
        try:
            table.append([float(c) for c in row])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(table) < 2:
        raise FormatError(f"{path}: need at least two data rows")
    data = np.array(table)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite value")
    wl = data[:, 0]
    if np.any(np.diff(wl) <= 0):
        raise FormatError(f"{path}: wavelengths must be strictly ascending")
    if wl[0] > grid.lambda_min or wl[-1] < grid.lambda_max:
        raise CoverageError(
            f"{path}: covers {wl[0]:g}-{wl[-1]:g} nm, grid needs "
            f"{grid.lambda_min:g}-{grid.lambda_max:g} nm")
    target = grid.wavelengths
    return np.column_stack([np.interp(target, wl, data[:, j])
                            for j in range(1, width)])


def load_spd_csv(path, grid: SpectralGrid = DEFAULT_GRID) -> SpectralCurve:
    """Load a single-column ``wavelength_nm,value`` spectrum."""
    values = read_spectral_table(path, grid, ("value",))[:, 0]
    return SpectralCurve(grid, values)


def load_sensitivity_csv(path, grid: SpectralGrid = DEFAULT_GRID) -> np.ndarray:
    """Load an n x 3 ``wavelength_nm,r,g,b`` sensitivity table."""
    S = read_spectral_table(path, grid, ("r", "g", "b"))
    if np.any(S < 0):
        raise FormatError(f"{path}: negative sensitivity")
    return S


def save_sensitivity_csv(path, S: np.ndarray, grid: SpectralGrid = DEFAULT_GRID) -> None:
    """Write ``S`` with round-trip-exact float formatting."""
    S = np.asarray(S, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("wavelength_nm,r,g,b\n")
        for lam, row in zip(grid.wavelengths, S):
            fh.write(f"{lam:g}," + ",".join(repr(float(v)) for v in row) + "\n")


def load_observer_csv(path, grid: SpectralGrid = DEFAULT_GRID) -> ObserverMatrix:
    return ObserverMatrix(grid, read_spectral_table(path, grid, ("x", "y", "z")))


def load_reflectance_csv(path, grid: SpectralGrid = DEFAULT_GRID) -> tuple[list[str], np.ndarray]:
    """Load a patch-per-row reflectance table.

    Header is ``patch,<wavelength>,<wavelength>,...``; returns the patch
    names and an ``m x n`` matrix resampled onto ``grid``.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip() != "patch":
        raise FormatError(f"{path}: header must start with 'patch'")
    try:
        wl = np.array([float(c) for c in rows[0][1:]])
        names = [r[0] for r in rows[1:]]
        vals = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if vals.ndim != 2 or vals.shape[1] != wl.size or vals.shape[0] == 0:
        raise FormatError(f"{path}: ragged or empty table")
    if wl[0] > grid.lambda_min or wl[-1] < grid.lambda_max:
        raise CoverageError(f"{path}: reflectances do not span the grid")
    R = np.array([np.interp(grid.wavelengths, wl, v) for v in vals])
    return names, R


# -- bundled data -------------------------------------------------------------

def data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else Path(__file__).with_name("data")


def _bundled(name: str, grid: SpectralGrid) -> np.ndarray:
    # keyed on the resolved path so a changed data directory is honoured
    return _read_cached(data_dir() / name, grid)


@lru_cache(maxsize=None)
def _read_cached(path: Path, grid: SpectralGrid) -> np.ndarray:
    arr = read_spectral_table(path, grid)
    arr.setflags(write=False)
    return arr


def observer(grid: SpectralGrid = DEFAULT_GRID) -> ObserverMatrix:
    return ObserverMatrix(grid, _bundled("cie1931_2deg.csv", grid))


def illuminant_a(grid: SpectralGrid = DEFAULT_GRID) -> SpectralCurve:
    return SpectralCurve(grid, _bundled("illuminant_a.csv", grid)[:, 0])


def illuminant_d65(grid: SpectralGrid = DEFAULT_GRID) -> SpectralCurve:
    return SpectralCurve(grid, _bundled("illuminant_d65.csv", grid)[:, 0])


def daylight_components(grid: SpectralGrid = DEFAULT_GRID) -> np.ndarray:
    """The three CIE daylight basis functions as an n x 3 matrix."""
    return _bundled("daylight_components.csv", grid)


def colorchecker(grid: SpectralGrid = DEFAULT_GRID) -> tuple[list[str], np.ndarray]:
    """The 24 ColorChecker patch reflectances (BabelColor averages), m x n."""
    return load_reflectance_csv(data_dir() / "colorchecker_babelcolor.csv", grid)


# -- daylight model -----------------------------------------------------------

def _x_low(T):
    return 0.244063 + 0.09911e3 / T + 2.9678e6 / T**2 - 4.6070e9 / T**3


def _x_high(T):
    return 0.237040 + 0.24748e3 / T + 1.9018e6 / T**2 - 2.0064e9 / T**3


def daylight_y(x: float) -> float:
    a, b, c = DAYLIGHT_PARABOLA
    return a * x * x + b * x + c


def daylight_chromaticity(T: float) -> tuple[float, float]:
    """CIE xy chromaticity of the daylight illuminant at CCT ``T`` kelvin."""
    T = float(T)
    if not T_MIN <= T <= T_MAX:
        raise OutOfRange(f"CCT {T} K outside [{T_MIN:g}, {T_MAX:g}]")
    x = _x_low(T) if T <= 7000.0 else _x_high(T)
    return x, daylight_y(x)


def daylight_spd_xy(x: float, y: float, grid: SpectralGrid = DEFAULT_GRID) -> SpectralCurve:
    """Daylight SPD for a chromaticity; negative samples are clamped to 0."""
    m = 0.0241 + 0.2562 * x - 0.7341 * y
    m1 = (-1.3515 - 1.7703 * x + 5.9114 * y) / m
    m2 = (0.0300 - 31.4424 * x + 30.0717 * y) / m
    basis = daylight_components(grid)
    spd = basis[:, 0] + m1 * basis[:, 1] + m2 * basis[:, 2]
    return SpectralCurve(grid, np.maximum(spd, 0.0))


def daylight_spd(T: float, grid: SpectralGrid = DEFAULT_GRID) -> SpectralCurve:
    return daylight_spd_xy(*daylight_chromaticity(T), grid=grid)


def illuminant_matrix(spd: SpectralCurve) -> IlluminantMatrix:
    return IlluminantMatrix(spd.grid, spd.values * spd.grid.delta)


def xy_chromaticity(spd: SpectralCurve, obs: ObserverMatrix | None = None) -> tuple[float, float]:
    """CIE xy of an SPD integrated against the observer on its grid."""
    obs = obs or observer(spd.grid)
    X, Y, Z = spd.values @ obs.data
    s = X + Y + Z
    return float(X / s), float(Y / s)
