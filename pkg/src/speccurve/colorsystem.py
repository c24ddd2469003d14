"""Image formation and the color-matrix linear system.

Orientation follows the right-multiplying convention used throughout the
package: spectral matrices are n x 3 (rows are wavelengths), and a color
matrix ``C`` satisfies ``L @ S_xyz @ C ~= L @ S_cam``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from . import spectra
from .errors import NoUsableRecords, ShapeMismatch
from .numerics import as_matrix, pseudoinverse
from .spectra import IlluminantMatrix, ObserverMatrix

logger = logging.getLogger(__name__)

# "A", "D65", or the raw EXIF LightSource code of anything else
Illuminant = Union[str, int]
SUPPORTED_ILLUMINANTS = ("A", "D65")
ILLUMINANT_CODES = {17: "A", 21: "D65"}


def decode_illuminant(code: int) -> Illuminant:
    return ILLUMINANT_CODES.get(int(code), int(code))


def encode_illuminant(ill: Illuminant) -> int:
    if isinstance(ill, str):
        for code, name in ILLUMINANT_CODES.items():
            if name == ill:
                return code
        raise ValueError(f"unknown illuminant name {ill!r}")
    return int(ill)


def check_sensitivity(S, n: int | None = None) -> np.ndarray:
    """Validate an n x 3 non-negative, not-all-zero sensitivity matrix."""
    S = as_matrix(S, ndim=2)
    if S.shape[1] != 3 or (n is not None and S.shape[0] != n):
        raise ShapeMismatch(f"sensitivity must be n x 3, got {S.shape}")
    if np.any(S < 0):
        raise ValueError("sensitivity has negative entries")
    if not np.any(S > 0):
        raise ValueError("sensitivity is identically zero")
    return S


@dataclass(eq=False)
class ColorMatrixRecord:
    """A 3x3 color matrix in the package orientation plus its illuminant.

    Equality compares matrix and illuminant; ``source`` is provenance only.
    """

    matrix: np.ndarray
    illuminant: Illuminant
    source: str = "Synthetic"

    def __eq__(self, other):
        if not isinstance(other, ColorMatrixRecord):
            return NotImplemented
        return self.illuminant == other.illuminant and np.array_equal(self.matrix, other.matrix)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape != (3, 3):
            raise ShapeMismatch(f"color matrix must be 3x3, got {m.shape}")
        self.matrix = m

    @property
    def usable(self) -> bool:
        return self.illuminant in SUPPORTED_ILLUMINANTS


@dataclass
class SpecificSystem:
    """Blocks ``(A_i, B_i)`` with ``A_i @ S ~= B_i`` for the true sensitivity."""

    blocks_a: list[np.ndarray]
    blocks_b: list[np.ndarray]
    illuminants: list[Illuminant] = field(default_factory=list)

    def __post_init__(self):
        if len(self.blocks_a) != len(self.blocks_b) or not self.blocks_a:
            raise ValueError("need matching, non-empty block lists")

    def __len__(self):
        return len(self.blocks_a)


def _diag(L) -> np.ndarray:
    return L.diag if isinstance(L, IlluminantMatrix) else np.asarray(L, dtype=np.float64)


def render(R, L, S) -> np.ndarray:
    """Camera responses ``(R @ L) @ S`` for patch reflectances ``R`` (m x n)."""
    R = np.atleast_2d(as_matrix(R))
    d = _diag(L)
    S = as_matrix(S, ndim=2)
    if R.shape[1] != d.size or S.shape[0] != d.size:
        raise ShapeMismatch(f"R {R.shape}, L {d.shape}, S {S.shape} do not conform")
    return (R * d) @ S


def forward_color_matrix(S, L, obs: ObserverMatrix | None = None) -> np.ndarray:
    """Least-squares color matrix ``(L S_xyz)^+ L S``."""
    d = _diag(L)
    obs = obs or spectra.observer()
    LX = d[:, None] * obs.data
    return pseudoinverse(LX) @ (d[:, None] * as_matrix(S, ndim=2))


def system_block(L, obs: ObserverMatrix | None = None) -> np.ndarray:
    """The 3 x n operator ``(L S_xyz)^+ L``."""
    d = _diag(L)
    obs = obs or spectra.observer()
    return pseudoinverse(d[:, None] * obs.data) * d[None, :]


def default_illuminants(grid=spectra.DEFAULT_GRID) -> dict[str, IlluminantMatrix]:
    return {"A": spectra.illuminant_matrix(spectra.illuminant_a(grid)),
            "D65": spectra.illuminant_matrix(spectra.illuminant_d65(grid))}


def build_specific_system(records, obs: ObserverMatrix | None = None,
                          illums: Mapping[str, IlluminantMatrix] | None = None) -> SpecificSystem:
    """Stack one ``(A_i, B_i)`` block per record with a supported illuminant.

    Records calibrated under any other illuminant are dropped with a warning.
    """
    obs = obs or spectra.observer()
    illums = illums or default_illuminants(obs.grid)
    blocks_a, blocks_b, names = [], [], []
    for rec in records:
        if rec.illuminant not in illums:
            logger.warning("dropping color matrix with unsupported illuminant %r",
                           rec.illuminant)
            continue
        blocks_a.append(system_block(illums[rec.illuminant], obs))
        blocks_b.append(np.array(rec.matrix, dtype=np.float64))
        names.append(rec.illuminant)
    if not blocks_a:
        raise NoUsableRecords("no color matrix calibrated under A or D65")
    return SpecificSystem(blocks_a, blocks_b, names)


def synthesize_records(S, obs: ObserverMatrix | None = None,
                       illums: Mapping[str, IlluminantMatrix] | None = None,
                       which=SUPPORTED_ILLUMINANTS) -> list[ColorMatrixRecord]:
    """Exact color matrices of a known sensitivity under each named illuminant."""
    obs = obs or spectra.observer()
    illums = illums or default_illuminants(obs.grid)
    return [ColorMatrixRecord(forward_color_matrix(S, illums[k], obs), k, "Synthetic")
            for k in which]
