"""Reconstruction and color error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroChannel, ZeroSum, ZeroVector


@dataclass(frozen=True)
class ErrorReport:
    re_mean: float
    re_per_channel: tuple[float, float, float]
    rmse_per_channel: tuple[float, float, float]


def relative_full_scale_error(S_hat, S) -> ErrorReport:
    """Per-channel RMSE divided by the reference channel maximum, and its mean."""
    S_hat = np.asarray(S_hat, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S_hat.shape != S.shape or S.ndim != 2:
        raise ValueError(f"shape mismatch {S_hat.shape} vs {S.shape}")
    peak = S.max(axis=0)
    if np.any(peak <= 0):
        raise ZeroChannel("reference channel has no positive entry")
    rmse = np.sqrt(np.mean((S_hat - S) ** 2, axis=0))
    re = rmse / peak
    return ErrorReport(float(re.mean()), tuple(float(v) for v in re),
                       tuple(float(v) for v in rmse))


def angular_rgb_error(actual, predicted) -> float:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    na, npred = np.linalg.norm(a), np.linalg.norm(p)
    if na == 0 or npred == 0:
        raise ZeroVector("angular error of a zero RGB vector")
    # atan2 form is exact for parallel vectors, unlike a clamped arccos
    return float(np.arctan2(np.linalg.norm(np.cross(a, p)), a @ p))


def chromaticity(rgb) -> tuple[float, float]:
    """``(r, b)`` = ``(R, B) / (R + G + B)``."""
    R, G, B = (float(v) for v in rgb)
    s = R + G + B
    if s <= 0:
        raise ZeroSum("chromaticity of an RGB triple with non-positive sum")
    return R / s, B / s
