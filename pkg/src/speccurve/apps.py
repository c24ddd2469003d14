"""Things a known sensitivity makes easy.

* correlated color temperature of a daylight scene from a color chart,
* underwater diffuse attenuation from a chart photographed at depth,
* the daylight chromaticity locus in a camera's own rb space,
* a global raw-to-raw 3x3 map between two cameras.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import spectra
from .colorsystem import render
from .errors import FormatError, NonConvergence, RankDeficient, SingularSystem, ZeroVector
from .metrics import chromaticity
from .numerics import COS_CLAMP, pseudoinverse
from .spectra import IlluminantMatrix, SpectralGrid

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
NONMONOTONE_MEMORY = 10


def load_rgb_csv(path) -> tuple[list[str] | None, np.ndarray]:
    """Observed responses, one patch per row: ``[patch,]r,g,b``."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty file")
    head = [c.strip().lower() for c in rows[0]]
    named = head[:1] == ["patch"]
    if head[int(named):] != ["r", "g", "b"]:
        raise FormatError(f"{path}: header must be [patch,]r,g,b")
    try:
        vals = np.array([[float(c) for c in r[int(named):]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if vals.ndim != 2 or vals.shape[0] == 0 or vals.shape[1] != 3:
        raise FormatError(f"{path}: ragged or empty table")
    return ([r[0] for r in rows[1:]] if named else None), vals


def save_rgb_csv(path, rgb, names=None) -> None:
    rgb = np.atleast_2d(np.asarray(rgb, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["patch"] if names is not None else []) + ["r", "g", "b"])
        for i, row in enumerate(rgb):
            w.writerow(([names[i]] if names is not None else []) + [repr(float(v)) for v in row])


def select_patches(names, R, wanted) -> np.ndarray:
    """Rows of ``R`` for the patch names in ``wanted`` (all rows when None)."""
    if wanted is None:
        return R
    index = {n: i for i, n in enumerate(names)}
    missing = [w for w in wanted if w not in index]
    if missing:
        raise FormatError(f"unknown patches: {', '.join(missing)}")
    return R[[index[w] for w in wanted]]


def _row_angles(I_obs: np.ndarray, P: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(I_obs, axis=1)
    npred = np.linalg.norm(P, axis=1)
    if np.any(na == 0) or np.any(npred == 0):
        raise ZeroVector("zero RGB row")
    return np.arctan2(np.linalg.norm(np.cross(I_obs, P), axis=1), np.sum(I_obs * P, axis=1))


def _row_angles_grad(I_obs: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row angles and d(angle_k)/d(P_k)."""
    na = np.linalg.norm(I_obs, axis=1, keepdims=True)
    npred = np.linalg.norm(P, axis=1, keepdims=True)
    if np.any(na == 0) or np.any(npred == 0):
        raise ZeroVector("zero RGB row")
    c = np.sum(I_obs * P, axis=1, keepdims=True) / (na * npred)
    cc = np.clip(c, -1.0 + COS_CLAMP, 1.0 - COS_CLAMP)
    theta = np.arccos(cc)[:, 0]
    dP = -1.0 / np.sqrt(1.0 - cc * cc) * (I_obs / (na * npred) - c * P / (npred * npred))
    return theta, dP


# -- CCT ----------------------------------------------------------------------

def cct_objective(T: float, S, R, I_obs) -> float:
    """2-norm of per-patch angular errors under the daylight SPD at ``T``."""
    grid = SpectralGrid(np.asarray(S).shape[0])
    L = spectra.illuminant_matrix(spectra.daylight_spd(T, grid))
    return float(np.linalg.norm(_row_angles(np.atleast_2d(I_obs), render(R, L, S))))


def estimate_cct(S, R, I_obs, t_min: float = spectra.T_MIN, t_max: float = spectra.T_MAX,
                 step: float = 100.0, tol: float = 0.01) -> float:
    """Daylight CCT best explaining observed chart RGBs.

    A coarse scan at ``step`` kelvin picks a bracket, then golden-section
    search narrows it to ``tol`` kelvin.
    """
    I_obs = np.atleast_2d(np.asarray(I_obs, dtype=np.float64))
    grid_T = np.arange(t_min, t_max + 0.5 * step, step)
    grid_T[-1] = min(grid_T[-1], t_max)
    vals = [cct_objective(T, S, R, I_obs) for T in grid_T]
    i = int(np.argmin(vals))
    a, b = grid_T[max(i - 1, 0)], grid_T[min(i + 1, len(grid_T) - 1)]
    x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    f1, f2 = cct_objective(x1, S, R, I_obs), cct_objective(x2, S, R, I_obs)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = cct_objective(x1, S, R, I_obs)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = cct_objective(x2, S, R, I_obs)
    best = 0.5 * (a + b)
    # the bracket ends can beat the interior on a flat or boundary optimum
    candidates = [(cct_objective(best, S, R, I_obs), best), (vals[i], float(grid_T[i]))]
    return float(min(candidates)[1])


# -- attenuation --------------------------------------------------------------

def interpolation_matrix(n: int, n_hat: int) -> np.ndarray:
    """n x n_hat matrix mapping node values to their linear interpolant on the grid."""
    nodes = np.linspace(0.0, 1.0, n_hat)
    x = np.linspace(0.0, 1.0, n)
    return np.column_stack([np.interp(x, nodes, e) for e in np.eye(n_hat)])


@dataclass
class AttenuationProblem:
    S: np.ndarray
    R: np.ndarray
    I_obs: np.ndarray
    depth: float
    P: np.ndarray
    surface: np.ndarray  # surface illuminant diagonal (SPD x delta)

    def value_and_grad(self, K) -> tuple[float, np.ndarray]:
        """Sum of squared per-patch angles and its gradient in the node values."""
        K = np.asarray(K, dtype=np.float64)
        diag = self.surface * np.exp(-(self.P @ K) * self.depth)
        pred = (self.R * diag) @ self.S
        theta, dpred = _row_angles_grad(self.I_obs, pred)
        dtheta = 2.0 * theta[:, None] * dpred
        # pred_k = sum_i R_ki diag_i S_i  ->  d/d diag_i = sum_k R_ki (dtheta_k . S_i)
        ddiag = np.sum(self.R * (dtheta @ self.S.T), axis=0)
        dK = self.P.T @ (ddiag * diag * -self.depth)
        return float(theta @ theta), dK

    def norm_value_and_grad(self, K) -> tuple[float, np.ndarray]:
        """The 2-norm of per-patch angles (square root of the above)."""
        v, g = self.value_and_grad(K)
        r = math.sqrt(v)
        return r, (g / (2.0 * r) if r > 0 else np.zeros_like(g))


def attenuation_problem(S, R, I_obs, depth_m: float, n_hat: int = 10,
                        surface: spectra.SpectralCurve | None = None) -> AttenuationProblem:
    S = np.asarray(S, dtype=np.float64)
    grid = SpectralGrid(S.shape[0])
    surface = surface or spectra.illuminant_d65(grid)
    if depth_m <= 0:
        raise ValueError("depth must be positive")
    return AttenuationProblem(S, np.atleast_2d(np.asarray(R, float)),
                              np.atleast_2d(np.asarray(I_obs, float)), float(depth_m),
                              interpolation_matrix(grid.n, n_hat),
                              spectra.illuminant_matrix(surface).diag)


def estimate_attenuation(S, R, I_obs, depth_m: float, n_hat: int = 10,
                         bounds: tuple[float, float] = (0.0, 1.0), k0=None,
                         max_iter: int = 20000, tol: float = 1e-5,
                         surface: spectra.SpectralCurve | None = None) -> np.ndarray:
    """Diffuse attenuation node values ``K`` (1/m) within ``bounds``.

    Spectral projected gradient descent: Barzilai-Borwein step lengths
    with a nonmonotone Armijo backtrack against the worst of the last few
    objective values. The objective is the sum of squared per-patch angles
    (same minimizers as their 2-norm). The search starts from ``k0``, by
    default the lower bound, i.e. no attenuation.

    Iterates live in optical depth ``u = K * depth``; the objective only sees
    ``u``, so halving ``K`` while doubling the depth retraces the same path.
    A constant offset in ``K`` only rescales every patch and is invisible to
    the angular objective.
    """
    prob = attenuation_problem(S, R, I_obs, depth_m, n_hat, surface)
    y = prob.depth
    lo, hi = bounds[0] * y, bounds[1] * y
    K0 = np.full(n_hat, bounds[0]) if k0 is None else np.asarray(k0, dtype=np.float64)
    u = np.clip(K0 * y, lo, hi)

    def fg(u):
        f, gK = prob.value_and_grad(u / y)
        return f, gK / y

    f, g = fg(u)
    recent = [f]
    best_u, best_f = u, f
    # the first step may move a node by at most half an e-fold, otherwise
    # exp(-u) saturates and the gradient vanishes
    step = 0.5 / max(float(np.max(np.abs(g))), 1e-300)
    for _ in range(max_iter):
        if np.linalg.norm(u - np.clip(u - g, lo, hi)) < tol or f < tol * tol:
            return u / y
        d = np.clip(u - step * g, lo, hi) - u
        ref = max(recent)
        t = 1.0
        while True:
            trial = u + t * d
            ft, gt = fg(trial)
            if ft <= ref + 1e-4 * t * (g @ d):
                break
            t *= 0.5
            if t * np.max(np.abs(d)) < 1e-16:
                # no descent possible at machine precision: stationary
                return best_u / y
        s_, d_ = trial - u, gt - g
        u, f, g = trial, ft, gt
        if f < best_f:
            best_u, best_f = u, f
        recent = (recent + [f])[-NONMONOTONE_MEMORY:]
        curv = float(s_ @ d_)
        step = float(s_ @ s_) / curv if curv > 0 else 1e6
        step = min(max(step, 1e-12), 1e6)
    raise NonConvergence(f"attenuation search did not converge in {max_iter} iterations",
                         best=best_u / y)


# -- locus --------------------------------------------------------------------

def daylight_locus(S, t_min: float = spectra.T_MIN, t_max: float = spectra.T_MAX,
                   steps: int = 100) -> np.ndarray:
    """rb chromaticities of daylight white points in the camera, ordered by CCT."""
    if steps < 2:
        raise ValueError("need at least two locus points")
    S = np.asarray(S, dtype=np.float64)
    grid = SpectralGrid(S.shape[0])
    ones = np.ones((1, grid.n))
    pts = []
    for T in np.linspace(t_min, t_max, steps):
        L = spectra.illuminant_matrix(spectra.daylight_spd(T, grid))
        pts.append(chromaticity(render(ones, L, S)[0]))
    return np.array(pts)


@dataclass(frozen=True)
class LocusMatch:
    distance: float
    on_locus: bool

    @property
    def off_locus(self) -> bool:
        return not self.on_locus


def distance_to_polyline(point, polyline) -> float:
    p = np.asarray(point, dtype=np.float64)
    poly = np.asarray(polyline, dtype=np.float64)
    a, b = poly[:-1], poly[1:]
    ab = b - a
    len2 = np.sum(ab * ab, axis=1)
    t = np.where(len2 > 0, np.sum((p - a) * ab, axis=1) / np.where(len2 > 0, len2, 1.0), 0.0)
    proj = a + np.clip(t, 0.0, 1.0)[:, None] * ab
    return float(np.min(np.linalg.norm(proj - p, axis=1)))


def classify_near_locus(point, locus, threshold: float) -> LocusMatch:
    d = distance_to_polyline(point, locus)
    return LocusMatch(d, d <= threshold)


# -- raw to raw ---------------------------------------------------------------

def standard_illuminants(grid: SpectralGrid = spectra.DEFAULT_GRID) -> dict[str, IlluminantMatrix]:
    """A, D65 and the daylight series D40..D75 (bundled tables plus the daylight model)."""
    out = {"A": spectra.illuminant_matrix(spectra.illuminant_a(grid)),
           "D65": spectra.illuminant_matrix(spectra.illuminant_d65(grid))}
    for nominal in (40, 45, 50, 55, 60, 70, 75):
        T = nominal * 100 * 1.4388 / 1.4380
        out[f"D{nominal}"] = spectra.illuminant_matrix(spectra.daylight_spd(T, grid))
    return out


def raw_to_raw_map(S_src, S_tgt, R, illums, white_balance: bool = False,
                   white_patch: int | None = None) -> np.ndarray:
    """Least-squares 3x3 ``M`` with ``I_src @ M ~= I_tgt`` over all illuminants.

    With ``white_balance`` each camera's responses under each illuminant are
    first divided channelwise by its response to ``white_patch`` (default:
    the patch with the highest mean reflectance).
    """
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    if white_balance and white_patch is None:
        white_patch = int(np.argmax(R.mean(axis=1)))
    src, tgt = [], []
    for L in illums:
        a, b = render(R, L, S_src), render(R, L, S_tgt)
        if white_balance:
            a = a / a[white_patch]
            b = b / b[white_patch]
        src.append(a)
        tgt.append(b)
    I_src, I_tgt = np.vstack(src), np.vstack(tgt)
    if I_src.shape[0] < 3:
        raise RankDeficient("need at least three stacked responses")
    try:
        return pseudoinverse(I_src) @ I_tgt
    except SingularSystem as exc:
        raise RankDeficient(f"source responses are rank deficient: {exc}") from None
