"""Ground-truth database, data augmentation and autoencoder training.

A sensitivity S (n x 3) enters the network as a length-3n vector laid out
channel by channel: all red samples, then green, then blue.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import spectra
from .colorsystem import check_sensitivity
from .errors import EmptyDatabase, ZeroChannel
from .nn import (AutoencoderWeights, TrainState, ae_backward, ae_forward,
                 scheduler_update, sgd_step)

logger = logging.getLogger(__name__)


def flatten(S: np.ndarray) -> np.ndarray:
    """n x 3 (or batch x n x 3) -> 3n (or batch x 3n), channel-major."""
    S = np.asarray(S)
    if S.ndim == 2:
        return S.T.reshape(-1)
    return S.transpose(0, 2, 1).reshape(S.shape[0], -1)


def unflatten(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        return x.reshape(3, -1).T
    return x.reshape(x.shape[0], 3, -1).transpose(0, 2, 1)


def max_normalize(S: np.ndarray) -> np.ndarray:
    m = float(np.max(S))
    if m <= 0:
        raise ValueError("cannot max-normalize a non-positive matrix")
    return S / m


# -- database -------------------------------------------------------------------

@dataclass
class DatabaseEntry:
    camera_id: str
    source: str
    S: np.ndarray
    brand: str | None = None

    @property
    def brand_key(self) -> str:
        return (self.brand or self.camera_id.split()[0]).lower()


@dataclass
class SensitivityDatabase:
    """Max-normalized ground-truth sensitivities grouped by camera."""

    entries: list[DatabaseEntry]
    grid: spectra.SpectralGrid = spectra.DEFAULT_GRID

    def __post_init__(self):
        for e in self.entries:
            e.S = max_normalize(check_sensitivity(e.S, self.grid.n))

    def __len__(self):
        return len(self.entries)

    def group_key(self, entry: DatabaseEntry, group_by: str = "camera") -> str:
        if group_by == "camera":
            return entry.camera_id
        if group_by == "brand":
            return entry.brand_key
        raise ValueError(f"group_by must be 'camera' or 'brand', got {group_by!r}")

    def groups(self, group_by: str = "camera") -> dict[str, list[DatabaseEntry]]:
        out: dict[str, list[DatabaseEntry]] = {}
        for e in self.entries:
            out.setdefault(self.group_key(e, group_by), []).append(e)
        return out

    def without(self, exclude, group_by: str = "camera") -> "SensitivityDatabase":
        exclude = set(exclude)
        kept = [e for e in self.entries if self.group_key(e, group_by) not in exclude]
        return SensitivityDatabase(kept, self.grid)

    def stack(self) -> np.ndarray:
        return np.stack([e.S for e in self.entries])

    def mean(self) -> np.ndarray:
        """Elementwise mean sensitivity, the estimator's starting point."""
        if not self.entries:
            raise EmptyDatabase("mean of an empty database")
        return self.stack().mean(axis=0)


def load_database(manifest_path, grid: spectra.SpectralGrid = spectra.DEFAULT_GRID) -> SensitivityDatabase:
    """Read a manifest JSON listing ``camera_id``, ``source`` and ``file``.

    ``file`` paths are relative to the manifest; each points to a
    ``wavelength_nm,r,g,b`` CSV.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    items = doc["entries"] if isinstance(doc, dict) else doc
    entries = []
    for item in items:
        S = spectra.load_sensitivity_csv(manifest_path.parent / item["file"], grid)
        entries.append(DatabaseEntry(str(item["camera_id"]), str(item.get("source", "")),
                                     S, item.get("brand")))
    return SensitivityDatabase(entries, grid)


def save_database(db: SensitivityDatabase, directory) -> Path:
    """Write one CSV per entry plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = []
    for i, e in enumerate(db.entries):
        fname = f"{i:03d}_{_slug(e.camera_id)}.csv"
        spectra.save_sensitivity_csv(directory / fname, e.S, db.grid)
        item = {"camera_id": e.camera_id, "source": e.source, "file": fname}
        if e.brand is not None:
            item["brand"] = e.brand
        items.append(item)
    path = directory / "manifest.json"
    path.write_text(json.dumps(items, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in s.lower()).strip("_") or "camera"


# -- augmentation ---------------------------------------------------------------

@dataclass(frozen=True)
class AugmentParams:
    h: float = 0.2
    g: int = 2
    roll_mode: str = "per_column"

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.roll_mode not in ("per_column", "global"):
            raise ValueError("roll_mode must be 'per_column' or 'global'")


def roll_matrices(batch: int, n: int, g: int, rng, roll_mode: str = "per_column") -> np.ndarray:
    """Random 0/1 matrices with exactly one 1 per column.

    Column i carries its 1 at row ``(i + u) mod n``, ``u`` uniform on
    ``{-g..g}`` drawn per column (or once per matrix for ``"global"``).
    """
    if g >= n:
        raise ValueError("roll radius must be smaller than n")
    if roll_mode == "global":
        u = np.repeat(rng.integers(-g, g + 1, size=(batch, 1)), n, axis=1)
    else:
        u = rng.integers(-g, g + 1, size=(batch, n))
    cols = np.arange(n)
    rows = (cols[None, :] + u) % n
    G = np.zeros((batch, n, n))
    G[np.arange(batch)[:, None], rows, cols[None, :]] = 1.0
    return G


def augment_batch(S: np.ndarray, p: AugmentParams, rng) -> np.ndarray:
    """Apply ``S -> G S H`` independently to every matrix of a b x n x 3 stack."""
    b, n, _ = S.shape
    H = rng.uniform(p.h, 1.0, size=(b, 1, 3))
    if p.g == 0:
        return S * H
    return (roll_matrices(b, n, p.g, rng, p.roll_mode) @ S) * H


def augment(S: np.ndarray, p: AugmentParams, rng) -> np.ndarray:
    return augment_batch(np.asarray(S, dtype=np.float64)[None], p, rng)[0]


# -- loss -----------------------------------------------------------------------

def delta_metric(U, V) -> float:
    """Channel-normalized distance: the 2-norm of ``(U_k - V_k) / |U_k|`` stacked."""
    return float(delta_loss(np.asarray(U, float)[None], np.asarray(V, float)[None])[0])


def delta_loss(U: np.ndarray, V: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean channel-normalized distance over a batch and its gradient in ``V``."""
    norms2 = np.sum(U * U, axis=1, keepdims=True)
    if np.any(norms2 == 0):
        raise ZeroChannel("reference channel with zero norm")
    diff = U - V
    # per-channel squared norms first, so V = 0 gives exact unit ratios
    d = np.sqrt(np.sum(np.sum(diff * diff, axis=1, keepdims=True) / norms2, axis=(1, 2)))
    b = U.shape[0]
    safe = np.where(d > 0, d, 1.0)
    grad = -(diff / norms2) / safe[:, None, None] / b
    grad[d == 0] = 0.0
    return float(d.mean()), grad


# -- training -------------------------------------------------------------------

@dataclass(frozen=True)
class TrainParams:
    h: float = 0.2
    g: int = 2
    lr: float = 1e-1
    momentum: float = 0.5
    weight_decay: float = 1e-4
    scheduler_decay: float = 0.5
    patience: int = 2000
    stop_lr: float = 1e-5
    threshold: float = 1e-4
    dropout: str = "retain"
    roll_mode: str = "per_column"
    max_steps: int | None = None

    @property
    def augment(self) -> AugmentParams:
        return AugmentParams(self.h, self.g, self.roll_mode)


@dataclass
class TrainResult:
    weights: AutoencoderWeights
    steps: int
    initial_loss: float
    final_loss: float
    training_ids: list[str] = field(default_factory=list)
    losses: np.ndarray | None = None


def reconstruction_loss(w: AutoencoderWeights, data: np.ndarray) -> float:
    """Eval-mode mean channel-normalized distance on an unaugmented stack."""
    out, _ = ae_forward(w, flatten(data), "eval")
    return delta_loss(data, unflatten(out))[0]


def fit_autoencoder(db: SensitivityDatabase, exclude=(), params: TrainParams = TrainParams(),
                    seed: int = 0, group_by: str = "camera") -> TrainResult:
    """Full-batch SGD on fresh augmentations of every retained curve per step."""
    kept = db.without(exclude, group_by) if exclude else db
    if not kept.entries:
        raise EmptyDatabase("no training curves left after exclusion")
    data = kept.stack()
    rng = np.random.default_rng(seed)
    w = AutoencoderWeights.initialize(db.grid.n, rng)
    state = TrainState(w, lr=params.lr)
    aug = params.augment
    initial = reconstruction_loss(w, data)
    grad_flat, grad_views = w.grad_buffer()
    losses = []
    steps = 0
    while state.lr >= params.stop_lr:
        if params.max_steps is not None and steps >= params.max_steps:
            break
        batch = augment_batch(data, aug, rng)
        out, cache = ae_forward(w, flatten(batch), "train", rng, params.dropout)
        loss, dV = delta_loss(batch, unflatten(out))
        ae_backward(cache, flatten(dV), out=grad_views)
        sgd_step(state, grad_flat, params.momentum, params.weight_decay)
        scheduler_update(state, loss, params.scheduler_decay, params.patience, params.threshold)
        losses.append(loss)
        steps += 1
    final = reconstruction_loss(w, data)
    ids = sorted({e.camera_id for e in kept.entries})
    logger.info("trained autoencoder on %d curves: %d steps, loss %.4f -> %.4f",
                len(kept), steps, initial, final)
    return TrainResult(w, steps, initial, final, ids, np.array(losses))


def train_autoencoder(db: SensitivityDatabase, exclude=(), params: TrainParams = TrainParams(),
                      seed: int = 0, group_by: str = "camera") -> AutoencoderWeights:
    return fit_autoencoder(db, exclude, params, seed, group_by).weights


# -- synthetic data -------------------------------------------------------------

def _bump(wl, mu, sigma):
    return np.exp(-0.5 * ((wl - mu) / sigma) ** 2)


def synthetic_sensitivity(rng, grid: spectra.SpectralGrid = spectra.DEFAULT_GRID) -> np.ndarray:
    """A plausible three-channel camera built from Gaussian bumps."""
    wl = grid.wavelengths
    r = rng.uniform(0.55, 0.85) * _bump(wl, rng.uniform(590, 615), rng.uniform(22, 32))
    r += rng.uniform(0.02, 0.08) * _bump(wl, rng.uniform(430, 460), 25.0)
    g = _bump(wl, rng.uniform(520, 545), rng.uniform(32, 42))
    b = rng.uniform(0.55, 0.9) * _bump(wl, rng.uniform(445, 470), rng.uniform(20, 30))
    b += rng.uniform(0.02, 0.06) * _bump(wl, rng.uniform(520, 540), 30.0)
    return max_normalize(np.column_stack([r, g, b]))


def synthetic_database(count: int = 20, seed: int = 0, duplicates: int = 0,
                       noise: float = 0.02,
                       grid: spectra.SpectralGrid = spectra.DEFAULT_GRID) -> SensitivityDatabase:
    """``count`` synthetic cameras; the first ``duplicates`` get a second,
    slightly perturbed measurement under another source name."""
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(count):
        S = synthetic_sensitivity(rng, grid)
        cid = f"synthetic cam{i:02d}"
        entries.append(DatabaseEntry(cid, "generator", S, "synthetic"))
        if i < duplicates:
            S2 = np.clip(S * (1.0 + noise * rng.standard_normal(S.shape)), 0.0, None)
            entries.append(DatabaseEntry(cid, "generator-b", S2, "synthetic"))
    return SensitivityDatabase(entries, grid)


def with_params(params: TrainParams, **overrides) -> TrainParams:
    return replace(params, **{k: v for k, v in overrides.items() if v is not None})
