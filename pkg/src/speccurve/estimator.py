"""Sensitivity estimation from color matrices with an autoencoder prior.

Minimizes, over non-negative n x 3 matrices S,

    alpha * sum_i angle(A_i S, B_i) + beta * angle(S, AE(S))

with projected SGD (negatives clamped after every step) and a
reduce-on-plateau learning-rate schedule that also provides the stop rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import spectra
from .colorsystem import SpecificSystem, build_specific_system
from .errors import DivergedToZero
from .nn import AutoencoderWeights, ae_backward, ae_forward, scheduler_update
from .numerics import angular_distance_grad
from .prior import flatten, max_normalize, unflatten

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorParams:
    alpha: float = 1e2
    beta: float = 2e-1
    lr: float = 8e-4
    scheduler_decay: float = 0.5
    scheduler_patience: int = 2000
    stop_lr: float = 4e-4
    threshold: float = 1e-4
    max_steps: int | None = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.lr > self.stop_lr:
            raise ValueError("initial lr must exceed stop_lr")


def specific_term(S, system: SpecificSystem) -> float:
    return sum(angular_distance_grad(A @ S, B)[0]
               for A, B in zip(system.blocks_a, system.blocks_b))


def universal_term(S, w: AutoencoderWeights) -> float:
    recon, _ = ae_forward(w, flatten(S), "eval")
    return angular_distance_grad(S, unflatten(recon))[0]


def objective(S, system: SpecificSystem, w: AutoencoderWeights | None,
              alpha: float = 1e2, beta: float = 2e-1) -> tuple[float, np.ndarray]:
    """Objective value and its exact gradient with respect to ``S``.

    The prior term is differentiated through both of its arguments,
    including the path through the (eval-mode) autoencoder.
    """
    S = np.asarray(S, dtype=np.float64)
    value = 0.0
    grad = np.zeros_like(S)
    if alpha:
        for A, B in zip(system.blocks_a, system.blocks_b):
            theta, dU, _ = angular_distance_grad(A @ S, B)
            value += alpha * theta
            grad += alpha * (A.T @ dU)
    if beta and w is not None:
        x = flatten(S)
        recon, cache = ae_forward(w, x, "eval")
        theta, dS, dR = angular_distance_grad(S, unflatten(recon))
        _, through = ae_backward(cache, flatten(dR))
        value += beta * theta
        grad += beta * (dS + unflatten(through))
    return value, grad


@dataclass
class _Schedule:
    lr: float
    best_loss: float = float("inf")
    patience_counter: int = 0


@dataclass
class EstimateResult:
    S: np.ndarray
    steps: int
    initial_value: float
    final_value: float


def optimize(system: SpecificSystem, w: AutoencoderWeights | None, S0,
             params: EstimatorParams = EstimatorParams()) -> EstimateResult:
    """Projected SGD from ``S0`` until the scheduled lr drops below ``stop_lr``."""
    S = np.array(S0, dtype=np.float64)
    sched = _Schedule(params.lr)
    initial = None
    value = None
    steps = 0
    while sched.lr >= params.stop_lr:
        if params.max_steps is not None and steps >= params.max_steps:
            logger.warning("estimator hit max_steps=%d before the stop rule", params.max_steps)
            break
        value, grad = objective(S, system, w, params.alpha, params.beta)
        if initial is None:
            initial = value
        S -= sched.lr * grad
        np.maximum(S, 0.0, out=S)
        if S.max() < 1e-9:
            raise DivergedToZero(f"iterate collapsed to zero at step {steps}")
        scheduler_update(sched, value, params.scheduler_decay,
                         params.scheduler_patience, params.threshold)
        steps += 1
    final, _ = objective(S, system, w, params.alpha, params.beta)
    return EstimateResult(max_normalize(S), steps, initial if initial is not None else final, final)


def estimate(camera, w: AutoencoderWeights, db_mean, params: EstimatorParams = EstimatorParams(),
             obs: spectra.ObserverMatrix | None = None) -> np.ndarray:
    """Estimate a camera's sensitivities from its color matrices.

    ``camera`` is a CameraRecord (or anything with a ``matrices`` list).
    Returns an n x 3 matrix max-normalized to 1.
    """
    system = build_specific_system(camera.matrices, obs)
    return optimize(system, w, db_mean, params).S
