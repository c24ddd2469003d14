"""
Training the autoencoder prior
==============================

The prior is a small autoencoder (93 -> 372 -> 186 -> 6 -> 186 -> 372 -> 93)
trained to reproduce known sensitivities from randomly scaled and shifted
copies. Full training runs until the plateau schedule drops the learning
rate below 1e-5, which takes a couple of minutes; this demo stops early.

    python3 demos/02_train_prior.py [steps]
"""

import sys

import numpy as np

from speccurve import prior
from speccurve.nn import save_checkpoint

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 3000

db = prior.synthetic_database(12, seed=1)
print(f"{len(db)} curves, e.g. {db.entries[0].camera_id!r}")

# What augmentation does to one curve: each channel is scaled by a factor
# in [h, 1] and its samples are shifted by up to g grid steps.
rng = np.random.default_rng(0)
S = db.entries[0].S
noisy = prior.augment(S, prior.AugmentParams(h=0.2, g=2), rng)
print("augmented channel maxima:", np.round(noisy.max(axis=0), 3))

params = prior.TrainParams(max_steps=steps)
result = prior.fit_autoencoder(db, exclude=["synthetic cam00"], params=params, seed=0)
print(f"trained on {len(result.training_ids)} cameras for {result.steps} steps")
print(f"reconstruction loss {result.initial_loss:.3f} -> {result.final_loss:.3f}")

save_checkpoint(result.weights, "demo_prior.ssae")
print("saved demo_prior.ssae")
