"""
Estimating a camera from its color matrices
===========================================

Two color matrices give 18 linear constraints on 93 unknowns, so on their
own they leave most of the curve undetermined. The estimator adds an
angular penalty between the candidate and its autoencoder reconstruction,
which pulls it towards shapes the prior has seen.

    python3 demos/03_estimate_camera.py
"""

import numpy as np

from speccurve import prior
from speccurve.colorsystem import build_specific_system, synthesize_records
from speccurve.estimator import EstimatorParams, optimize
from speccurve.metrics import relative_full_scale_error
from speccurve.plot import plot_svg

db = prior.synthetic_database(12, seed=1)
held_out = db.entries[0]
train = prior.fit_autoencoder(db, exclude=[held_out.camera_id],
                              params=prior.TrainParams(max_steps=3000), seed=0)

system = build_specific_system(synthesize_records(held_out.S))
start = db.without([held_out.camera_id]).mean()

# Matrices only, then matrices plus prior. Both start from the mean curve.
plain = optimize(system, None, start, EstimatorParams(beta=0.0, max_steps=20_000)).S
guided = optimize(system, train.weights, start, EstimatorParams(max_steps=20_000)).S

for name, S_hat in (("mean curve", start / start.max()), ("matrices only", plain),
                    ("with prior", guided)):
    r = relative_full_scale_error(S_hat, held_out.S)
    print(f"{name:14s} RE {100 * r.re_mean:5.2f}%  per channel "
          + " ".join(f"{100 * v:5.2f}%" for v in r.re_per_channel))

plot_svg([held_out.S, guided], "demo_estimate.svg", labels=["truth", "estimate"])
print("wrote demo_estimate.svg")
