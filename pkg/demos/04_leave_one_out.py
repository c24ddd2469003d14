"""
Leave-one-out validation
========================

Each camera is estimated by a prior that never saw it: the autoencoder is
retrained without that camera (and without any duplicate measurement of
it) before the estimate. Short training keeps this demo quick; the
acceptance suite runs the same loop with the full schedule.

    python3 demos/04_leave_one_out.py
"""

import numpy as np

from speccurve import dng, prior, validation
from speccurve.colorsystem import synthesize_records
from speccurve.estimator import EstimatorParams

db = prior.synthetic_database(6, seed=2, duplicates=1)
records = {}
for e in db.entries:
    make, model = e.camera_id.split(" ", 1)
    records.setdefault(e.camera_id, dng.CameraRecord(make, model,
                                                     matrices=synthesize_records(e.S)))

rows = validation.loov_run(db, records, prior.TrainParams(max_steps=1500),
                           EstimatorParams(max_steps=5000), seed=0)
for r in rows:
    print(f"{r.camera_id:16s} {r.source:12s} RE {100 * r.report.re_mean:5.2f}%")

# cam00 has two ground-truth measurements: one estimate, two scores.
summary = validation.summarize(rows)
print(f"median {100 * summary['median_re']:.2f}%, best {summary['best']}, "
      f"worst {summary['worst']}")
print("histogram (1% bins):", summary["histogram"])
