"""
Color matrices from a known camera
==================================

A DNG file stores, for each calibration illuminant, the 3x3 least-squares
map from CIE XYZ to the camera's raw RGB. If the camera's spectral
sensitivity is known, that matrix follows from the observer, the
illuminant and the sensitivity alone. Run from the repository root:

    python3 demos/01_color_matrices.py
"""

import numpy as np

from speccurve import dng, prior, spectra
from speccurve.colorsystem import build_specific_system, forward_color_matrix, synthesize_records

# A made-up camera: three Gaussian-bump channels on the 400-700 nm grid.
S = prior.synthetic_sensitivity(np.random.default_rng(0))
print("sensitivity:", S.shape, "max", S.max())

# Its color matrix under illuminant A.
A = spectra.illuminant_matrix(spectra.illuminant_a())
print("color matrix under A:\n", np.round(forward_color_matrix(S, A), 4))

# Matrices under A and D65 form a linear system that S satisfies exactly.
system = build_specific_system(synthesize_records(S))
for name, a, b in zip(system.illuminants, system.blocks_a, system.blocks_b):
    print(f"{name}: |A S - B| = {np.abs(a @ S - b).max():.1e}")

# The same matrices survive a trip through a minimal DNG file
# (signed rationals with a 10^6 denominator).
record = dng.CameraRecord("Demo", "Camera", None, synthesize_records(S))
back = dng.parse_dng(dng.write_minimal_dng(record, "big"))
gap = max(np.abs(m.matrix - n.matrix).max() for m, n in zip(record.matrices, back.matrices))
print(f"DNG round trip: {back.camera_id!r}, largest change {gap:.1e}")
