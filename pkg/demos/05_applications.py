"""
What a known sensitivity is good for
====================================

With the camera's curves in hand, a photo of a color chart says a lot
about the light that lit it. Everything here is rendered synthetically so
the right answers are known.

    python3 demos/05_applications.py
"""

import numpy as np

from speccurve import apps, prior, spectra
from speccurve.colorsystem import render
from speccurve.metrics import chromaticity

S = prior.synthetic_sensitivity(np.random.default_rng(5))
names, chart = spectra.colorchecker()

# Daylight color temperature from the chart's RGBs.
I = render(chart, spectra.illuminant_matrix(spectra.daylight_spd(5554.0)), S)
print(f"CCT: {apps.estimate_cct(S, chart, I):.1f} K (rendered at 5554 K)")

# Underwater: daylight loses red with depth. The angular fit recovers how
# K varies with wavelength, but not a wavelength-independent offset, which
# only dims the whole chart. The reddest node sits where the camera barely
# responds, so it is poorly determined too.
R = chart[:18]
K_true = np.linspace(0.05, 0.4, 10)
P = apps.interpolation_matrix(31, 10)
d65 = spectra.illuminant_matrix(spectra.illuminant_d65()).diag
I_deep = (R * (d65 * np.exp(-(P @ K_true) * 10.0))) @ S
K = apps.estimate_attenuation(S, R, I_deep, 10.0)
print("K true      ", np.round(K_true, 3))
print("K estimated ", np.round(K, 3))
print("difference  ", np.round(K_true - K, 3))

# The camera's own daylight locus, and how far a tungsten white sits from it.
locus = apps.daylight_locus(S, steps=50)
white_a = render(np.ones((1, 31)), spectra.illuminant_matrix(spectra.illuminant_a()), S)[0]
m = apps.classify_near_locus(chromaticity(white_a), locus, threshold=0.01)
print(f"illuminant A is {m.distance:.3f} from the daylight locus (on locus: {m.on_locus})")

# A 3x3 map from this camera's raw space to another's.
other = prior.synthetic_sensitivity(np.random.default_rng(6))
ill = apps.standard_illuminants()
M = apps.raw_to_raw_map(S, other, chart, list(ill.values()), white_balance=True)
print("raw-to-raw map:\n", np.round(M, 4))
