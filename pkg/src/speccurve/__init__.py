"""Camera spectral sensitivities from colorimetric calibration matrices."""

from .apps import (classify_near_locus, daylight_locus, estimate_attenuation, estimate_cct,
                   raw_to_raw_map, standard_illuminants)
from .colorsystem import (ColorMatrixRecord, SpecificSystem, build_specific_system,
                          forward_color_matrix, render, synthesize_records)
from .dng import CameraRecord, load_records_json, parse_dng, read_dng, save_records_json
from .estimator import EstimatorParams, estimate, objective, optimize
from .metrics import ErrorReport, angular_rgb_error, chromaticity, relative_full_scale_error
from .nn import AutoencoderWeights, load_checkpoint, save_checkpoint
from .numerics import angular_distance, grad_check, pseudoinverse, solve
from .plot import plot_svg
from .prior import (SensitivityDatabase, TrainParams, fit_autoencoder, load_database,
                    save_database, synthetic_database, train_autoencoder)
from .spectra import DEFAULT_GRID, SpectralCurve, SpectralGrid, daylight_spd
from .validation import loov_run, summarize

__version__ = "0.1.0"
