import numpy as np
import pytest

from speccurve import spectra
from speccurve.errors import CoverageError, FormatError, OutOfRange
from speccurve.spectra import (DEFAULT_GRID, SpectralCurve, SpectralGrid, daylight_chromaticity,
                               daylight_spd, daylight_spd_xy, daylight_y, illuminant_matrix,
                               load_spd_csv, xy_chromaticity)


def _write(path, header, rows):
    path.write_text(header + "\n" + "\n".join(",".join(f"{v:g}" for v in r) for r in rows) + "\n")


def test_grid_definition():
    g = DEFAULT_GRID
    assert g.n == 31 and g.delta == 10.0
    assert np.array_equal(g.wavelengths, 400 + 10 * np.arange(31))


def test_curve_rejects_negative():
    with pytest.raises(ValueError):
        SpectralCurve(DEFAULT_GRID, -np.ones(31))


def test_csv_on_grid_verbatim(tmp_path, rng):
    v = rng.uniform(0, 1, 31)
    p = tmp_path / "a.csv"
    p.write_text("wavelength_nm,value\n" + "".join(f"{400 + 10 * i},{repr(float(x))}\n" for i, x in enumerate(v)))
    assert np.array_equal(load_spd_csv(p).values, v)


def test_csv_supersampled(tmp_path):
    wl = np.arange(380, 781, 5)
    _write(tmp_path / "b.csv", "wavelength_nm,value", [(w, w / 7.0) for w in wl])
    np.testing.assert_allclose(load_spd_csv(tmp_path / "b.csv").values, DEFAULT_GRID.wavelengths / 7.0,
                               rtol=1e-5)


def test_csv_linear_midpoint(tmp_path):
    wl = np.arange(400, 701, 20)
    _write(tmp_path / "c.csv", "wavelength_nm,value", [(w, 1.0 if w == 420 else 0.0) for w in wl])
    assert load_spd_csv(tmp_path / "c.csv").values[1] == 0.5


def test_csv_errors(tmp_path):
    _write(tmp_path / "d.csv", "nm,value", [(400, 1), (700, 1)])
    with pytest.raises(FormatError):
        load_spd_csv(tmp_path / "d.csv")
    _write(tmp_path / "e.csv", "wavelength_nm,value", [(410, 1), (700, 1)])
    with pytest.raises(CoverageError):
        load_spd_csv(tmp_path / "e.csv")
    (tmp_path / "f.csv").write_text("wavelength_nm,value\n400,abc\n700,1\n")
    with pytest.raises(FormatError):
        load_spd_csv(tmp_path / "f.csv")


def test_bundled_data_shapes():
    assert spectra.observer().data.shape == (31, 3)
    assert np.linalg.matrix_rank(spectra.observer().data) == 3
    names, R = spectra.colorchecker()
    assert len(names) == 24 and R.shape == (24, 31)
    assert np.all((R >= 0) & (R <= 1))


def test_data_dir_override(tmp_path, monkeypatch):
    import shutil
    for f in spectra.data_dir().iterdir():
        shutil.copy(f, tmp_path / f.name)
    obs = tmp_path / "cie1931_2deg.csv"
    text = obs.read_text().splitlines()
    obs.write_text("\n".join([text[0]] + [",".join([r.split(",")[0], "1", "1", "1"]) for r in text[1:]]) + "\n")
    monkeypatch.setenv(spectra.DATA_ENV, str(tmp_path))
    assert np.all(spectra.observer().data == 1.0)
    monkeypatch.delenv(spectra.DATA_ENV)
    assert not np.all(spectra.observer().data == 1.0)


def _x_oracle(T):
    # independent transcription of the published cubics
    if T <= 7000:
        return -4.6070e9 / T ** 3 + 2.9678e6 / T ** 2 + 0.09911e3 / T + 0.244063
    return -2.0064e9 / T ** 3 + 1.9018e6 / T ** 2 + 0.24748e3 / T + 0.237040


def test_daylight_d65_white_point():
    x, y = daylight_chromaticity(6504)
    assert abs(x - 0.3127) < 1e-3 and abs(y - 0.3291) < 1e-3
    assert x == pytest.approx(_x_oracle(6504), abs=1e-15)


def test_daylight_branch_continuity():
    T = 7000.0
    low = -4.6070e9 / T ** 3 + 2.9678e6 / T ** 2 + 0.09911e3 / T + 0.244063
    high = -2.0064e9 / T ** 3 + 1.9018e6 / T ** 2 + 0.24748e3 / T + 0.237040
    assert abs(low - high) < 2e-4
    assert abs(daylight_chromaticity(7000.0)[0] - daylight_chromaticity(7000.0001)[0]) < 2e-4


def test_daylight_4000():
    x, _ = daylight_chromaticity(4000)
    assert 0.38 < x < 0.39


def test_daylight_parabola_and_monotone():
    Ts = np.linspace(4000, 25000, 400)
    xs = [daylight_chromaticity(T)[0] for T in Ts]
    assert np.all(np.diff(xs) < 0)
    for T, x in zip(Ts, xs):
        assert daylight_chromaticity(T)[1] == -3.000 * x * x + 2.870 * x - 0.275
        assert daylight_y(x) == daylight_chromaticity(T)[1]


def test_daylight_out_of_range():
    for T in (3999.0, 25001.0):
        with pytest.raises(OutOfRange):
            daylight_chromaticity(T)


def test_daylight_spd_round_trip_and_nonnegative():
    x, y = xy_chromaticity(daylight_spd(6504))
    assert abs(x - 0.3127) < 2e-3 and abs(y - 0.3291) < 2e-3
    for T in np.linspace(4000, 25000, 50):
        assert np.all(daylight_spd(T).values >= 0)


def test_daylight_spd_zero_numerators_is_s0():
    # M1 = M2 = 0 when both numerators vanish; solve for that (x, y)
    M = np.array([[-1.7703, 5.9114], [-31.4424, 30.0717]])
    x, y = np.linalg.solve(M, [1.3515, -0.0300])
    spd = daylight_spd_xy(x, y)
    s0 = spectra.daylight_components()[:, 0]
    np.testing.assert_allclose(spd.values, np.maximum(s0, 0), atol=1e-9)


def test_illuminant_matrix_examples():
    flat = illuminant_matrix(SpectralCurve(DEFAULT_GRID, np.ones(31)))
    assert np.all(flat.diag == 10.0)
    zero = illuminant_matrix(SpectralCurve(DEFAULT_GRID, np.zeros(31)))
    assert np.all(zero.diag == 0.0)
    d65 = spectra.illuminant_d65()
    np.testing.assert_allclose(illuminant_matrix(d65).diag / d65.values, 10.0, rtol=1e-15)


def test_custom_grid():
    g = SpectralGrid(61, 400, 700)
    assert g.delta == 5.0
    assert spectra.observer(g).data.shape == (61, 3)
