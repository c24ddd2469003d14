import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speccurve import apps, spectra
from speccurve.colorsystem import render
from speccurve.errors import FormatError, NonConvergence, RankDeficient
from speccurve.numerics import grad_check

NAMES, CHART = spectra.colorchecker()


def _daylight(T):
    return spectra.illuminant_matrix(spectra.daylight_spd(T))


def _underwater(S, R, K_nodes, depth, n_hat=10):
    """Forward render through a water column with node attenuations ``K_nodes``."""
    P = apps.interpolation_matrix(31, n_hat)
    d65 = spectra.illuminant_matrix(spectra.illuminant_d65()).diag
    return (R * (d65 * np.exp(-(P @ K_nodes) * depth))) @ S


# -- CCT ------------------------------------------------------------------------

def test_cct_round_trip(synth_S):
    I = render(CHART, _daylight(5554.0), synth_S)
    assert abs(apps.estimate_cct(synth_S, CHART, I) - 5554.0) <= 10.0


def test_cct_boundary(synth_S):
    I = render(CHART, _daylight(4000.0), synth_S)
    assert abs(apps.estimate_cct(synth_S, CHART, I) - 4000.0) <= 10.0


def test_cct_per_patch_scale(synth_S):
    I = render(CHART, _daylight(7300.0), synth_S)
    scale = np.linspace(0.5, 7.0, len(I))[:, None]
    a = apps.estimate_cct(synth_S, CHART, I)
    assert apps.estimate_cct(synth_S, CHART, 7.0 * I) == a
    assert abs(apps.estimate_cct(synth_S, CHART, scale * I) - a) < 0.05


def test_cct_within_bounds(synth_S):
    I = render(CHART, spectra.illuminant_matrix(spectra.illuminant_a()), synth_S)
    T = apps.estimate_cct(synth_S, CHART, I)
    assert spectra.T_MIN <= T <= spectra.T_MAX


# -- attenuation ------------------------------------------------------------------

def test_interpolation_matrix():
    P = apps.interpolation_matrix(31, 10)
    assert P.shape == (31, 10)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert np.array_equal(P[0], np.eye(10)[0]) and np.array_equal(P[-1], np.eye(10)[-1])


def test_attenuation_gradient(synth_S):
    rng = np.random.default_rng(0)
    R = CHART[:18]
    I = _underwater(synth_S, R, rng.uniform(0, 0.2, 10), 12.0)
    prob = apps.attenuation_problem(synth_S, R, I, 12.0)
    for _ in range(5):
        K = rng.uniform(0, 0.3, 10)
        assert grad_check(prob.value_and_grad, K) < 1e-6
        assert grad_check(prob.norm_value_and_grad, K) < 1e-6


def test_attenuation_zero(synth_S):
    R = CHART[:18]
    I = _underwater(synth_S, R, np.zeros(10), 16.2)
    K = apps.estimate_attenuation(synth_S, R, I, 16.2)
    assert K.max() < 0.02


def test_attenuation_constant(synth_S):
    R = CHART[:18]
    I = _underwater(synth_S, R, np.full(10, 0.1), 16.2)
    K = apps.estimate_attenuation(synth_S, R, I, 16.2)
    assert np.abs(K - 0.1).max() <= 0.03


def test_attenuation_depth_product(synth_S):
    R = CHART[:18]
    K_true = np.linspace(0.02, 0.12, 10)
    I1 = _underwater(synth_S, R, K_true, 8.0)
    I2 = _underwater(synth_S, R, K_true / 2, 16.0)
    assert np.allclose(I1, I2, rtol=1e-12)
    a = apps.estimate_attenuation(synth_S, R, I1, 8.0, bounds=(0.0, 2.0)) * 8.0
    b = apps.estimate_attenuation(synth_S, R, I2, 16.0, bounds=(0.0, 2.0)) * 16.0
    assert np.abs(a - b).max() <= 0.05 * max(np.abs(a).max(), 1e-12)


def test_attenuation_stays_in_bounds(synth_S):
    R = CHART[:18]
    rng = np.random.default_rng(2)
    for _ in range(3):
        I = _underwater(synth_S, R, rng.uniform(0, 0.4, 10), 10.0)
        try:
            K = apps.estimate_attenuation(synth_S, R, I, 10.0)
        except NonConvergence as exc:
            K = exc.best
        assert K.min() >= 0.0 and K.max() <= 1.0


def test_attenuation_recovers_relative_shape(synth_S):
    # the angular objective fixes K only up to an additive constant
    R = CHART[:18]
    K_true = np.linspace(0.3, 0.05, 10)
    I = _underwater(synth_S, R, K_true, 10.0)
    K = apps.estimate_attenuation(synth_S, R, I, 10.0)
    prob = apps.attenuation_problem(synth_S, R, I, 10.0)
    # rms per-patch angle under 1e-3 rad, against 0 at the truth
    assert prob.value_and_grad(K)[0] < len(R) * 1e-6 / 2
    floor = len(R) * np.arccos(1.0 - 1e-12) ** 2
    assert prob.value_and_grad(K_true)[0] == pytest.approx(floor, rel=1e-3)


def test_attenuation_bad_depth(synth_S):
    with pytest.raises(ValueError):
        apps.attenuation_problem(synth_S, CHART, np.ones((24, 3)), 0.0)


# -- locus ------------------------------------------------------------------------

def test_locus_in_simplex(synth_S):
    pts = apps.daylight_locus(synth_S, steps=50)
    assert pts.shape == (50, 2)
    assert np.all(pts >= 0) and np.all(pts.sum(axis=1) <= 1.0)


def test_locus_single_channel():
    S = np.zeros((31, 3))
    S[:, 0] = 1.0
    assert np.allclose(apps.daylight_locus(S, steps=5), [[1.0, 0.0]] * 5)
    S = np.zeros((31, 3))
    S[:, 2] = 0.5
    assert np.allclose(apps.daylight_locus(S, steps=5), [[0.0, 1.0]] * 5)


def test_locus_observer_matches_daylight_xy():
    obs = spectra.observer()
    Ts = np.linspace(4000, 25000, 8)
    pts = apps.daylight_locus(obs.data, 4000, 25000, steps=8)
    for T, (r, b) in zip(Ts, pts):
        x, y = spectra.xy_chromaticity(spectra.daylight_spd(T))
        assert r == pytest.approx(x, abs=1e-12) and b == pytest.approx(1 - x - y, abs=1e-12)
        xd, yd = spectra.daylight_chromaticity(T)
        assert r == pytest.approx(xd, abs=2e-3) and b == pytest.approx(1 - xd - yd, abs=2e-3)


def test_locus_needs_two_steps(synth_S):
    with pytest.raises(ValueError):
        apps.daylight_locus(synth_S, steps=1)


def test_classify_vertex():
    locus = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    m = apps.classify_near_locus((1.0, 0.0), locus, 0.01)
    assert m.distance == 0.0 and m.on_locus and not m.off_locus


@given(st.floats(-10, 10), st.floats(0.01, 0.99))
def test_classify_perpendicular(d, t):
    locus = np.array([[0.0, 0.0], [1.0, 0.0]])
    m = apps.classify_near_locus((t, d), locus, 0.5)
    assert m.distance == pytest.approx(abs(d), abs=1e-12)
    assert m.on_locus == (abs(d) <= 0.5)


def test_classify_dense_oracle(synth_S):
    locus = apps.daylight_locus(synth_S, steps=20)
    rng = np.random.default_rng(9)
    lo, hi = locus.min(axis=0) - 0.02, locus.max(axis=0) + 0.02
    # dense samples along every segment; spacing far below the tolerance
    t = np.linspace(0.0, 1.0, 20001)[:, None]
    dense = np.vstack([a + t * (b - a) for a, b in zip(locus[:-1], locus[1:])])
    for p in rng.uniform(lo, hi, (100, 2)):
        brute = np.min(np.linalg.norm(dense - p, axis=1))
        assert apps.distance_to_polyline(p, locus) == pytest.approx(brute, abs=1e-6)


# -- raw to raw -------------------------------------------------------------------

@pytest.fixture(scope="module")
def cams():
    from speccurve import prior
    rng = np.random.default_rng(21)
    return [prior.synthetic_sensitivity(rng) for _ in range(3)]


@pytest.fixture(scope="module")
def five_illums():
    ill = apps.standard_illuminants()
    return [ill[k] for k in ("A", "D50", "D55", "D65", "D75")]


def test_standard_illuminants():
    ill = apps.standard_illuminants()
    assert {"A", "D65", "D50", "D75"} <= ill.keys()
    x, y = spectra.xy_chromaticity(spectra.daylight_spd(5000 * 1.4388 / 1.4380))
    assert (x, y) == pytest.approx((0.3457, 0.3585), abs=2e-3)


def test_raw2raw_identity(cams, five_illums):
    M = apps.raw_to_raw_map(cams[0], cams[0], CHART, five_illums)
    assert np.abs(M - np.eye(3)).max() < 1e-9


def test_raw2raw_exact_linear(cams, five_illums):
    P = np.array([[0.9, 0.1, 0.0], [0.05, 0.8, 0.2], [0.0, 0.15, 1.1]])
    M = apps.raw_to_raw_map(cams[0], cams[0] @ P, CHART, five_illums)
    assert np.abs(M - P).max() < 1e-9


def test_raw2raw_normal_equations(cams, five_illums):
    M = apps.raw_to_raw_map(cams[0], cams[1], CHART, five_illums)
    X = np.vstack([render(CHART, L, cams[0]) for L in five_illums])
    Y = np.vstack([render(CHART, L, cams[1]) for L in five_illums])
    G = np.zeros((3, 3))
    for row in X:
        for i in range(3):
            for j in range(3):
                G[i, j] += row[i] * row[j]
    for c in range(3):
        rhs = np.array([sum(X[k, i] * Y[k, c] for k in range(len(X))) for i in range(3)])
        assert np.allclose(M[:, c], np.linalg.solve(G, rhs), rtol=1e-9, atol=1e-12)


def test_raw2raw_white_balance(cams, five_illums):
    white = NAMES.index(max(NAMES, key=lambda n: CHART[NAMES.index(n)].mean()))
    M = apps.raw_to_raw_map(cams[0], cams[1], CHART, five_illums, white_balance=True)
    X, Y = [], []
    for L in five_illums:
        a, b = render(CHART, L, cams[0]), render(CHART, L, cams[1])
        X.append(a / a[white])
        Y.append(b / b[white])
    ref, *_ = np.linalg.lstsq(np.vstack(X), np.vstack(Y), rcond=None)
    assert np.allclose(M, ref, rtol=1e-9, atol=1e-12)
    same = apps.raw_to_raw_map(cams[0], cams[0], CHART, five_illums, white_balance=True)
    assert np.abs(same - np.eye(3)).max() < 1e-9


def test_raw2raw_rank_deficient(cams, five_illums):
    S = np.repeat(cams[0][:, :1], 3, axis=1)
    with pytest.raises(RankDeficient):
        apps.raw_to_raw_map(S, cams[1], CHART, five_illums)
    with pytest.raises(RankDeficient):
        apps.raw_to_raw_map(cams[0], cams[1], CHART[:2], five_illums[:1])


def test_raw2raw_composition(cams, five_illums):
    P = np.array([[1.0, 0.2, 0.0], [0.1, 0.9, 0.1], [0.0, 0.3, 0.8]])
    Q = np.array([[0.7, 0.0, 0.1], [0.2, 1.0, 0.0], [0.0, 0.1, 1.2]])
    a, b, c = cams[0], cams[0] @ P, cams[0] @ P @ Q
    ab = apps.raw_to_raw_map(a, b, CHART, five_illums)
    bc = apps.raw_to_raw_map(b, c, CHART, five_illums)
    ac = apps.raw_to_raw_map(a, c, CHART, five_illums)
    assert np.abs(ab @ bc - ac).max() < 1e-9


# -- CSV helpers -----------------------------------------------------------------

def test_rgb_csv_round_trip(tmp_path):
    rgb = np.random.default_rng(0).uniform(0, 1, (4, 3))
    p = tmp_path / "a.csv"
    apps.save_rgb_csv(p, rgb, ["w", "x", "y", "z"])
    names, back = apps.load_rgb_csv(p)
    assert names == ["w", "x", "y", "z"] and np.array_equal(back, rgb)
    apps.save_rgb_csv(p, rgb)
    names, back = apps.load_rgb_csv(p)
    assert names is None and np.array_equal(back, rgb)


def test_rgb_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        apps.load_rgb_csv(p)


def test_select_patches():
    sub = apps.select_patches(NAMES, CHART, [NAMES[3], NAMES[0]])
    assert np.array_equal(sub, CHART[[3, 0]])
    with pytest.raises(FormatError):
        apps.select_patches(NAMES, CHART, ["nope"])
