import numpy as np
import pytest

from shiftlab.errors import DegenerateFitError, InvalidArgumentError
from shiftlab.robustness import (
    EvalPoint,
    delta_accuracy,
    fit_robustness_slope,
    ols_line,
    pearson,
)


def points_from(rows):
    return [EvalPoint(shift_param=p, nn_distance=d, accuracy=a, n_test=n)
            for p, d, a, n in rows]


# -- EvalPoint ------------------------------------------------------------


def test_eval_point_validation():
    EvalPoint(shift_param=0.1, nn_distance=0.0, accuracy=1.0, n_test=1)
    with pytest.raises(InvalidArgumentError):
        EvalPoint(shift_param=0.1, nn_distance=-0.1, accuracy=0.5, n_test=10)
    with pytest.raises(InvalidArgumentError):
        EvalPoint(shift_param=0.1, nn_distance=0.1, accuracy=1.5, n_test=10)
    with pytest.raises(InvalidArgumentError):
        EvalPoint(shift_param=0.1, nn_distance=0.1, accuracy=0.5, n_test=0)


def test_delta_accuracy():
    assert delta_accuracy(0.8, 0.9) == pytest.approx(-0.1)
    assert delta_accuracy(0.9, 0.9) == 0.0
    with pytest.raises(InvalidArgumentError):
        delta_accuracy(1.2, 0.9)


# -- OLS ------------------------------------------------------------------


def test_ols_hand_example_perfect_line():
    # {(0,0),(1,-0.1),(2,-0.2)}: slope -0.1, intercept 0, perfect fit
    slope, intercept, r2, stderr = ols_line(
        np.array([0.0, 1.0, 2.0]), np.array([0.0, -0.1, -0.2]))
    assert slope == pytest.approx(-0.1, abs=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-9)


def test_ols_two_points_exact():
    slope, intercept, r2, stderr = ols_line(
        np.array([1.0, 3.0]), np.array([2.0, 8.0]))
    assert slope == pytest.approx(3.0)
    assert intercept == pytest.approx(-1.0)
    assert r2 == 1.0
    assert stderr == 0.0  # no residual degrees of freedom


def test_ols_constant_y():
    slope, intercept, r2, _ = ols_line(
        np.array([0.0, 1.0, 2.0]), np.array([0.4, 0.4, 0.4]))
    assert slope == pytest.approx(0.0, abs=1e-15)
    assert intercept == pytest.approx(0.4)
    assert r2 == 1.0  # SS_tot = 0 convention


def test_ols_constant_x_degenerate():
    with pytest.raises(DegenerateFitError):
        ols_line(np.array([1.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0]))


def test_ols_residual_orthogonality():
    rng = np.random.default_rng(0)
    x = rng.random(50)
    y = -0.3 * x + 0.05 * rng.standard_normal(50)
    slope, intercept, _, _ = ols_line(x, y)
    resid = y - (intercept + slope * x)
    assert abs(resid.sum()) < 1e-9
    assert abs((resid * x).sum()) < 1e-9


def test_ols_synthetic_recovery():
    # y = -0.05 x + eps, eps ~ N(0, 1e-4): recovered slope within 3 stderr
    rng = np.random.default_rng(42)
    x = np.linspace(0.0, 1.0, 20)
    y = -0.05 * x + 0.01 * rng.standard_normal(20)
    slope, _, _, stderr = ols_line(x, y)
    assert abs(slope - (-0.05)) < 3.0 * stderr


def test_ols_weighted_pulls_toward_heavy_points():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, 0.0, 1.0])
    plain, *_ = ols_line(x, y)
    heavy_last, *_ = ols_line(x, y, weights=np.array([1.0, 1.0, 100.0]))
    assert heavy_last != plain
    # weighted residual orthogonality under the weight vector
    w = np.array([2.0, 5.0, 1.0])
    slope, intercept, _, _ = ols_line(x, y, weights=w)
    resid = y - (intercept + slope * x)
    assert abs((w * resid).sum()) < 1e-9
    assert abs((w * resid * x).sum()) < 1e-9


def test_ols_validation():
    with pytest.raises(InvalidArgumentError):
        ols_line(np.array([1.0]), np.array([2.0]))
    with pytest.raises(InvalidArgumentError):
        ols_line(np.array([1.0, 2.0]), np.array([1.0, 2.0]),
                 weights=np.array([1.0, -1.0]))


# -- slope fitting --------------------------------------------------------


def test_fit_slope_basic():
    pts = points_from([
        (0.0, 0.0, 0.9, 100),
        (0.5, 1.0, 0.85, 100),
        (1.0, 2.0, 0.8, 100),
    ])
    fit = fit_robustness_slope(pts)
    assert fit.x_axis == "shift_param"
    assert fit.n_points == 3
    assert fit.slope == pytest.approx(-0.1, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    d = fit.to_json_dict()
    assert d["slope"] == fit.slope and d["x_axis"] == "shift_param"


def test_fit_slope_vs_distance_axis():
    pts = points_from([
        (0.0, 0.0, 0.9, 100),
        (0.5, 1.0, 0.85, 100),
        (1.0, 2.0, 0.8, 100),
    ])
    fit = fit_robustness_slope(pts, x_axis="nn_distance")
    assert fit.slope == pytest.approx(-0.05, abs=1e-12)


def test_fit_slope_baseline_choice_moves_intercept_not_slope():
    pts = points_from([
        (0.0, 0.1, 0.9, 50),
        (0.3, 0.5, 0.8, 50),
        (0.6, 0.9, 0.75, 50),
    ])
    default = fit_robustness_slope(pts)
    shifted = fit_robustness_slope(pts, baseline_accuracy=0.5)
    assert default.slope == pytest.approx(shifted.slope, abs=1e-12)
    assert default.stderr_slope == pytest.approx(shifted.stderr_slope, abs=1e-12)
    assert default.intercept != shifted.intercept
    # default baseline is the smallest-shift point's accuracy
    assert default.intercept == pytest.approx(0.0, abs=0.02)


def test_fit_slope_unordered_points():
    rows = [(0.6, 0.9, 0.75, 50), (0.0, 0.1, 0.9, 50), (0.3, 0.5, 0.8, 50)]
    a = fit_robustness_slope(points_from(rows))
    b = fit_robustness_slope(points_from(sorted(rows)))
    assert a.slope == pytest.approx(b.slope, abs=1e-12)
    assert a.intercept == pytest.approx(b.intercept, abs=1e-12)


def test_fit_slope_weighting_flag():
    # heavy weight at an endpoint pulls the weighted line toward it
    pts = points_from([
        (0.0, 0.0, 0.9, 10),
        (0.5, 1.0, 0.8, 10),
        (1.0, 2.0, 0.85, 1000),
    ])
    plain = fit_robustness_slope(pts)
    weighted = fit_robustness_slope(pts, weight_by_n_test=True)
    assert plain.slope != weighted.slope


def test_fit_slope_validation():
    pts = points_from([(0.0, 0.0, 0.9, 10)])
    with pytest.raises(InvalidArgumentError):
        fit_robustness_slope(pts)
    two = points_from([(0.0, 0.0, 0.9, 10), (0.1, 0.2, 0.8, 10)])
    with pytest.raises(InvalidArgumentError):
        fit_robustness_slope(two, x_axis="time")
    with pytest.raises(InvalidArgumentError):
        fit_robustness_slope(two, baseline_accuracy=1.4)
    same_x = points_from([(0.5, 0.0, 0.9, 10), (0.5, 0.2, 0.8, 10)])
    with pytest.raises(DegenerateFitError):
        fit_robustness_slope(same_x)


# -- pearson --------------------------------------------------------------


def test_pearson_exact_cases():
    x = np.array([0.0, 1.0, 2.0])
    assert pearson(x, 2.0 * x + 1.0) == pytest.approx(1.0)
    assert pearson(x, -0.5 * x) == pytest.approx(-1.0)
    with pytest.raises(DegenerateFitError):
        pearson(x, np.array([1.0, 1.0, 1.0]))
    with pytest.raises(InvalidArgumentError):
        pearson(np.array([1.0]), np.array([2.0]))


def test_pearson_bounded():
    rng = np.random.default_rng(1)
    for _ in range(20):
        r = pearson(rng.random(10), rng.random(10))
        assert -1.0 <= r <= 1.0
