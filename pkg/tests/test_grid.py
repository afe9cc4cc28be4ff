import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstaclelab import ConfigurationError, DomainError, GridIndex, GridSpec, NumericError, SpaceTimeField, build_grid
from obstaclelab.grid import (
    coarsen,
    fit_exponent,
    gradient,
    grad_array,
    heat_residual,
    hessian,
    load_field,
    read_field_csv,
    save_field,
    time_derivative,
    write_field_csv,
)


def test_1d_nodes():
    g = build_grid(GridSpec(1, 2.0, 0.5, 0.5, 1.0))
    assert g.axis.tolist() == [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2]


def test_2d_ball_mask_keeps_center_and_axis_points():
    g = build_grid(GridSpec(2, 1.0, 1.0, 1.0, 1.0))
    assert g.coords[0].size == 9
    assert int(g.ball_mask.sum()) == 5
    assert not g.ball_mask[0, 0] and g.ball_mask[1, 1] and g.ball_mask[0, 1]


@pytest.mark.parametrize("h,tau", [(0.3, 0.1), (0.1, 0.3)])
def test_non_divisible_spacing_is_rejected(h, tau):
    with pytest.raises(ConfigurationError):
        GridSpec(1, 1.0, h, tau, 1.0)


def test_shells_are_nested():
    s = GridSpec(1, 2.0, 0.1, 0.01, 0.1)
    radii = [s.shell_radius(n) for n in ("B10", "B9", "B8", "B7", "B1")]
    assert radii == sorted(radii, reverse=True)
    assert radii[0] == 2.0 and math.isclose(radii[-1], 0.2)
    with pytest.raises(ConfigurationError):
        s.shell_radius("B5")


def test_field_rejects_nan():
    s = GridSpec(1, 1.0, 0.5, 0.5, 1.0)
    v = np.zeros(s.shape)
    v[1, 2] = np.nan
    with pytest.raises(NumericError):
        SpaceTimeField(s, v)


def test_gradient_of_linear_field(field_of):
    s = GridSpec(1, 1.0, 0.25, 0.5, 1.0)
    u = field_of(s, lambda X, t: X[0])
    for i in range(1, 8):
        assert gradient(u, GridIndex(0, (i,)))[0] == pytest.approx(1.0, abs=1e-14)


def test_gradient_of_square_is_exact(field_of):
    s = GridSpec(1, 2.0, 0.5, 0.5, 1.0)
    u = field_of(s, lambda X, t: X[0] ** 2)
    assert gradient(u, GridIndex(0, (6,)))[0] == 2.0  # x = 1


def test_gradient_of_sine(field_of):
    s = GridSpec(1, 1.0, 0.1, 0.5, 1.0)
    u = field_of(s, lambda X, t: np.sin(X[0]))
    assert gradient(u, GridIndex(0, (10,)))[0] == pytest.approx(math.sin(0.1) / 0.1, rel=1e-12)


def test_boundary_node_is_a_domain_error(field_of):
    s = GridSpec(1, 1.0, 0.5, 0.5, 1.0)
    u = field_of(s, lambda X, t: X[0])
    with pytest.raises(DomainError):
        gradient(u, GridIndex(0, (0,)))
    with pytest.raises(DomainError):
        hessian(u, GridIndex(0, (4,)))


def test_hessian_examples(field_of):
    s1 = GridSpec(1, 2.0, 0.5, 0.5, 1.0)
    assert hessian(field_of(s1, lambda X, t: X[0] ** 2 / 2), GridIndex(0, (3,)))[0, 0] == pytest.approx(1.0)
    two_phase = field_of(s1, lambda X, t: np.where(X[0] > 0, X[0] ** 2, -X[0] ** 2))
    assert hessian(two_phase, GridIndex(0, (6,)))[0, 0] == pytest.approx(2.0)
    s2 = GridSpec(2, 1.0, 0.25, 0.5, 1.0)
    H = hessian(field_of(s2, lambda X, t: X[0] * X[1]), GridIndex(0, (4, 4)))
    assert H == pytest.approx(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_time_derivative_examples(field_of):
    s = GridSpec(1, 1.0, 0.5, 0.25, 1.0)
    assert time_derivative(field_of(s, lambda X, t: t + 0 * X[0]), GridIndex(2, (1,))) == pytest.approx(1.0)
    assert time_derivative(field_of(s, lambda X, t: X[0]), GridIndex(3, (1,))) == 0.0
    cal = field_of(s, lambda X, t: X[0] ** 2 + 2 * t)
    for k in range(5):
        assert time_derivative(cal, GridIndex(k, (2,))) == pytest.approx(2.0)


def test_heat_residual_examples(field_of):
    s = GridSpec(1, 1.0, 0.25, 0.25, 1.0)
    cal = field_of(s, lambda X, t: X[0] ** 2 + 2 * t)
    assert heat_residual(cal, GridIndex(2, (3,))) == pytest.approx(0.0, abs=1e-12)
    assert heat_residual(field_of(s, lambda X, t: t + 0 * X[0]), GridIndex(1, (3,))) == pytest.approx(-1.0)
    prof = field_of(GridSpec(1, 2.0, 0.25, 0.25, 1.0), lambda X, t: np.where(X[0] > 0, X[0] ** 2, -X[0] ** 2))
    assert heat_residual(prof, GridIndex(1, (10,))) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        heat_residual(cal, GridIndex(0, (3,)))


def test_second_order_stencils_on_smooth_fields(field_of):
    errs_g, errs_h, hs = [], [], [0.1, 0.05, 0.025]
    for h in hs:
        s = GridSpec(2, 1.0, h, 0.5, 1.0)
        u = field_of(s, lambda X, t: np.sin(X[0]) * np.cos(2 * X[1]))
        i = s.n_half + int(round(0.2 / h))
        j = s.n_half - int(round(0.1 / h))
        x, y = 0.2, -0.1
        at = GridIndex(0, (i, j))
        g_ex = np.array([math.cos(x) * math.cos(2 * y), -2 * math.sin(x) * math.sin(2 * y)])
        H_ex = np.array([[-math.sin(x) * math.cos(2 * y), -2 * math.cos(x) * math.sin(2 * y)],
                         [-2 * math.cos(x) * math.sin(2 * y), -4 * math.sin(x) * math.cos(2 * y)]])
        errs_g.append(np.max(np.abs(gradient(u, at) - g_ex)))
        errs_h.append(np.max(np.abs(hessian(u, at) - H_ex)))
    assert fit_exponent(hs, errs_g) >= 1.9
    assert fit_exponent(hs, errs_h) >= 1.9


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_exact_on_quadratics(a, b, c):
    s = GridSpec(1, 1.0, 0.125, 0.5, 1.0)
    X = build_grid(s).coords
    v = a * X[0] ** 2 + b * X[0] + c
    d = grad_array(v[None], s.h, 1)[0, 0]
    assert np.allclose(d[1:-1], (2 * a * X[0] + b)[1:-1], atol=1e-9)


def test_coarsen_and_roundtrip(tmp_path, field_of):
    s = GridSpec(1, 1.0, 0.25, 0.25, 1.0)
    u = field_of(s, lambda X, t: X[0] ** 2 + 2 * t)
    c = coarsen(u, 2, 2)
    assert c.spec.h == 0.5 and c.spec.tau == 0.5
    assert np.array_equal(c.values, u.values[::2, ::2])
    p = write_field_csv(u, tmp_path / "u.csv")
    back = read_field_csv(p, s)
    assert np.array_equal(back.values, u.values)
    q = save_field(u, tmp_path / "u.npz")
    assert np.array_equal(load_field(q).values, u.values)


def test_fit_exponent_recovers_power():
    xs = [0.1, 0.2, 0.4]
    assert fit_exponent(xs, [3 * x**2.5 for x in xs]) == pytest.approx(2.5)
