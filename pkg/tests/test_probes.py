import math

import numpy as np
import pytest

from obstaclelab import GeometryError, GridSpec, PenaltyFamily, PreconditionError, ProbePoint
from obstaclelab.oracle import ExactSolution
from obstaclelab.probes import (
    Bump,
    choose_directions,
    default_bump_battery,
    equation_consistency,
    gradient_gap,
    hessian_bound_chain,
    holder_half_check,
    split_norms,
    subcaloric_battery,
    theorem_sup_scan,
    weak_subcaloric_pairing,
    weighted_hessian_energy,
)

S2 = GridSpec(2, 2.0, 0.05, 0.0025, 0.04)
S1 = GridSpec(1, 2.0, 0.025, 0.000625, 0.04)
Z1 = ProbePoint((0.0,), 0.04)


def test_direction_perpendicular_to_gradient(field_of):
    u = field_of(S2, lambda X, t: 0.6 * X[0] + 0.8 * X[1])
    d = choose_directions(u, ProbePoint((0.0, 0.0), 0.04))
    assert d.nu == pytest.approx((0.6, 0.8))
    assert d.directions[0] == pytest.approx((-0.8, 0.6))


def test_flat_gradient_admits_all_axes(field_of):
    u = field_of(S2, lambda X, t: X[0] ** 2 - X[1] ** 2)
    d = choose_directions(u, ProbePoint((0.0, 0.0), 0.04))
    assert d.directions == [(1.0, 0.0), (0.0, 1.0)] and d.nu is None


def test_1d_nonzero_gradient_uses_equation_route(field_of):
    d = choose_directions(field_of(S1, lambda X, t: X[0]), Z1)
    assert d.directions == [] and d.equation_route


def test_gradient_gap_zero_for_time_constant_field():
    u = ExactSolution.two_phase().sample(S1)
    g = gradient_gap(u, Z1)
    assert g.sup_gap == 0.0 and g.slice0_gap == 0.0


def test_gradient_gap_geometry():
    u = ExactSolution.two_phase().sample(S1)
    with pytest.raises(GeometryError):
        gradient_gap(u, ProbePoint((1.3,), 0.04))


def test_weighted_hessian_energy_of_caloric_quadratic():
    u = ExactSolution.caloric((1.0,), 2.0).sample(S1)
    val = weighted_hessian_energy(u, Z1)
    R2 = Z1.R**2
    assert 0.5 * 4 * R2 <= val <= 4 * R2


def test_weighted_hessian_energy_of_linear_field(field_of):
    assert weighted_hessian_energy(field_of(S1, lambda X, t: 3 * X[0] + 1), Z1) == pytest.approx(0.0, abs=1e-20)


def test_split_norm_negative_part_vanishes_for_monotone_field(field_of):
    u = field_of(S1, lambda X, t: X[0] ** 3 + X[0])
    p, m, _ = split_norms(u, Z1, (1.0,))
    assert p > 0 and m == 0.0


def test_chain_requires_nonzero_value():
    u = ExactSolution.two_phase().sample(S1)
    with pytest.raises(PreconditionError):
        hessian_bound_chain(u, Z1, PenaltyFamily(2.0, 2.0, 1e-3))


def test_chain_agrees_with_direct_hessian_on_caloric_field():
    u = ExactSolution.caloric((1.0, 0.5), 3.0, const=1.0).sample(S2)
    hc = hessian_bound_chain(u, ProbePoint((0.0, 0.0), 0.04), PenaltyFamily.validation())
    assert hc.direct == pytest.approx(math.sqrt(4 + 1))
    assert 1 / 3 <= hc.ratio <= 3


def test_theorem_scan_on_stationary_profile():
    u = ExactSolution.two_phase(2.0, 2.0).sample(GridSpec(1, 2.0, 0.05, 0.0025, 0.04))
    ts = theorem_sup_scan(u)
    assert ts.hessian_sup == pytest.approx(2.0, abs=0.1) and ts.ut_sup <= 1e-12


def test_theorem_scan_on_caloric_quadratic():
    u = ExactSolution.caloric((1.0,), 2.0).sample(S1)
    ts = theorem_sup_scan(u)
    assert ts.hessian_sup == pytest.approx(2.0) and ts.ut_sup == pytest.approx(2.0)


def test_holder_quotient(field_of):
    assert holder_half_check(field_of(S1, lambda X, t: X[0] ** 2)).quotient == 0.0
    # D_x(x sqrt(t)) = sqrt(t): the worst quotient over lags is exactly 1 (lag from t = 0)
    assert holder_half_check(field_of(S1, lambda X, t: X[0] * math.sqrt(t))).quotient == pytest.approx(1.0)


def test_equation_consistency_on_exact_profile():
    u = ExactSolution.two_phase(2.0, 2.0).sample(GridSpec(1, 2.0, 0.05, 0.0025, 0.04))
    assert equation_consistency(u, PenaltyFamily(2.0, 2.0, 1e-3)) <= 1e-10


def test_bump_is_nonnegative_and_supported_inside():
    b = default_bump_battery(S2)
    assert len(b) == 5
    for bump in b:
        psi, _ = bump.sample(S2)
        assert psi.min() >= 0 and psi.max() > 0
        assert np.all(psi[0] == 0) and np.all(psi[-1] == 0)


def test_pairing_of_subcaloric_parts_is_nonnegative():
    u = ExactSolution.two_phase().sample(S1)
    for _, _, w in subcaloric_battery(u, (1.0,)):
        assert w.ok


def test_pairing_detects_supercaloric_field(field_of):
    # v = -500 x^2 has H[v] = -1000 < 0, so the pairing is negative and well beyond the tolerance
    v = field_of(S1, lambda X, t: -500 * X[0] ** 2)
    w = weak_subcaloric_pairing(v.values, S1, Bump((0.0,), 0.3, 0.02, 0.015))
    assert not w.ok
