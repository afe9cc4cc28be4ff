import math

import numpy as np
import pytest

from obstaclelab import (
    ConfigurationError,
    CutoffProfile,
    DomainError,
    GeometryError,
    GridSpec,
    HeatKernel,
    PreconditionError,
    ProbePoint,
    monotonicity_scan,
)
from obstaclelab.grid import fit_exponent
from obstaclelab.kernels import (
    check_probe,
    cutoff_eval,
    dyadic_radii,
    kernel_caloric_defect,
    kernel_slice_mass,
    phi_functional,
    weighted_energy,
)
from obstaclelab.oracle import ExactSolution


def test_kernel_values():
    G = HeatKernel(1)
    assert G(np.array([0.3]), -1.0) == 0.0
    assert G(np.array([0.0]), 1.0) == pytest.approx((4 * math.pi) ** -0.5, rel=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("t", [0.05, 0.3, 1.0])
def test_kernel_slice_mass(dim, t):
    assert kernel_slice_mass(GridSpec(dim, 10.0, 0.05, 0.05, 1.0), t) == pytest.approx(1.0, abs=1e-6)


def test_kernel_caloricity_defect_is_second_order():
    hs = [0.1, 0.05, 0.025]
    assert fit_exponent(hs, [kernel_caloric_defect(1, h, 0.25) for h in hs]) >= 1.9


def test_cutoff_examples():
    c = CutoffProfile((0.0,), 0.2)
    v, g, _ = cutoff_eval(c, np.array([0.1]))
    assert v == 1.0 and np.all(g == 0)
    v, g, _ = cutoff_eval(c, np.array([0.6]))
    assert v == 0.0 and np.all(g == 0)
    with pytest.raises(ConfigurationError):
        CutoffProfile((0.0,), 0.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_cutoff_constants_are_scale_invariant(dim):
    consts = [CutoffProfile((0.0,) * dim, r).realized_constants() for r in (0.1, 0.2, 0.4)]
    for j in range(2):
        vals = [c[j] for c in consts]
        assert vals[0] > 0
        assert (max(vals) - min(vals)) / min(vals) <= 1e-6


def spec1():
    return GridSpec(1, 2.0, 0.025, 0.000625, 0.04)


def test_weighted_energy_of_zero_and_unit_gradient(field_of):
    z = ProbePoint((0.0,), 0.04)
    assert weighted_energy(field_of(spec1(), lambda X, t: 0 * X[0]), z, 0.1) == 0.0
    lin = field_of(spec1(), lambda X, t: X[0])
    for r in (0.2, 0.1):
        val = weighted_energy(lin, z, r)
        assert r * r - spec1().tau - 1e-9 <= val <= r * r + 1e-9
    with pytest.raises(DomainError):
        weighted_energy(lin, z, 0.3)


def test_phi_functional_vanishes_and_requires_disjoint_supports(field_of):
    s = spec1()
    z = ProbePoint((0.0,), 0.04)
    pos = field_of(s, lambda X, t: np.maximum(X[0], 0.0))
    zero = field_of(s, lambda X, t: 0 * X[0])
    c = CutoffProfile(z.x0, z.R)
    assert phi_functional(pos, zero, z, 0.1, c) == 0.0
    with pytest.raises(PreconditionError):
        phi_functional(pos, pos, z, 0.1, c)


def test_check_probe_geometry():
    s = GridSpec(1, 2.0, 0.05, 0.0025, 0.1)
    check_probe(s, ProbePoint((0.0,), 0.04))
    with pytest.raises(GeometryError):
        check_probe(s, ProbePoint((0.5,), 0.04))
    with pytest.raises(GeometryError):
        check_probe(s, ProbePoint((0.0,), 0.041))


def test_dyadic_radii_stop_at_two_h():
    assert dyadic_radii(0.2, 0.025) == [0.2, 0.1, 0.05]


def test_scan_on_stationary_profile_is_trivially_monotone():
    u = ExactSolution.two_phase().sample(spec1())
    m = monotonicity_scan(u, ProbePoint((0.0,), 0.04), (1.0,))
    assert all(p == 0.0 for p in m.phi) and m.passed


def test_scan_on_caloric_field_passes():
    u = ExactSolution.caloric((1.0, -1.0), 0.0, lin=(0.1, 0.05)).sample(GridSpec(2, 2.0, 0.05, 0.0025, 0.04))
    e = (1 / math.sqrt(2), 1 / math.sqrt(2))
    m = monotonicity_scan(u, ProbePoint((0.0, 0.0), 0.04), e)
    assert m.passed and m.phi_R > 0


def test_scan_rejects_radii_below_two_h():
    u = ExactSolution.two_phase().sample(spec1())
    with pytest.raises(PreconditionError):
        monotonicity_scan(u, ProbePoint((0.0,), 0.04), (1.0,), radii=[0.2, 0.04])
