import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstaclelab import ConfigurationError, GridSpec, MollificationError, PenaltyFamily, build_grid, mollify_initial
from obstaclelab.data import Affine, SignedQuadratic
from obstaclelab.penalty import exact_rhs, measured_lipschitz, penalty_eval


def test_penalty_examples():
    pf = PenaltyFamily(1.0, 2.0, 0.1)
    assert penalty_eval(pf, 0.1) == pytest.approx(1.0)
    assert penalty_eval(pf, -0.1) == pytest.approx(-2.0)
    assert penalty_eval(PenaltyFamily(1.0, 1.0, 0.1), 0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("eps", [0.0, -1e-3])
def test_nonpositive_eps_rejected(eps):
    with pytest.raises(ConfigurationError):
        PenaltyFamily(1.0, 1.0, eps)


def test_exact_rhs_examples():
    assert exact_rhs(PenaltyFamily(3.0, 1.0, 0.1), 1e-9) == 3.0
    assert exact_rhs(PenaltyFamily(1.0, 1.0, 0.1), 0.0) == 0.0
    assert exact_rhs(PenaltyFamily(0.0, 5.0, 0.1), -2.0) == -5.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0.01, 5), st.floats(1e-4, 1.0))
def test_penalty_monotone_bounded_and_matches_outside_band(lp, lm, eps):
    pf = PenaltyFamily(lp, lm, eps)
    s = np.linspace(-3 * eps, 3 * eps, 601)
    f = penalty_eval(pf, s)
    assert np.all(np.diff(f) >= -1e-12)
    assert np.all(f <= lp + 1e-12) and np.all(f >= -lm - 1e-12)
    out = np.abs(s) >= eps
    assert np.allclose(f[out], exact_rhs(pf, s[out]))
    assert measured_lipschitz(pf) <= pf.lipschitz_constant() * (1 + 1e-6)


@pytest.mark.parametrize("s", [-0.3, -1e-3, 2e-3, 0.7])
def test_penalty_converges_to_indicator(s):
    pf = PenaltyFamily(1.5, 0.5, 1.0)
    vals = [penalty_eval(pf.with_eps(e), s) for e in (1.0, 1e-2, 1e-4, 1e-6)]
    assert vals[-1] == exact_rhs(pf, s)


def test_mollifier_preserves_affine():
    g = build_grid(GridSpec(1, 2.0, 0.05, 0.01, 0.1))
    m = mollify_initial(Affine(2.0, 0.0, 0.3), 1e-3, g)
    assert m.certified_gap <= 1e-12
    assert np.allclose(m.values, 2.0 * g.axis + 0.3)


def test_mollifier_certifies_c11_datum():
    g = build_grid(GridSpec(1, 2.0, 0.01, 0.01, 0.1))
    m = mollify_initial(SignedQuadratic(1.0), 1e-3, g)
    assert m.certified_gap <= 1e-3
    # direct scan against the exact datum
    assert np.max(np.abs(m.values - SignedQuadratic(1.0)(g.coords))) <= 1e-3
    assert m.radius >= 2 * g.spec.h


def test_mollifier_rejects_zero_eps():
    g = build_grid(GridSpec(1, 2.0, 0.05, 0.01, 0.1))
    with pytest.raises(ConfigurationError):
        mollify_initial(Affine(), 0.0, g)


def test_mollifier_reports_uncertifiable_gap():
    g = build_grid(GridSpec(1, 2.0, 0.1, 0.01, 0.1))
    with pytest.raises(MollificationError):
        mollify_initial(lambda X: 50 * X[0] ** 2, 1e-4, g)
