import numpy as np
import pytest

from obstaclelab import (
    ConfigurationError,
    GridSpec,
    NumericError,
    PenaltyFamily,
    SolveConfig,
    SolverError,
    build_grid,
    epsilon_limit,
    solve,
)
from obstaclelab.data import CappedWell, TwoPhaseProfile
from obstaclelab.oracle import ExactSolution
from obstaclelab.solver import initial_time_derivative_check, shell_time_derivative_sup, step


def stationary_cfg(h=0.05, tau=0.0025, T=0.05):
    ex = ExactSolution.two_phase(2.0, 2.0)
    return ex.solve_config(GridSpec(1, 2.0, h, tau, T))


def test_stationary_profile_is_preserved():
    cfg = stationary_cfg()
    u = solve(cfg).field
    drift = np.max(np.abs(u.values - u.values[0]))
    assert drift <= cfg.newton_tol + cfg.grid.h**2


def test_step_on_caloric_polynomial():
    ex = ExactSolution.caloric((1.0,), 2.0)
    spec = GridSpec(1, 1.0, 0.05, 0.001, 0.01)
    cfg = ex.solve_config(spec)
    w = step(cfg.initial.values, cfg)
    X = build_grid(spec).coords
    # x^2 + 2t is reproduced exactly by the scheme
    assert np.max(np.abs(w - ex(X, spec.tau))) <= 1e-10


def test_nan_state_is_a_numeric_error():
    cfg = stationary_cfg()
    bad = np.array(cfg.initial.values)
    bad[3] = np.nan
    with pytest.raises(NumericError):
        step(bad, cfg)


def test_newton_failure_carries_residual_trace():
    cfg = SolveConfig(GridSpec(1, 2.0, 0.05, 0.5, 1.0), PenaltyFamily(1.0, 1.0, 1e-6), CappedWell(),
                      mollify=False, newton_max_iter=1)
    with pytest.raises(SolverError) as info:
        solve(cfg)
    assert info.value.residual > cfg.newton_tol
    assert info.value.trace and info.value.level == 1


def test_bad_solver_settings_rejected():
    with pytest.raises(ConfigurationError):
        SolveConfig(GridSpec(1, 2.0, 0.05, 0.01, 0.1), PenaltyFamily(1, 1, 1e-2), CappedWell(), newton_tol=0.0)


def test_runs_are_bit_identical():
    cfg = SolveConfig(GridSpec(1, 2.0, 0.02, 4e-4, 0.04), PenaltyFamily(1.0, 1.0, 1e-3), CappedWell())
    a, b = solve(cfg).field.values, solve(cfg).field.values
    assert a.tobytes() == b.tobytes()


def test_solution_stays_within_a_priori_bound():
    cfg = SolveConfig(GridSpec(1, 2.0, 0.02, 4e-4, 0.1), PenaltyFamily(1.0, 1.0, 1e-3), CappedWell())
    rep = solve(cfg)
    assert rep.m_bound_ok
    assert rep.max_residual <= cfg.newton_tol


def test_two_dimensional_solve_runs():
    from obstaclelab.data import CappedSaddle

    cfg = SolveConfig(GridSpec(2, 1.0, 0.05, 0.0025, 0.01), PenaltyFamily(1.0, 1.0, 1e-2), CappedSaddle(1.0, 0.4))
    rep = solve(cfg)
    assert rep.max_residual <= cfg.newton_tol
    assert rep.field.values.shape == (5, 41, 41)


def test_ladder_single_entry_has_no_gaps():
    lad = epsilon_limit(stationary_cfg(), [1e-3])
    assert lad.gaps == [] and lad.ok


def test_ladder_must_decrease():
    with pytest.raises(ConfigurationError):
        epsilon_limit(stationary_cfg(), [1e-3, 1e-2])


def test_ladder_on_stationary_data():
    cfg = SolveConfig(GridSpec(1, 2.0, 0.05, 0.0025, 0.05), PenaltyFamily(2.0, 2.0, 1e-3), TwoPhaseProfile(),
                      mollify=False, lateral_bc=ExactSolution.two_phase().lateral)
    lad = epsilon_limit(cfg, [1e-3, 1e-4])
    assert lad.gaps[0].gap <= 2 * cfg.newton_tol + cfg.grid.h**2


def test_ladder_default_config_pair():
    cfg = SolveConfig(GridSpec(1, 2.0, 0.02, 4e-4, 0.1), PenaltyFamily(1.0, 1.0, 1e-2), CappedWell())
    lad = epsilon_limit(cfg, [1e-2, 1e-3], c_disc=0.0)
    assert lad.gaps[0].gap <= 1.1e-2


def test_initial_time_derivative_defect_order():
    spec = GridSpec(1, 2.0, 0.05, 2.5e-4, 0.01)
    cfg = SolveConfig(spec, PenaltyFamily(1.0, 1.0, 1e-2), CappedWell())
    d1 = initial_time_derivative_check(solve(cfg), cfg)
    fine = cfg.replace(grid=spec.with_(tau=spec.tau / 2))
    d2 = initial_time_derivative_check(solve(fine), fine)
    assert d1 / d2 >= 1.8


def test_caloric_identity_defect_is_small():
    ex = ExactSolution.caloric((1.0,), 2.0)
    cfg = ex.solve_config(GridSpec(1, 1.0, 0.05, 0.001, 0.01))
    assert initial_time_derivative_check(solve(cfg), cfg) <= 10 * cfg.grid.tau


def test_shell_time_derivative_of_stationary_run_vanishes():
    u = solve(stationary_cfg()).field
    assert shell_time_derivative_sup(u, 1.6) <= 1e-8
