import pytest

from obstaclelab import ConfigurationError, parse_config, parse_config_text
from obstaclelab.config import SCHEMA, render_config


def test_minimal_config_fills_defaults():
    cfg = parse_config_text("kind = solve\n")
    assert cfg.grid.dim == 1 and cfg.grid.h == SCHEMA["grid.h"][1]
    assert cfg.penalty.eps == 1e-3
    assert cfg.values["initial.a"] == 1.0 and cfg.values["initial.b"] == 0.4


def test_duplicate_key():
    with pytest.raises(ConfigurationError, match="duplicate key 'grid.h'"):
        parse_config_text("kind = solve\ngrid.h = 0.01\ngrid.h = 0.02\n")


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="grid.hh"):
        parse_config_text("kind = solve\ngrid.hh = 0.01\n")


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigurationError) as info:
        parse_config_text("grid.h = abc\nfoo = 1\npenalty.eps = -1\n")
    assert len(info.value.violations) >= 4


def test_probe_geometry_violation_cites_invariant():
    text = "kind = monotonicity\ngrid.radius = 2\nprobe.centers = 1.0\nprobe.times = 0.04\n"
    with pytest.raises(ConfigurationError, match="ProbePoint invariant"):
        parse_config_text(text)


def test_probe_time_must_be_a_level():
    with pytest.raises(ConfigurationError, match="ProbePoint invariant"):
        parse_config_text("kind = monotonicity\nprobe.times = 0.04005\n")


def test_initial_datum_params_checked():
    with pytest.raises(ConfigurationError, match="initial.zz"):
        parse_config_text("kind = solve\ninitial.kind = two_phase\ninitial.zz = 1\n")


def test_render_roundtrip(tmp_path):
    cfg = parse_config_text("kind = monotonicity\ngrid.dim = 2\ninitial.kind = capped_saddle\n"
                            "grid.h = 0.025\ngrid.tau = 6.25e-4\ngrid.horizon = 0.04\n"
                            "probe.centers = 0, 0; 0.1, 0\n")
    p = tmp_path / "c.cfg"
    p.write_text(render_config(cfg))
    again = parse_config(p)
    assert again.to_dict() == cfg.to_dict()
    assert len(again.probes) == 2


def test_missing_file():
    with pytest.raises(ConfigurationError):
        parse_config("/nonexistent/x.cfg")
