"""Plain-text experiment configs: ``key = value`` lines, ``#`` comments,
dotted section prefixes.

Every problem found in a file is collected before anything is raised, so a
single run of ``parse_config`` reports all of them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .data import DATA, Datum
from .errors import ConfigurationError, GeometryError
from .grid import GridSpec
from .kernels import ProbePoint, check_probe
from .penalty import PenaltyFamily

KINDS = ("solve", "epsilon-ladder", "monotonicity", "regularity-sweep", "convergence", "validate")
EXACT_KINDS = ("stationary_two_phase", "caloric_polynomial", "heat_quartic")


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _floats(s):
    return tuple(float(p) for p in s.split(",") if p.strip())


def _points(s):
    """``0, 0; 0.1, 0`` -> ((0.0, 0.0), (0.1, 0.0))."""
    return tuple(tuple(float(c) for c in p.split(",")) for p in s.split(";") if p.strip())


def _opt_float(s):
    return None if s.strip().lower() in ("none", "auto") else float(s)


def _str(s):
    return s.strip()


# key -> (parser, default); the documented defaults filled into every config
SCHEMA = {
    "kind": (_str, None),
    "grid.dim": (_int, 1),
    "grid.radius": (_float, 2.0),
    "grid.h": (_float, 0.01),
    "grid.tau": (_float, 1e-4),
    "grid.horizon": (_float, 0.2),
    "grid.shell_fractions": (_floats, (1.0, 0.9, 0.8, 0.7, 0.1)),
    "penalty.lambda_plus": (_float, 1.0),
    "penalty.lambda_minus": (_float, 1.0),
    "penalty.eps": (_float, 1e-3),
    "initial.kind": (_str, "capped_well"),
    "solver.mollify": (_bool, True),
    "solver.newton_tol": (_float, 1e-10),
    "solver.newton_max_iter": (_int, 50),
    "solver.M_bound": (_opt_float, None),
    "ladder.eps": (_floats, (1e-2, 1e-3, 1e-4)),
    "ladder.c_disc": (_opt_float, None),
    "refine.levels": (_int, 3),
    "probe.times": (_floats, (0.04,)),
    "probe.centers": (_points, None),
    "probe.radii": (_floats, ()),
    "probe.directions": (_points, ()),
    "probe.shell": (_str, "B7"),
    "classify.scale": (_float, 1.0),
    "exact.kind": (_str, "heat_quartic"),
    "convergence.levels": (_int, 3),
    "convergence.mode": (_str, "parabolic"),
    "convergence.target": (_str, "exact"),
    "convergence.exclude_cells": (_int, 0),
    "tolerance.refinement_ratio": (_float, 1.25),
    "tolerance.eps_ratio": (_float, 1.5),
    "tolerance.slope_min": (_float, 0.8),
    "tolerance.magnitude_ratio": (_float, 2.0),
    "tolerance.chain_factor": (_float, 3.0),
    "tolerance.kernel_mass": (_float, 1e-6),
    "tolerance.cutoff_digits": (_int, 6),
    "tolerance.order_time": (_float, 0.9),
    "tolerance.order_space": (_float, 1.8),
    "tolerance.caloric_order": (_float, 1.9),
    "output.dir": (_str, "out"),
    "run.workers": (_int, 1),
}


def _datum_fields(kind):
    return {f.name for f in dataclasses.fields(DATA[kind])}


@dataclass
class ExperimentConfig:
    kind: str
    grid: GridSpec
    penalty: PenaltyFamily
    initial: Datum
    values: dict = field(repr=False, default_factory=dict)
    probes: list = field(default_factory=list)
    source: str = ""

    def get(self, key):
        return self.values[key]

    @property
    def tolerances(self) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("tolerance.")}

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output.dir"])

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """The fully resolved config, defaults included."""
        out = {}
        for k in sorted(self.values):
            v = self.values[k]
            out[k] = [list(p) for p in v] if k in ("probe.centers", "probe.directions") and v is not None else (
                list(v) if isinstance(v, tuple) else v)
        return out


def _split_lines(text: str, violations: list) -> dict:
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            violations.append(f"line {n}: expected 'key = value', got {body!r}")
            continue
        key, val = (p.strip() for p in body.split("=", 1))
        if not key:
            violations.append(f"line {n}: empty key")
            continue
        if key in raw:
            violations.append(f"line {n}: duplicate key {key!r} (first set on line {raw[key][1]})")
            continue
        raw[key] = (val, n)
    return raw


def parse_config_text(text: str, source: str = "<string>", overrides: dict | None = None) -> ExperimentConfig:
    violations = []
    raw = _split_lines(text, violations)
    for k, v in (overrides or {}).items():
        raw[k] = (str(v), 0)
    values = {k: d for k, (_, d) in SCHEMA.items()}
    init_kind = raw.get("initial.kind", (SCHEMA["initial.kind"][1], 0))[0].strip()
    if init_kind not in DATA:
        violations.append(f"initial.kind: unknown datum {init_kind!r} (choose from {sorted(DATA)})")
        allowed_init = set()
    else:
        allowed_init = _datum_fields(init_kind)
    init_params = {}
    for key, (val, n) in raw.items():
        where = f"line {n}: " if n else ""
        if key.startswith("initial.") and key != "initial.kind":
            p = key.split(".", 1)[1]
            if p not in allowed_init:
                violations.append(f"{where}unknown key {key!r} for initial datum {init_kind!r}")
                continue
            try:
                init_params[p] = float(val)
            except ValueError:
                violations.append(f"{where}{key}: {val!r} is not a number")
            continue
        if key not in SCHEMA:
            violations.append(f"{where}unknown key {key!r}")
            continue
        try:
            values[key] = SCHEMA[key][0](val)
        except (ValueError, TypeError) as exc:
            violations.append(f"{where}{key}: {exc}")
    for p, v in init_params.items():
        values[f"initial.{p}"] = v

    kind = values["kind"]
    if kind is None:
        violations.append("missing required key 'kind'")
    elif kind not in KINDS:
        violations.append(f"kind: {kind!r} is not one of {', '.join(KINDS)}")
    if values["convergence.mode"] not in ("space", "time", "parabolic"):
        violations.append("convergence.mode must be space, time or parabolic")
    if values["convergence.target"] not in ("exact", "reference"):
        violations.append("convergence.target must be exact or reference")
    if values["exact.kind"] not in EXACT_KINDS:
        violations.append(f"exact.kind must be one of {', '.join(EXACT_KINDS)}")
    if values["run.workers"] < 1:
        violations.append("run.workers must be >= 1")
    if not 1 <= values["refine.levels"] <= 4:
        violations.append("refine.levels must lie in 1..4")

    grid = penalty = datum = None
    try:
        grid = GridSpec(values["grid.dim"], values["grid.radius"], values["grid.h"], values["grid.tau"],
                        values["grid.horizon"], values["grid.shell_fractions"])
    except ConfigurationError as exc:
        violations.extend(f"grid: {v}" for v in exc.violations)
    try:
        penalty = PenaltyFamily(values["penalty.lambda_plus"], values["penalty.lambda_minus"], values["penalty.eps"])
    except ConfigurationError as exc:
        violations.extend(f"penalty: {v}" for v in exc.violations)
    if init_kind in DATA:
        datum = DATA[init_kind](**init_params)
        for p, v in dataclasses.asdict(datum).items():
            values[f"initial.{p}"] = float(v)
    ladder = values["ladder.eps"]
    if any(a <= b for a, b in zip(ladder, ladder[1:])):
        violations.append(f"ladder.eps must be strictly decreasing, got {list(ladder)}")

    probes = []
    if grid is not None and kind in ("monotonicity", "regularity-sweep"):
        dim = grid.dim
        centers = values["probe.centers"] or ((0.0,) * dim,)
        values["probe.centers"] = centers
        for c in centers:
            if len(c) != dim:
                violations.append(f"probe.centers: point {c} does not have {dim} coordinates")
                continue
            for t0 in values["probe.times"]:
                try:
                    z = ProbePoint(c, t0)
                    check_probe(grid, z, values["probe.shell"])
                    probes.append(z)
                except GeometryError as exc:
                    violations.append(f"ProbePoint invariant violated (B_6R(x0) inside the 0.7 rho shell, "
                                      f"t0 on the grid): {exc}")
                except ConfigurationError as exc:
                    violations.append(f"probe.shell: {exc}")
        for d in values["probe.directions"]:
            if len(d) != dim:
                violations.append(f"probe.directions: {d} does not have {dim} coordinates")
    if violations:
        raise ConfigurationError(f"{source}: {len(violations)} problem(s):\n  " + "\n  ".join(violations), violations)
    return ExperimentConfig(kind, grid, penalty, datum, values, probes, source)


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {str(path)!r} does not exist")
    return parse_config_text(path.read_text(), str(path), overrides)


def render_config(cfg: ExperimentConfig) -> str:
    """Round-trippable text form of a resolved config."""
    lines = []
    for k, v in cfg.to_dict().items():
        if v is None:
            if k in ("probe.centers",):
                continue
            v = "auto"
        elif isinstance(v, list) and v and isinstance(v[0], list):
            v = "; ".join(", ".join(repr(c) for c in p) for p in v)
        elif isinstance(v, list):
            v = ", ".join(repr(c) for c in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        if v == "":
            continue
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
