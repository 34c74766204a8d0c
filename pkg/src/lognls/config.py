"""Experiment configuration: TOML parsing, validation and serialization.

Grammar (TOML)::

    kind = "pde"                 # gaussian_ode | pde | compare | fp | asymptotics

    [model]
    lambda = 1.0
    mu = 0.0                     # optional power term
    sigma = 1.0                  # read only when mu > 0
    epsilon = 1e-12

    [init]                       # Gaussian data ...
    b0 = [1.0, 0.0]              # (re, im)
    a0 = [[1.0, 0.0]]            # one (re, im) pair per axis
    x0 = [0.0]
    # ... or a stored field:  field = "snap.json"

    [grid]
    d = 1
    n = 1024
    L = 40.0

    [times]
    t_end = 1.0
    dt = 1e-3
    schedule = "linear"          # linear | log | none
    count = 11
    t_min = 0.1                  # first positive time of a log schedule
    dt_rel = 3e-3                # growing / rescaled solvers

    [solver]
    frame = "fixed"              # fixed | growing | rescaled

    [fp]
    s_end = 3.0
    count = 13
    shift = 1.0
    scale = 1.0

    [output]
    directory = "out"
    formats = ["csv", "json", "svg"]
    fields = false

    [tolerances]
    rel_tol = 1e-10
    leak_tol = 1e-6
    sobolev = [0.25, 0.5, 0.75, 1.0]
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError, LogNLSError
from .gaussian_ode import GaussianInit
from .grid import Grid
from .solver import ModelParams

log = logging.getLogger(__name__)

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "load_config", "KINDS"]

KINDS = ("gaussian_ode", "pde", "compare", "fp", "asymptotics")
SCHEDULES = ("linear", "log", "none")
FRAMES = ("fixed", "growing", "rescaled")
FORMATS = ("csv", "json", "svg")

_SECTIONS = {
    "model": {"lambda", "mu", "sigma", "epsilon"},
    "init": {"b0", "a0", "x0", "field"},
    "grid": {"d", "n", "L"},
    "times": {"t_end", "dt", "schedule", "count", "t_min", "dt_rel"},
    "solver": {"frame"},
    "fp": {"s_end", "count", "shift", "scale"},
    "output": {"directory", "formats", "fields"},
    "tolerances": {"rel_tol", "leak_tol", "sobolev"},
}


@dataclass(frozen=True)
class Times:
    t_end: float = None
    dt: float = None
    schedule: str = "linear"
    count: int = 11
    t_min: float = 0.1
    dt_rel: float = 3e-3

    def snapshot_times(self):
        """Sorted snapshot times inside ``[0, t_end]``."""
        if self.schedule == "none" or self.t_end is None:
            return []
        if self.schedule == "linear":
            return [float(t) for t in np.linspace(0.0, self.t_end, self.count)]
        pts = np.geomspace(min(self.t_min, self.t_end), self.t_end, max(self.count - 1, 1))
        return [0.0] + [float(t) for t in pts]


@dataclass(frozen=True)
class FPSpec:
    s_end: float = 3.0
    count: int = 13
    shift: float = 1.0
    scale: float = 1.0


@dataclass(frozen=True)
class Output:
    directory: str = "out"
    formats: tuple = FORMATS
    fields: bool = False


@dataclass(frozen=True)
class Tolerances:
    rel_tol: float = 1e-10
    leak_tol: float = 1e-6
    sobolev: tuple = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: ModelParams
    init: object = None            # GaussianInit, a field path (str) or None
    grid: Grid = None
    times: Times = Times()
    frame: str = "fixed"
    fp: FPSpec = FPSpec()
    output: Output = Output()
    tolerances: Tolerances = Tolerances()
    warnings: tuple = field(default=(), compare=False)


def _num(errors, where, value, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{where} must be a number, got {value!r}")
        return None
    if integer and not float(value).is_integer():
        errors.append(f"{where} must be an integer, got {value!r}")
        return None
    if not math.isfinite(value):
        errors.append(f"{where} must be finite, got {value!r}")
        return None
    if positive and not value > 0:
        errors.append(f"{where} must be positive")
        return None
    if nonneg and not value >= 0:
        errors.append(f"{where} must be nonnegative")
        return None
    return int(value) if integer else float(value)


def _complex(errors, where, value):
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
        return complex(value[0], value[1])
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    errors.append(f"{where} must be a number or a [re, im] pair, got {value!r}")
    return None


def _validate(data):
    errors, warnings = [], []
    for key in data:
        if key != "kind" and key not in _SECTIONS:
            errors.append(f"unknown section or key {key!r}")
    for sec, keys in _SECTIONS.items():
        body = data.get(sec, {})
        if not isinstance(body, dict):
            errors.append(f"[{sec}] must be a table")
            data[sec] = {}
            continue
        for k in body:
            if k not in keys:
                errors.append(f"unknown key {sec}.{k}")

    kind = data.get("kind")
    if kind is None:
        errors.append("kind is required")
    elif kind not in KINDS:
        errors.append(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    # model
    m = data.get("model", {})
    lam = _num(errors, "model.lambda", m["lambda"]) if "lambda" in m else None
    if "lambda" not in m and kind != "fp":
        errors.append("model.lambda is required")
    if lam is not None and lam == 0:
        errors.append("model.lambda must be nonzero")
        lam = None
    mu = _num(errors, "model.mu", m.get("mu", 0.0), nonneg=True)
    sigma = _num(errors, "model.sigma", m.get("sigma", 1.0), positive=True)
    eps = _num(errors, "model.epsilon", m.get("epsilon", 1e-12), nonneg=True)
    if "sigma" in m and mu == 0:
        msg = "model.sigma is ignored because model.mu = 0"
        warnings.append(msg)
        log.warning(msg)
    if mu == 0:
        sigma = 1.0
    model = None
    try:
        if None not in (mu, sigma, eps):
            model = ModelParams(lam if lam is not None else 1.0, mu, sigma, eps)
    except LogNLSError as exc:
        errors.append(f"model: {exc}")

    # grid
    grid = None
    g = data.get("grid", {})
    if g:
        d = _num(errors, "grid.d", g.get("d", 1), integer=True)
        n = _num(errors, "grid.n", g.get("n"), integer=True) if "n" in g else None
        L = _num(errors, "grid.L", g.get("L"), positive=True) if "L" in g else None
        if n is None and "n" not in g:
            errors.append("grid.n is required")
        if L is None and "L" not in g:
            errors.append("grid.L is required")
        if None not in (d, n, L):
            try:
                grid = Grid(d, n, L)
            except LogNLSError as exc:
                errors.append(f"grid: {exc}")
            if grid is not None and model is not None:
                try:
                    model.check_dimension(grid.d)
                except LogNLSError as exc:
                    errors.append(f"model: {exc}")

    # init
    init = None
    i = data.get("init", {})
    if "field" in i:
        if not isinstance(i["field"], str):
            errors.append("init.field must be a path string")
        elif set(i) - {"field"}:
            errors.append("init.field cannot be combined with Gaussian parameters")
        else:
            init = i["field"]
    elif i:
        b0 = _complex(errors, "init.b0", i.get("b0", 1.0))
        a0_raw = i.get("a0")
        a0 = None
        if a0_raw is None:
            errors.append("init.a0 is required for Gaussian data")
        elif not isinstance(a0_raw, list) or not a0_raw:
            errors.append("init.a0 must be a non-empty list of per-axis values")
        else:
            a0 = [_complex(errors, f"init.a0[{j}]", a) for j, a in enumerate(a0_raw)]
        x0 = i.get("x0")
        if x0 is not None and not (isinstance(x0, list) and all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in x0)):
            errors.append("init.x0 must be a list of numbers")
            x0 = None
        if b0 is not None and a0 is not None and None not in a0:
            try:
                init = GaussianInit(b0, a0, x0)
            except LogNLSError as exc:
                errors.append(f"init: {exc}")
            if init is not None and grid is not None and init.d != grid.d:
                errors.append(f"init has {init.d} axes but grid.d = {grid.d}")

    # times
    t = data.get("times", {})
    t_end = None
    if "t_end" in t:
        t_end = _num(errors, "times.t_end", t["t_end"])
        if t_end is not None and not t_end > 0:
            errors.append("times.t_end must be positive")
            t_end = None
    dt = None
    if "dt" in t:
        dt = _num(errors, "times.dt", t["dt"])
        if dt is not None and not dt > 0:
            errors.append("times.dt must be positive")
            dt = None
    schedule = t.get("schedule", "linear")
    if schedule not in SCHEDULES:
        errors.append(f"times.schedule must be one of {', '.join(SCHEDULES)}")
        schedule = "linear"
    count = _num(errors, "times.count", t.get("count", 11), integer=True)
    if count is not None and count < 1:
        errors.append("times.count must be at least 1")
    t_min = _num(errors, "times.t_min", t.get("t_min", 0.1), positive=True)
    dt_rel = _num(errors, "times.dt_rel", t.get("dt_rel", 3e-3), positive=True)
    times = Times(t_end, dt, schedule, count or 1, t_min or 0.1, dt_rel or 3e-3)

    frame = data.get("solver", {}).get("frame", "fixed")
    if frame not in FRAMES:
        errors.append(f"solver.frame must be one of {', '.join(FRAMES)}")

    f = data.get("fp", {})
    fps = FPSpec(
        _num(errors, "fp.s_end", f.get("s_end", 3.0), positive=True) or 3.0,
        _num(errors, "fp.count", f.get("count", 13), integer=True, positive=True) or 13,
        _num(errors, "fp.shift", f.get("shift", 1.0)) or 0.0,
        _num(errors, "fp.scale", f.get("scale", 1.0), positive=True) or 1.0)

    o = data.get("output", {})
    directory = o.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        errors.append("output.directory must be a non-empty string")
        directory = "out"
    formats = o.get("formats", list(FORMATS))
    if not isinstance(formats, list) or any(x not in FORMATS for x in formats):
        errors.append(f"output.formats must be a list drawn from {', '.join(FORMATS)}")
        formats = list(FORMATS)
    fields = o.get("fields", False)
    if not isinstance(fields, bool):
        errors.append("output.fields must be true or false")
        fields = False
    output = Output(directory, tuple(formats), fields)

    tol = data.get("tolerances", {})
    rel_tol = _num(errors, "tolerances.rel_tol", tol.get("rel_tol", 1e-10), positive=True)
    if rel_tol is not None and rel_tol > 1e-3:
        errors.append("tolerances.rel_tol must not exceed 1e-3")
    leak_tol = _num(errors, "tolerances.leak_tol", tol.get("leak_tol", 1e-6), positive=True)
    sob = tol.get("sobolev", [0.25, 0.5, 0.75, 1.0])
    if not isinstance(sob, list) or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) or not 0 < x <= 1 for x in sob):
        errors.append("tolerances.sobolev must be a list of exponents in (0, 1]")
        sob = []
    tols = Tolerances(rel_tol or 1e-10, leak_tol or 1e-6, tuple(float(x) for x in sob))

    # kind-specific requirements
    init_failed = any(e.startswith("init") for e in errors)
    if kind in ("gaussian_ode", "compare") and not isinstance(init, GaussianInit) and not init_failed:
        errors.append(f"kind={kind} needs Gaussian [init] data")
    if kind == "pde" and init is None and not init_failed:
        errors.append("kind=pde needs an [init] section")
    if kind in ("pde", "compare", "fp") and grid is None and "grid" not in data:
        errors.append(f"kind={kind} needs a [grid] section")
    if kind in ("gaussian_ode", "pde", "compare", "asymptotics") and t_end is None \
            and "t_end" not in t:
        errors.append("times.t_end is required")
    if kind in ("pde", "compare") and frame == "fixed" and dt is None and "dt" not in t:
        errors.append("times.dt is required for fixed-frame runs")
    if kind in ("gaussian_ode", "compare", "asymptotics") and lam is not None and lam < 0:
        errors.append(f"kind={kind} needs model.lambda > 0")
    if kind == "pde" and frame == "rescaled" and lam is not None and lam < 0:
        errors.append("the rescaled frame needs model.lambda > 0")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind=kind, model=model, init=init, grid=grid, times=times,
                            frame=frame, fp=fps, output=output, tolerances=tols,
                            warnings=tuple(warnings))


def parse_config(text):
    """Parse and validate TOML text.

    Raises
    ------
    ConfigError
        Syntax errors (with line and column) or the full list of semantic
        violations.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    return _validate(data)


def load_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError([f"{path}: not valid UTF-8 ({exc})"]) from None
    return parse_config(text)


def _pair(z):
    return [z.real, z.imag]


def to_dict(cfg):
    out = {"kind": cfg.kind}
    m = cfg.model
    out["model"] = {"lambda": m.lam, "mu": m.mu, "epsilon": m.epsilon}
    if m.mu > 0:
        out["model"]["sigma"] = m.sigma
    if isinstance(cfg.init, GaussianInit):
        out["init"] = {"b0": _pair(cfg.init.b0), "a0": [_pair(a) for a in cfg.init.a0],
                       "x0": list(cfg.init.x0)}
    elif isinstance(cfg.init, str):
        out["init"] = {"field": cfg.init}
    if cfg.grid is not None:
        out["grid"] = cfg.grid.to_dict()
    times = {k: v for k, v in asdict(cfg.times).items() if v is not None}
    out["times"] = times
    out["solver"] = {"frame": cfg.frame}
    out["fp"] = asdict(cfg.fp)
    out["output"] = {"directory": cfg.output.directory, "formats": list(cfg.output.formats),
                     "fields": cfg.output.fields}
    out["tolerances"] = {"rel_tol": cfg.tolerances.rel_tol, "leak_tol": cfg.tolerances.leak_tol,
                         "sobolev": list(cfg.tolerances.sobolev)}
    return out


def serialize_config(cfg):
    """TOML text that :func:`parse_config` maps back to ``cfg``."""
    return tomli_w.dumps(to_dict(cfg))
