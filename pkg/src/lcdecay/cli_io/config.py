"""Run configuration (YAML) and initial-data synthesis.

Grammar
-------
A YAML mapping with the sections below; every key is optional and takes the
listed default, unknown sections or keys are errors.  Floats may be written
in any YAML number form; strings such as ``1e-3`` (which YAML 1.1 reads as
text) are accepted for float keys.

``grid``      n (int, power of two >= 8, default 32), L (float > 0, 2 pi)
``time``      dt (> 0, 1e-3), T (>= 0, 1.0), record_interval (steps >= 1, 1),
              cfl_safety (in (0, 1], 0.5)
``model``     xi (0.0), a (1.0), b (0.0), c (1.0), linearized (false),
              feedback (true)
``init``      u_kind (solenoidal_blob | taylor_green | zero),
              q_kind (gaussian_blob | random_smooth | zero),
              amplitude_u (>= 0, 0.1), amplitude_q (>= 0, 0.1),
              width (> 0, 1.0), seed (int >= 0, 0)
``output``    csv_path ("diagnostics.csv"), checkpoint_path (null),
              checkpoint_interval (steps >= 0, 0 = never)
``analysis``  beta (in [0, 1/2], 0.0), epsilon (> 0, 0.1),
              fit_window (null or [t_lo, t_hi]), contamination_fraction (> 0, 0.1),
              oracle_horizon (> 0, 1e4)
``flow``      dt (> 0, 0.05), max_iter (int >= 1, 20000), tol (null or > 0)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import yaml

from .. import tensor
from ..dynamics import ModelParams, State
from ..potentials import PolynomialPotential, PotentialHypothesesReport
from ..spectral import PeriodicGrid, QField, VecField


class ConfigError(ValueError):
    """All violations found in a configuration document."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class GridSection:
    n: int = 32
    L: float = 2.0 * math.pi


@dataclass
class TimeSection:
    dt: float = 1.0e-3
    T: float = 1.0
    record_interval: int = 1
    cfl_safety: float = 0.5


@dataclass
class ModelSection:
    xi: float = 0.0
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    linearized: bool = False
    feedback: bool = True


@dataclass
class InitSection:
    u_kind: str = "solenoidal_blob"
    q_kind: str = "gaussian_blob"
    amplitude_u: float = 0.1
    amplitude_q: float = 0.1
    width: float = 1.0
    seed: int = 0


@dataclass
class OutputSection:
    csv_path: str = "diagnostics.csv"
    checkpoint_path: Optional[str] = None
    checkpoint_interval: int = 0


@dataclass
class AnalysisSection:
    beta: float = 0.0
    epsilon: float = 0.1
    fit_window: Optional[list] = None
    contamination_fraction: float = 0.1
    oracle_horizon: float = 1.0e4


@dataclass
class FlowSection:
    dt: float = 0.05
    max_iter: int = 20000
    tol: Optional[float] = None


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    model: ModelSection = field(default_factory=ModelSection)
    init: InitSection = field(default_factory=InitSection)
    output: OutputSection = field(default_factory=OutputSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    flow: FlowSection = field(default_factory=FlowSection)

    def potential(self) -> PolynomialPotential:
        m = self.model
        return PolynomialPotential(m.a, m.b, m.c)

    def model_params(self) -> ModelParams:
        m = self.model
        return ModelParams(xi=m.xi, potential=self.potential(), linearized=m.linearized,
                           feedback=m.feedback)

    def make_grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.grid.n, self.grid.L)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}

U_KINDS = ("solenoidal_blob", "taylor_green", "zero")
Q_KINDS = ("gaussian_blob", "random_smooth", "zero")


def _pos(v):
    return v > 0.0


def _nonneg(v):
    return v >= 0.0


_CONSTRAINTS = {
    ("grid", "n"): (lambda v: v >= 8 and v & (v - 1) == 0, "power of two >= 8"),
    ("grid", "L"): (_pos, "must be > 0"),
    ("time", "dt"): (_pos, "must be > 0"),
    ("time", "T"): (_nonneg, "must be >= 0"),
    ("time", "record_interval"): (lambda v: v >= 1, "must be >= 1"),
    ("time", "cfl_safety"): (lambda v: 0.0 < v <= 1.0, "must lie in (0, 1]"),
    ("init", "u_kind"): (lambda v: v in U_KINDS, "one of " + ", ".join(U_KINDS)),
    ("init", "q_kind"): (lambda v: v in Q_KINDS, "one of " + ", ".join(Q_KINDS)),
    ("init", "amplitude_u"): (_nonneg, "must be >= 0"),
    ("init", "amplitude_q"): (_nonneg, "must be >= 0"),
    ("init", "width"): (_pos, "must be > 0"),
    ("init", "seed"): (lambda v: 0 <= v < 2**64, "integer in [0, 2^64)"),
    ("output", "checkpoint_interval"): (_nonneg, "must be >= 0"),
    ("analysis", "beta"): (lambda v: 0.0 <= v <= 0.5, "must lie in [0, 1/2]"),
    ("analysis", "epsilon"): (_pos, "must be > 0"),
    ("analysis", "fit_window"): (
        lambda v: v is None or (len(v) == 2 and 0.0 <= v[0] < v[1]),
        "null or [t_lo, t_hi] with 0 <= t_lo < t_hi"),
    ("analysis", "contamination_fraction"): (_pos, "must be > 0"),
    ("analysis", "oracle_horizon"): (_pos, "must be > 0"),
    ("flow", "dt"): (_pos, "must be > 0"),
    ("flow", "max_iter"): (lambda v: v >= 1, "must be >= 1"),
    ("flow", "tol"): (lambda v: v is None or v > 0.0, "null or > 0"),
}


def _coerce(value, default, key):
    """Convert ``value`` to the type of ``default``; returns (value, error)."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value, None
        return None, f"{key}: expected true/false"
    if isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value, None
        return None, f"{key}: expected an integer"
    if isinstance(default, float) or key.endswith(".tol"):
        if isinstance(value, bool):
            return None, f"{key}: expected a number"
        if value is None and key.endswith(".tol"):
            return None, None
        try:
            v = float(value)
        except (TypeError, ValueError):
            return None, f"{key}: expected a number"
        if not math.isfinite(v):
            return None, f"{key}: must be finite"
        return v, None
    if key.endswith("fit_window"):
        if value is None:
            return None, None
        if not isinstance(value, (list, tuple)):
            return None, f"{key}: expected null or a two-element list"
        try:
            return [float(x) for x in value], None
        except (TypeError, ValueError):
            return None, f"{key}: expected numbers"
    if key.endswith("checkpoint_path"):
        if value is None or isinstance(value, str):
            return value, None
        return None, f"{key}: expected a path or null"
    if isinstance(value, str):
        return value, None
    return None, f"{key}: expected a string"


def config_from_dict(doc) -> RunConfig:
    """Validate a nested mapping; raises :class:`ConfigError` listing every violation."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(["document: expected a mapping of sections"])
    errors = []
    cfg = RunConfig()
    for sec, body in doc.items():
        if sec not in _SECTIONS:
            errors.append(f"{sec}: unknown section")
            continue
        if body is None:
            continue
        if not isinstance(body, dict):
            errors.append(f"{sec}: expected a mapping")
            continue
        target = getattr(cfg, sec)
        known = {f.name: getattr(target, f.name) for f in fields(target)}
        for key, value in body.items():
            name = f"{sec}.{key}"
            if key not in known:
                errors.append(f"{name}: unknown key")
                continue
            v, err = _coerce(value, known[key], name)
            if err:
                errors.append(err)
                continue
            check = _CONSTRAINTS.get((sec, key))
            if check is not None and not check[0](v):
                errors.append(f"{name}: {check[1]}")
                continue
            setattr(target, key, v)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML configuration document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"document: invalid YAML ({exc})"]) from None
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """YAML text that parses back to an identical configuration."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# -- initial data ---------------------------------------------------------------

def _envelope(grid: PeriodicGrid, width: float):
    """Gaussian ``exp(-|x - centre|^2 / (2 width^2))`` centred in the box."""
    X, Y, Z = grid.coordinates()
    c = grid.L / 2.0
    r2 = (X - c) ** 2 + (Y - c) ** 2 + (Z - c) ** 2
    return np.exp(-r2 / (2.0 * width * width))


def solenoidal_blob(grid: PeriodicGrid, amplitude: float, width: float):
    """Projected Gaussian blob pointing along ``(1, 1, 1)/sqrt 3``, mean removed.

    The projection leaves a field with a nonzero low-frequency limit of
    ``|u^|``, the generic whole-space case.
    """
    env = amplitude * _envelope(grid, width)
    d = np.ones(3) / np.sqrt(3.0)
    uh = grid.forward(env[None] * d[:, None, None, None])
    uh[:, 0, 0, 0] = 0.0
    return grid.inverse(grid.project_hat(grid.dealias_hat(uh)))


def taylor_green(grid: PeriodicGrid, amplitude: float):
    """``A (sin x cos y cos z, -cos x sin y cos z, 0)`` on the lowest box mode."""
    X, Y, Z = grid.coordinates()
    k = 2.0 * np.pi / grid.L
    return amplitude * np.stack([
        np.sin(k * X) * np.cos(k * Y) * np.cos(k * Z),
        -np.cos(k * X) * np.sin(k * Y) * np.cos(k * Z),
        np.zeros(grid.shape)])


def gaussian_blob_q(grid: PeriodicGrid, amplitude: float, width: float):
    """Uniaxial ``diag(-1, -1, 2)/sqrt 6`` times a Gaussian of peak ``amplitude``."""
    q = np.zeros((5,) + grid.shape)
    q[0] = amplitude * _envelope(grid, width)
    return grid.inverse(grid.dealias_hat(grid.forward(q)))


def random_smooth_q(grid: PeriodicGrid, sup: float, width: float, rng: np.random.Generator):
    """Band-limited random Q field (wavenumbers ``|k| <= max(1, L/(2 pi width))``)
    rescaled to ``max |Q| = sup``."""
    noise = rng.standard_normal((5,) + grid.shape)
    kmax = max(1.0, grid.L / (2.0 * np.pi * width))
    kint = grid.kint
    band = (kint[0] ** 2 + kint[1] ** 2 + kint[2] ** 2) <= kmax * kmax
    qh = grid.forward(noise) * (band & grid.dealias_mask)
    q = grid.inverse(qh)
    peak = float(np.sqrt(np.max(tensor.norm2(q))))
    if peak == 0.0 or sup == 0.0:
        return np.zeros_like(q)
    return q * (sup / peak)


def synthesize_initial_data(cfg: RunConfig, grid: PeriodicGrid,
                            report: PotentialHypothesesReport | None = None) -> State:
    """Initial state from ``cfg.init``; randomness from ``default_rng(seed)``.

    ``report`` supplies ``r2``; the Q amplitude must not exceed it.
    """
    ini = cfg.init
    r2 = None if report is None or not np.isfinite(report.r2) else float(report.r2)
    rng = np.random.default_rng(ini.seed)
    if ini.u_kind == "solenoidal_blob":
        u = solenoidal_blob(grid, ini.amplitude_u, ini.width)
    elif ini.u_kind == "taylor_green":
        u = taylor_green(grid, ini.amplitude_u)
    else:
        u = np.zeros((3,) + grid.shape)
    if ini.q_kind == "gaussian_blob":
        if r2 is not None and ini.amplitude_q > r2:
            raise ConfigError([f"init.amplitude_q: {ini.amplitude_q:g} exceeds r2 = {r2:.17g}"])
        q = gaussian_blob_q(grid, ini.amplitude_q, ini.width)
    elif ini.q_kind == "random_smooth":
        sup = ini.amplitude_q if r2 is None else min(ini.amplitude_q, r2)
        q = random_smooth_q(grid, sup, ini.width, rng)
    else:
        q = np.zeros((5,) + grid.shape)
    qsup = float(np.sqrt(np.max(tensor.norm2(q))))
    if r2 is not None and qsup > r2:
        raise ConfigError([f"init: sup |Q0| = {qsup:.17g} exceeds r2 = {r2:.17g}"])
    return State(0.0, VecField(grid, u), QField(grid, q))

