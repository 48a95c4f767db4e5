"""Energy functionals, balance residuals, monitors and decay-law fits."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor
from .dynamics import ModelParams, State, potential_hat, q_gradient
from .potentials import Potential
from .spectral import Field, QField, spectral_energy_split, tree_sum

CSV_FIELDS = (
    "t", "e_kin", "e_dir", "e_bulk", "e_total", "d_u", "d_q",
    "nrm_u_l2", "nrm_q_l1", "nrm_q_l2", "nrm_q_linf", "nrm_gradq_l2",
    "e_low", "e_high", "shell_R", "contaminated",
)


@dataclass
class EnergyReport:
    t: float
    e_kin: float
    e_dir: float
    e_bulk: float
    e_total: float
    d_u: float
    d_q: float
    nrm_u_l2: float
    nrm_q_l1: float
    nrm_q_l2: float
    nrm_q_linf: float
    nrm_gradq_l2: float
    e_low: float
    e_high: float
    shell_R: float
    contaminated: bool

    def row(self):
        out = []
        for v in astuple(self):
            if isinstance(v, (bool, np.bool_)):
                out.append("1" if v else "0")
            else:
                out.append("%.17g" % v)
        return out


def _dirichlet(field: Field) -> float:
    """``int |grad f|^2`` from the spectrum."""
    g = field.grid
    return g.volume * tree_sum(g.k2 * g.mode_density(field.hat))


def contamination_time(L: float, fraction: float = 0.1) -> float:
    """Time beyond which whole-space decay is no longer emulated by the box."""
    return fraction * L * L


def energy_report(state: State, params: ModelParams, R_schedule=1.0,
                  contamination_fraction: float = 0.1) -> EnergyReport:
    """All energy functionals of ``state``.

    ``R_schedule`` is the shell radius used for the spectral split of ``u``,
    either a number or a callable of ``t``.  ``d_q`` uses the dealiased
    potential term, i.e. the molecular field the solver actually evolves.
    """
    g = state.grid
    u, q = state.u, state.q
    pot = params.potential
    e_kin = 0.5 * g.norm2_hat(u.hat)
    d_q_dir = _dirichlet(q)
    e_dir = 0.5 * d_q_dir
    e_bulk = g.integrate(pot.value(q.data))
    d_u = _dirichlet(u)
    lam_hat = potential_hat(q, pot)
    d_q = g.norm2_hat(g.lap_hat(q.hat) - lam_hat)
    qn2 = tensor.norm2(q.data)
    qn = np.sqrt(qn2)
    R = float(R_schedule(state.t)) if callable(R_schedule) else float(R_schedule)
    low, high = spectral_energy_split(u, R)
    return EnergyReport(
        t=float(state.t),
        e_kin=e_kin,
        e_dir=e_dir,
        e_bulk=e_bulk,
        e_total=e_kin + e_dir + e_bulk,
        d_u=d_u,
        d_q=d_q,
        nrm_u_l2=np.sqrt(2.0 * e_kin),
        nrm_q_l1=g.integrate(qn),
        nrm_q_l2=np.sqrt(g.integrate(qn2)),
        nrm_q_linf=float(qn.max()),
        nrm_gradq_l2=np.sqrt(d_q_dir),
        e_low=low,
        e_high=high,
        shell_R=R,
        contaminated=bool(state.t > contamination_time(g.L, contamination_fraction)),
    )


def write_csv(reports: Sequence[EnergyReport], path_or_file) -> None:
    """Write reports with the mandatory header; floats use 17 significant digits."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in reports:
            w.writerow(r.row())

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def read_csv(path_or_text) -> list:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        fh = io.StringIO(path_or_text)
    else:
        fh = open(path_or_text, newline="")
    with fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_FIELDS:
        raise ValueError("missing or malformed CSV header")
    out = []
    for r in rows[1:]:
        vals = [float(x) for x in r[:-1]] + [r[-1] == "1"]
        out.append(EnergyReport(*vals))
    return out


def series(reports: Sequence[EnergyReport], name: str):
    """``(t, values, contaminated)`` arrays for one report field."""
    t = np.array([r.t for r in reports])
    v = np.array([getattr(r, name) for r in reports], dtype=float)
    c = np.array([r.contaminated for r in reports], dtype=bool)
    return t, v, c


# -- balances ---------------------------------------------------------------

def energy_balance_residual(reports: Sequence[EnergyReport], s_index: int = 0,
                            t_index: int = -1) -> float:
    """``E(t) + int_s^t (d_u + d_q) - E(s)`` with the trapezoid rule over records."""
    n = len(reports)
    i0 = s_index % n
    i1 = t_index % n
    if i1 <= i0:
        raise ValueError("t_index must come after s_index")
    sub = reports[i0:i1 + 1]
    t = np.array([r.t for r in sub])
    d = np.array([r.d_u + r.d_q for r in sub])
    integral = float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(t)))
    return sub[-1].e_total + integral - sub[0].e_total


class GSpec:
    """Renormalisation function ``G`` with first and second derivatives."""

    def __init__(self, name, g, g1, g2):
        self.name = name
        self.g, self.g1, self.g2 = g, g1, g2

    @classmethod
    def power(cls, p: float, delta: float = 0.0) -> "GSpec":
        """``G(z) = (z + delta^2)^(p/2) - delta^p``.

        Exponents for which ``G''`` blows up at ``z = 0`` need ``delta > 0``.
        """
        if p <= 0.0:
            raise ValueError("power exponent must be positive")
        if delta < 0.0:
            raise ValueError("delta must be non-negative")
        if delta == 0.0 and p != 2.0 and p < 4.0:
            raise ValueError(f"G(z) = z^{p / 2:g} is not C^2 at 0; give a positive smoothing floor")
        h = 0.5 * p
        d2 = delta * delta
        return cls(
            f"power({p:g}, delta={delta:g})",
            lambda z: (z + d2) ** h - delta**p,
            lambda z: h * (z + d2) ** (h - 1.0),
            lambda z: h * (h - 1.0) * (z + d2) ** (h - 2.0),
        )

    @classmethod
    def sqrt(cls, r2: float) -> "GSpec":
        """Smoothed ``sqrt z`` with floor ``delta = 1e-8 r2``."""
        return cls.power(1.0, 1e-8 * r2)

    @classmethod
    def clipped_quartic(cls, r: float) -> "GSpec":
        """``G(z) = [(z - r^2/4)_+]^2``."""
        z0 = 0.25 * r * r
        return cls(
            f"clipped_quartic({r:g})",
            lambda z: np.maximum(z - z0, 0.0) ** 2,
            lambda z: 2.0 * np.maximum(z - z0, 0.0),
            lambda z: 2.0 * (z > z0).astype(float),
        )


def renormalized_terms(q: QField, pot: Potential, G: GSpec):
    """``(J, D)`` with ``J = int G(|Q|^2)`` and
    ``D = int [2 G' |grad Q|^2 + G'' |grad |Q|^2|^2] + 2 int G' dF:Q``."""
    g = q.grid
    qq = q.data
    z = tensor.norm2(qq)
    gq = q_gradient(q)
    grad_q2 = np.sum(gq * gq, axis=(0, 1))
    gz = 2.0 * np.sum(gq * qq[None], axis=1)
    g1 = G.g1(z)
    dens = 2.0 * g1 * grad_q2 + G.g2(z) * np.sum(gz * gz, axis=0) + 2.0 * g1 * pot.pairing(qq)
    return g.integrate(G.g(z)), g.integrate(dens)


def renormalized_balance(states: Sequence[State], params: ModelParams, G: GSpec):
    """Per-interval residuals of the renormalised balance for ``Q``.

    For consecutive snapshots the residual is
    ``(J_{i+1} - J_i) / (t_{i+1} - t_i) + (D_i + D_{i+1}) / 2``, i.e. the
    centred difference of ``J`` plus the midpoint average of the dissipation.
    """
    jd = [renormalized_terms(s.q, params.potential, G) for s in states]
    t = np.array([s.t for s in states])
    j = np.array([x[0] for x in jd])
    d = np.array([x[1] for x in jd])
    return np.diff(j) / np.diff(t) + 0.5 * (d[1:] + d[:-1])


def q_sup(q: QField) -> float:
    """``max_x |Q(x)|`` (pointwise Frobenius norm)."""
    return float(np.sqrt(np.max(tensor.norm2(q.data))))


def max_principle_monitor(series_, r2: float) -> float:
    """Worst ``||Q(t)||_inf - r2`` over a series of states or energy reports."""
    worst = -np.inf
    for item in series_:
        s = item.nrm_q_linf if isinstance(item, EnergyReport) else q_sup(item.q)
        worst = max(worst, s - r2)
    return float(worst)


# -- fits -------------------------------------------------------------------

class InsufficientSamples(ValueError):
    pass


@dataclass
class DecayFit:
    kind: str
    t_lo: float
    t_hi: float
    exponent: float
    amplitude: float
    goodness: float
    samples: int

    @property
    def rate(self) -> float:
        """Decay rate ``d`` of an exponential fit ``A exp(-d t)``."""
        return -self.exponent


def _select(t, y, window, contaminated, min_samples):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y) & (y > 0.0)
    if contaminated is not None:
        keep &= ~np.asarray(contaminated, dtype=bool)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    if keep.sum() < min_samples:
        raise InsufficientSamples(
            f"{int(keep.sum())} usable samples in window, need {min_samples}")
    return t[keep], y[keep]


def _linfit(x, y):
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return slope, icpt, r2


def fit_power_decay(t, values, window=None, contaminated=None, min_samples: int = 10) -> DecayFit:
    """Least squares of ``log value`` against ``log(1 + t)``."""
    ts, ys = _select(t, values, window, contaminated, min_samples)
    slope, icpt, r2 = _linfit(np.log1p(ts), np.log(ys))
    return DecayFit("power", float(ts[0]), float(ts[-1]), float(slope), float(np.exp(icpt)), float(r2), ts.size)


def fit_exponential_decay(t, values, window=None, contaminated=None, min_samples: int = 10) -> DecayFit:
    """Least squares of ``log value`` against ``t``; ``fit.rate`` is the decay rate."""
    ts, ys = _select(t, values, window, contaminated, min_samples)
    slope, icpt, r2 = _linfit(ts, np.log(ys))
    return DecayFit("exponential", float(ts[0]), float(ts[-1]), float(slope), float(np.exp(icpt)), float(r2), ts.size)


def fit_report_series(reports: Sequence[EnergyReport], name: str, window=None,
                      kind: str = "power", transform: Optional[Callable] = None) -> DecayFit:
    t, v, c = series(reports, name)
    if transform is not None:
        v = transform(v)
    fit = fit_power_decay if kind == "power" else fit_exponential_decay
    return fit(t, v, window, c)


# -- interpolation checks ---------------------------------------------------

def interpolation_check(q: QField):
    """``(||Q||_2, ||Q||_1^(2/5) ||Q||_6^(3/5))``; Hoelder gives ``lhs <= rhs``."""
    g = q.grid
    qn = np.sqrt(tensor.norm2(q.data))
    l1 = g.integrate(qn)
    l2 = np.sqrt(g.integrate(qn**2))
    l6 = g.integrate(qn**6) ** (1.0 / 6.0)
    return float(l2), float(l1**0.4 * l6**0.6)


def gn_ratio(v: Field) -> float:
    """``||grad v||_4^2 / (||Lap v||_2 ||v||_inf)`` for a scalar or multi-component field."""
    g = v.grid
    gv = g.inverse(np.stack([1j * xe * v.hat for xe in g.xi_eff]))
    dens = np.sum(gv * gv, axis=(0, 1))
    lhs = np.sqrt(g.integrate(dens**2))
    lap = np.sqrt(g.norm2_hat(g.lap_hat(v.hat)))
    sup = np.sqrt(np.max(np.sum(v.data**2, axis=0)))
    if lap == 0.0 or sup == 0.0:
        return 0.0
    return float(lhs / (lap * sup))


def gn_constant(fields_: Sequence[Field]) -> float:
    """Empirical constant: the largest :func:`gn_ratio` over ``fields_``."""
    return max(gn_ratio(f) for f in fields_)


def report_field_names():
    return [f.name for f in fields(EnergyReport)]
