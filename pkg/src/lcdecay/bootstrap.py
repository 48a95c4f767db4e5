"""Scalar checks of the Fourier-splitting decay argument.

The energy majorant ``E(t)`` obeys differential inequalities of the form
``E' + (1+t)^(-gamma) E <= c (1+t)^(-mu)``.  This module integrates the
equality cases (which dominate every sub-solution), evaluates the Duhamel
kernel integrals and the low-frequency heat mass by quadrature, and replays
the exponent cascade ``0 -> 1/2 - eps/3 -> 15/14 -> 3/2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special


class HypothesisViolation(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapParams:
    gamma: float
    mu: float
    c: float = 1.0
    e0: float = 1.0
    T: float = 1.0e4
    beta: float = 0.0
    epsilon: float = 0.1
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise HypothesisViolation(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.mu > self.gamma:
            raise HypothesisViolation(f"need gamma < mu, got gamma={self.gamma}, mu={self.mu}")
        if self.c < 0.0 or self.e0 < 0.0:
            raise HypothesisViolation("c and e0 must be non-negative")
        if not self.T > 0.0:
            raise HypothesisViolation("horizon T must be positive")


@dataclass
class MajorantSolution:
    """Dense samples of an integrated majorant and its weighted form."""

    t: np.ndarray
    E: np.ndarray
    exponent: float
    weighted: np.ndarray
    running_sup: np.ndarray

    @property
    def sup(self) -> float:
        return float(self.running_sup[-1])

    def sup_at(self, t: float) -> float:
        i = np.searchsorted(self.t, t, side="right") - 1
        return float(self.running_sup[max(i, 0)])

    def tail_drift(self) -> float:
        """Relative growth of the running sup over the last decade of ``t``."""
        s_end = self.sup
        s_mid = self.sup_at(self.t[-1] / 10.0)
        return (s_end - s_mid) / s_end if s_end > 0 else 0.0


def _time_grid(t0: float, T: float, per_decade: int = 400):
    """Samples uniform in ``log(1+t)`` from ``t0`` to ``T``."""
    s0, s1 = math.log1p(t0), math.log1p(T)
    m = max(int(per_decade * (s1 - s0) / math.log(10.0)), 16)
    t = np.expm1(np.linspace(s0, s1, m + 1))
    t[0], t[-1] = t0, T
    return t


def integrate_majorant(rate: Callable[[float], float], forcing: Callable[[float], float],
                       e0: float, t0: float, T: float, exponent: float,
                       rtol: float = 1e-13, atol: float = 1e-300,
                       per_decade: int = 400) -> MajorantSolution:
    """Solve ``E' = -rate(t) E + forcing(t)``, ``E(t0) = e0``, up to ``T``.

    The equation is integrated in ``s = log(1+t)`` with the explicit
    Dormand-Prince 8(5,3) method, and ``E (1+t)^exponent`` is returned with
    its running supremum.
    """
    def rhs(s, y):
        t = math.expm1(s)
        return [(1.0 + t) * (-rate(t) * y[0] + forcing(t))]

    t_eval = _time_grid(t0, T, per_decade)
    s_eval = np.log1p(t_eval)
    sol = integrate.solve_ivp(rhs, (s_eval[0], s_eval[-1]), [e0], method="DOP853",
                              t_eval=s_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"majorant integration failed: {sol.message}")
    E = sol.y[0]
    w = E * (1.0 + t_eval) ** exponent
    return MajorantSolution(t_eval, E, exponent, w, np.maximum.accumulate(w))


def lemma_var_solution(p: BootstrapParams, forcing_scale: float = 1.0, **kw) -> MajorantSolution:
    """Equality case ``E' = -(1+t)^-gamma E + s c (1+t)^-mu`` from ``E(0) = e0``."""
    g, mu, c = p.gamma, p.mu, forcing_scale * p.c
    return integrate_majorant(lambda t: (1.0 + t) ** -g, lambda t: c * (1.0 + t) ** -mu,
                              p.e0, 0.0, p.T, p.mu - p.gamma, **kw)


def lemma_var_check(p: BootstrapParams, **kw) -> float:
    """Running supremum of ``E(t) (1+t)^(mu - gamma)`` up to ``T``."""
    return lemma_var_solution(p, **kw).sup


def lemma_var_closed_form(p: BootstrapParams, t):
    """Solution for ``c = 0``: ``e0 exp(-((1+t)^(1-gamma) - 1)/(1-gamma))``."""
    t = np.asarray(t, dtype=float)
    g = p.gamma
    return p.e0 * np.exp(-((1.0 + t) ** (1.0 - g) - 1.0) / (1.0 - g))


def subsolution_gap(p: BootstrapParams, scale: float = 0.9, **kw) -> float:
    """``min_t (E(t) - E_sub(t))`` where ``E_sub`` solves the same equation
    with the forcing multiplied by ``scale < 1``.  Non-negative when the
    equality case dominates."""
    full = lemma_var_solution(p, **kw)
    sub = lemma_var_solution(p, forcing_scale=scale, **kw)
    return float(np.min(full.E - sub.E))


# -- Duhamel kernel -----------------------------------------------------------

def kernel_value(alpha: float, r: float, t: float, epsabs: float = 0.0,
                 epsrel: float = 1e-11) -> float:
    """``r^(2 alpha) exp(-r^2 t) int_0^(r^2 t) e^z (r^2 + z)^(-alpha) dz``.

    The exponential is folded into the integrand, ``e^(z - s)`` with
    ``s = r^2 t``, so nothing overflows.
    """
    s = r * r * t
    if s == 0.0:
        return 0.0
    r2 = r * r

    def f(z):
        return math.exp(z - s) * (r2 + z) ** -alpha

    # the integrand is concentrated within a few units of the upper limit
    cuts = [0.0, max(0.0, s - 60.0), s]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200,
                                 full_output=1)
        if len(out) > 3:
            raise QuadratureError(f"quadrature did not converge at r={r:g}, t={t:g}: {out[3]}")
        total += out[0]
    return r ** (2.0 * alpha) * total


def kernel_small_r(alpha: float, r: float, t: float) -> float:
    """Leading behaviour as ``r -> 0`` at fixed ``t`` (``alpha != 1``):
    ``r^2 ((1+t)^(1-alpha) - 1) / (1 - alpha)``."""
    return r * r * ((1.0 + t) ** (1.0 - alpha) - 1.0) / (1.0 - alpha)


@dataclass
class KernelBoundReport:
    alpha: float
    max_ratio: float
    c_alpha: float
    ratios: np.ndarray
    r_grid: np.ndarray
    t_grid: np.ndarray
    argmax: tuple
    excluded_case: bool = False

    def to_text(self) -> str:
        r, t = self.argmax
        return (f"alpha={self.alpha:.17g}\nmax_ratio={self.max_ratio:.17g}\n"
                f"c_alpha={self.c_alpha:.17g}\nargmax_r={r:.17g}\nargmax_t={t:.17g}\n"
                f"excluded_case={self.excluded_case}\n")


def kernel_bound_scan(alpha: float, r_grid, t_grid) -> KernelBoundReport:
    """Kernel divided by its envelope (1 for ``alpha = 0``, ``r^2`` otherwise)
    over the product grid; ``c_alpha`` is the largest ratio.

    ``alpha = 1`` is computed but marked ``excluded_case``.
    """
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    ratios = np.empty((r_grid.size, t_grid.size))
    for i, r in enumerate(r_grid):
        env = 1.0 if alpha == 0.0 else r * r
        for j, t in enumerate(t_grid):
            ratios[i, j] = kernel_value(alpha, r, t) / env
    k = np.unravel_index(np.argmax(ratios), ratios.shape)
    m = float(ratios[k])
    return KernelBoundReport(alpha, m, m, ratios, r_grid, t_grid,
                             (float(r_grid[k[0]]), float(t_grid[k[1]])),
                             excluded_case=(alpha == 1.0))


def kernel_neighborhood_scan(r_grid, t_grid, alphas=(0.9, 0.95, 0.99, 1.01, 1.05, 1.1)):
    """``c_alpha`` on both sides of the excluded value ``alpha = 1``."""
    return {a: kernel_bound_scan(a, r_grid, t_grid).c_alpha for a in alphas}


# -- low-frequency heat mass -------------------------------------------------

def _radial_gauss(R: float, a: float) -> float:
    """``int_0^R exp(-a rho^2) rho^2 d rho`` in closed form (``a >= 0``)."""
    if R == 0.0:
        return 0.0
    if a == 0.0:
        return R**3 / 3.0
    x = math.sqrt(a) * R
    if x < 1e-3:
        # series avoids cancellation for small a R^2
        return R**3 * (1.0 / 3.0 - x * x / 5.0 + x**4 / 14.0 - x**6 / 54.0)
    return (math.sqrt(math.pi) * math.erf(x) / (4.0 * a**1.5)
            - R * math.exp(-x * x) / (2.0 * a))


def low_freq_heat_mass(R: float, t: float) -> float:
    """``int_{|xi| < R} exp(-2 |xi|^2 t) d xi`` over the ball in R^3."""
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    if t < 0.0:
        raise ValueError("t must be non-negative")
    return 4.0 * math.pi * _radial_gauss(R, 2.0 * t)


def low_freq_heat_mass_quadrature(R: float, t: float) -> float:
    """The same integral by adaptive quadrature (independent check)."""
    v, _ = integrate.quad(lambda r: math.exp(-2.0 * r * r * t) * r * r, 0.0, R,
                          epsabs=0.0, epsrel=1e-13, limit=200)
    return 4.0 * math.pi * v


_C0 = None


def envelope_constant() -> float:
    """``C0 = (4 pi / 3) int_0^inf exp(-2 r^(2/3)) dr`` (computed once).

    Since ``exp(-2 rho^2 t) <= exp(2 R^2) exp(-2 rho^2 (t+1))`` and the
    substitution ``r = rho^3 (t+1)^(3/2)`` maps the shifted integral to
    ``(t+1)^(-3/2) / 3 int exp(-2 r^(2/3)) dr``, the mass satisfies
    ``mass (t+1)^(3/2) <= exp(2 R^2) C0``.
    """
    global _C0
    if _C0 is None:
        v, _ = integrate.quad(lambda r: math.exp(-2.0 * r ** (2.0 / 3.0)), 0.0, np.inf,
                              epsabs=0.0, epsrel=1e-13, limit=400)
        _C0 = 4.0 * math.pi / 3.0 * v
    return _C0


def envelope_closed_form() -> float:
    """``C0`` from the Gamma function: ``int_0^inf exp(-2 r^(2/3)) dr
    = (3/2) Gamma(3/2) / 2^(3/2)``."""
    return 4.0 * math.pi / 3.0 * 1.5 * special.gamma(1.5) / 2.0**1.5


@dataclass
class EnvelopeReport:
    R: float
    t: np.ndarray
    products: np.ndarray
    bound: float
    ok: bool
    monotone_after_1: bool


def low_freq_envelope_check(R: float = 1.0, t_grid=None) -> EnvelopeReport:
    """``mass(R, t) (t+1)^(3/2)`` against ``exp(2 R^2) C0`` on ``t_grid``."""
    if t_grid is None:
        t_grid = np.concatenate([[0.0], np.logspace(-3, 3, 601)])
    t_grid = np.asarray(t_grid, dtype=float)
    prod = np.array([low_freq_heat_mass(R, t) * (t + 1.0) ** 1.5 for t in t_grid])
    bound = math.exp(2.0 * R * R) * envelope_constant()
    tail = prod[t_grid >= 1.0]
    mono = bool(np.all(np.diff(tail) <= 1e-12 * np.abs(tail[:-1])))
    return EnvelopeReport(R, t_grid, prod, bound, bool(np.all(prod <= bound)), mono)


# -- shell schedule and cascade ---------------------------------------------

def shell_schedule(t, beta: float):
    """``R(t) = (1+t)^(-beta)``, clamped to at most 1."""
    if not 0.0 <= beta <= 0.5:
        raise ValueError("beta must lie in [0, 1/2]")
    t = np.asarray(t, dtype=float)
    out = np.minimum((1.0 + t) ** -beta, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class CascadePass:
    index: int
    beta: Optional[float]
    gamma: Optional[float]
    mu: float
    exponent: float
    weighted_sup: float
    tail_drift: float

    def row(self) -> str:
        b = "R=1" if self.beta is None else f"{self.beta:.10g}"
        return f"{self.index}\t{b}\t{self.exponent:.10g}\t{self.weighted_sup:.10g}\t{self.tail_drift:.3e}"


@dataclass
class CascadeReport:
    epsilon: float
    passes: list = field(default_factory=list)

    @property
    def exponents(self):
        return [p.exponent for p in self.passes]

    def table(self) -> str:
        head = "pass\tbeta\tcertified_exponent\tweighted_sup\ttail_drift"
        return "\n".join([head] + [p.row() for p in self.passes]) + "\n"


def bootstrap_cascade(c_const: float = 1.0, e0: float = 1.0, epsilon: float = 0.1,
                      T: float = 1.0e4) -> CascadeReport:
    """Replay the three improvement passes on the scalar majorant.

    Pass 1 (energy only bounded): ``R = (1+t)^-beta``, ``2 beta = 1 - 2 eps/3``,
    forcing ``c [(1+t)^-3/2 + R^3]``.  Pass 2 (previous bound in hand):
    ``2 beta = 3/7``, forcing ``c [(1+t)^-3/2 + R^7]``.  Pass 3: ``R = 1``,
    ``E' + E = c t^-3/2`` from ``t = 1`` with the pass-2 value there.
    Each pass integrates the equality case and reports the running sup of
    ``E (1+t)^exponent`` for the claimed exponent.
    """
    if not 0.0 < epsilon < 1.5:
        raise ValueError("epsilon must lie in (0, 3/2)")
    rep = CascadeReport(epsilon)
    beta1 = 0.5 - epsilon / 3.0
    g1, mu1 = 2.0 * beta1, 1.5 - epsilon
    s1 = integrate_majorant(lambda t: (1.0 + t) ** -g1,
                            lambda t: c_const * ((1.0 + t) ** -1.5 + (1.0 + t) ** (-3.0 * beta1)),
                            e0, 0.0, T, mu1 - g1)
    rep.passes.append(CascadePass(1, beta1, g1, mu1, mu1 - g1, s1.sup, s1.tail_drift()))

    beta2 = 3.0 / 14.0
    g2, mu2 = 2.0 * beta2, 1.5
    s2 = integrate_majorant(lambda t: (1.0 + t) ** -g2,
                            lambda t: c_const * ((1.0 + t) ** -1.5 + (1.0 + t) ** (-7.0 * beta2)),
                            e0, 0.0, T, mu2 - g2)
    rep.passes.append(CascadePass(2, beta2, g2, mu2, mu2 - g2, s2.sup, s2.tail_drift()))

    e1 = float(np.interp(1.0, s2.t, s2.E))
    s3 = integrate_majorant(lambda t: 1.0, lambda t: c_const * t**-1.5, e1, 1.0, T, 1.5)
    rep.passes.append(CascadePass(3, None, None, 1.5, 1.5, s3.sup, s3.tail_drift()))
    return rep


# -- final-stage integral ------------------------------------------------------

def tail_integral(t: float) -> float:
    """``int_1^t exp(-(t-s)) s^(-3/2) ds``."""
    if t <= 1.0:
        return 0.0
    lo = max(1.0, t - 60.0)
    f = lambda s: math.exp(s - t) * s**-1.5
    v = integrate.quad(f, lo, t, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    if lo > 1.0:
        v += integrate.quad(f, 1.0, lo, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return v


def tail_integral_split_bound(t: float) -> float:
    """The two-piece bound ``2 e^(-t/2)(1 - t^(-1/2)) + (t/2)^(-3/2)(1 - e^(-t/2))``."""
    return (2.0 * math.exp(-t / 2.0) * (1.0 - t**-0.5)
            + (t / 2.0) ** -1.5 * (1.0 - math.exp(-t / 2.0)))


def help_constant(t_grid) -> float:
    """Smallest ``C`` with ``tail_integral(t) <= C (t/2)^(-3/2)`` on ``t_grid``."""
    return max(tail_integral(t) / (t / 2.0) ** -1.5 for t in np.asarray(t_grid, dtype=float))


def oracle_suite(epsilon: float = 0.1, T: float = 1.0e4) -> dict:
    """All bootstrap checks with default grids, as a flat key-value dict."""
    out = {}
    for g in (0.3, 0.5, 0.7):
        for mu in (1.0, 1.5):
            s = lemma_var_solution(BootstrapParams(g, mu, T=T))
            out[f"lemma_var_sup[g={g},mu={mu}]"] = s.sup
            out[f"lemma_var_drift[g={g},mu={mu}]"] = s.tail_drift()
    cas = bootstrap_cascade(epsilon=epsilon, T=T)
    for p in cas.passes:
        out[f"cascade_exponent[{p.index}]"] = p.exponent
        out[f"cascade_sup[{p.index}]"] = p.weighted_sup
    r = np.logspace(-3, 0, 13)
    t = np.concatenate([[0.0], np.logspace(-2, 3, 21)])
    out["kernel_c_alpha[0.5]"] = kernel_bound_scan(0.5, r, t).c_alpha
    env = low_freq_envelope_check(1.0)
    out["low_freq_envelope_ok"] = env.ok
    out["low_freq_monotone_after_1"] = env.monotone_after_1
    out["help_constant"] = help_constant(np.logspace(np.log10(4.0), 3, 60))
    return out
