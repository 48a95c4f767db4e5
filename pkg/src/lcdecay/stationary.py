"""Stationary Q-equation by gradient flow, and Pohozaev-type functionals.

The flow is the ``u = 0`` reduction of the Q equation,
``dQ/dt = Lap Q - L[dF(Q)]``, whose stationary points solve
``-Lap Q + L[dF(Q)] = 0``.  It is integrated with the same integrating-factor
Heun scheme as the coupled solver, except that the linear part ``s Q`` of
the potential gradient (``s = a`` for polynomial potentials) is moved into
the integrating factor; the purely linear case is then integrated exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import NumericalFailure, potential_hat
from .potentials import Potential, PolynomialPotential
from .spectral import QField, tree_sum


@dataclass
class FlowConfig:
    dt: float = 0.05
    max_iter: int = 20000
    tol: Optional[float] = None
    record_every: int = 1


@dataclass
class StationaryReport:
    stationary_residual: float
    pohozaev: float
    pohozaev_combo: Optional[float]
    final_sup: float
    iterations: int
    converged: bool
    tol: float = 0.0
    residual_history: list = field(default_factory=list)
    lyapunov_history: list = field(default_factory=list)
    pohozaev_history: list = field(default_factory=list)
    sup_history: list = field(default_factory=list)

    def to_text(self) -> str:
        keys = ("stationary_residual", "pohozaev", "pohozaev_combo", "final_sup",
                "iterations", "converged", "tol")
        lines = []
        for k in keys:
            v = getattr(self, k)
            if isinstance(v, float):
                v = "%.17g" % v
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


def _linear_rate(pot: Potential) -> float:
    try:
        return float(pot.linear_rate)
    except NotImplementedError:
        return 0.0


def _dirichlet(q: QField) -> float:
    g = q.grid
    return g.volume * tree_sum(g.k2 * g.mode_density(q.hat))


def stationary_residual(q: QField, pot: Potential) -> float:
    """``|| -Lap Q + L[dF(Q)] ||_2`` with the dealiased potential term."""
    g = q.grid
    return float(np.sqrt(g.norm2_hat(g.lap_hat(q.hat) - potential_hat(q, pot))))


def lyapunov(q: QField, pot: Potential) -> float:
    """``int (|grad Q|^2 / 2 + F(Q))``."""
    return 0.5 * _dirichlet(q) + q.grid.integrate(pot.value(q.data))


def pohozaev_residual(q: QField, pot: Potential) -> float:
    """``int (|grad Q|^2 / 2 + 3 F(Q))``; zero for localized stationary solutions."""
    return 0.5 * _dirichlet(q) + 3.0 * q.grid.integrate(pot.value(q.data))


def pohozaev_combination(q: QField, pot: Potential) -> float:
    """``int (-|grad Q|^2 / 2 + a/2 |Q|^2 - c/4 |Q|^4)`` for polynomial potentials.

    Equals ``pohozaev_residual(q) - int G : Q`` with ``G = -Lap Q + L[dF(Q)]``,
    so it vanishes together with both identities on stationary solutions.
    """
    if not isinstance(pot, PolynomialPotential):
        raise TypeError("the combined functional is defined for polynomial potentials only")
    g = q.grid
    r2 = np.sum(q.data**2, axis=0)
    bulk = g.integrate(0.5 * pot.a * r2 - 0.25 * pot.c * r2 * r2)
    return -0.5 * _dirichlet(q) + bulk


def _sup(q: QField) -> float:
    return float(np.sqrt(np.max(np.sum(q.data**2, axis=0))))


class FlowStepper:
    """Integrating-factor Heun step for ``dQ/dt = Lap Q - L[dF(Q)]``."""

    def __init__(self, grid, pot: Potential, dt: float):
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.pot = pot
        self.dt = float(dt)
        self.s = _linear_rate(pot)
        self.decay = np.exp(-(grid.k2 + self.s) * self.dt)

    def nonlinear(self, q: QField):
        return self.s * q.hat - potential_hat(q, self.pot)

    def step(self, q: QField) -> QField:
        g, dt, e = self.grid, self.dt, self.decay
        n0 = self.nonlinear(q)
        q1 = QField(g, hat=e * (q.hat + dt * n0))
        n1 = self.nonlinear(q1)
        qh = e * q.hat + 0.5 * dt * (e * n0 + n1)
        if not np.all(np.isfinite(qh)):
            raise NumericalFailure("non-finite iterate in gradient flow")
        return QField(g, hat=qh)


def gradient_flow(q0: QField, pot: Potential, config: FlowConfig | None = None,
                  r2: float | None = None):
    """Run the flow from ``q0`` until the stationary residual falls below tolerance.

    The default tolerance is ``1e-8 max(1, ||q0||_2)``.  ``q0`` is dealiased
    first.  When ``r2`` is given, ``||q0||_inf <= r2`` is enforced.
    Returns ``(q, StationaryReport)``.
    """
    cfg = config or FlowConfig()
    g = q0.grid
    if r2 is not None and _sup(q0) > r2:
        raise ValueError(f"initial data violates |Q0| <= r2 = {r2:g}")
    q = QField(g, hat=g.dealias_hat(q0.hat))
    tol = cfg.tol if cfg.tol is not None else 1e-8 * max(1.0, q0.l2())
    stepper = FlowStepper(g, pot, cfg.dt)
    rep = StationaryReport(np.nan, np.nan, None, np.nan, 0, False, tol)

    def record(q):
        rep.residual_history.append(res)
        rep.lyapunov_history.append(lyapunov(q, pot))
        rep.pohozaev_history.append(pohozaev_residual(q, pot))
        rep.sup_history.append(_sup(q))

    it = 0
    res = stationary_residual(q, pot)
    record(q)
    while res > tol and it < cfg.max_iter:
        q = stepper.step(q)
        it += 1
        res = stationary_residual(q, pot)
        if it % cfg.record_every == 0:
            record(q)
    rep.stationary_residual = res
    rep.pohozaev = pohozaev_residual(q, pot)
    if isinstance(pot, PolynomialPotential):
        rep.pohozaev_combo = pohozaev_combination(q, pot)
    rep.final_sup = _sup(q)
    rep.iterations = it
    rep.converged = bool(res <= tol)
    return q, rep
