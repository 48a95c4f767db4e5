"""Right-hand sides of the coupled Q-tensor / Navier-Stokes system and time stepping.

Conventions
-----------
``grad_u`` denotes the matrix ``A`` with ``A_ij = d_i u_j``; the vorticity
tensor is ``omega = (A - A^T)/2`` and the strain ``eps = (A + A^T)/2``.  The
divergence of a matrix field contracts its second index,
``(div T)_i = d_j T_ij``.  With these choices the stress ``Sigma`` and the
co-rotational term ``S`` exchange energy exactly, which is what the energy
balance tests check.

The evolved system is

    dQ/dt = Lap Q - u.grad Q + S(grad u, Q) - L[dF(Q)]
    du/dt = Lap u + P div(Sigma(Q) - u (x) u)

with both Laplacians integrated exactly (integrating factor) and the rest by
Heun's method.  Every nonlinear product is dealiased with the 2/3 rule.  The
advection is evaluated as ``u.grad Q``; after 2/3 truncation this coincides
with the spectral ``div(Q u)`` for solenoidal ``u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, tensor
from .potentials import Potential, PolynomialPotential
from .spectral import Field, PeriodicGrid, QField, VecField


class NumericalFailure(RuntimeError):
    """Non-finite state or unrecoverable step rejection."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CFLViolation(NumericalFailure):
    def __init__(self, dt, advisory_dt, state=None):
        super().__init__(f"dt={dt:g} violates the CFL bound; advisory dt={advisory_dt:g}", state)
        self.dt = dt
        self.advisory_dt = advisory_dt


@dataclass(frozen=True)
class ModelParams:
    """Model constants.

    ``feedback=False`` removes the elastic stress from the momentum equation
    (one-way coupling, used by paired-run checks).  Runs with ``xi != 0``
    are allowed but lie outside the decay theory.
    """

    xi: float = 0.0
    potential: Potential = field(default_factory=PolynomialPotential)
    linearized: bool = False
    feedback: bool = True

    @property
    def in_theorem_scope(self) -> bool:
        return self.xi == 0.0


@dataclass
class State:
    t: float
    u: VecField
    q: QField

    @property
    def grid(self) -> PeriodicGrid:
        return self.u.grid

    def canonical(self) -> "State":
        """Copy holding physical data only, so the spectrum is recomputed from it.

        Checkpoints store physical samples; canonicalising at checkpoint
        times makes resumed and uninterrupted runs bit-identical.
        """
        g = self.grid
        return State(self.t, VecField(g, np.array(self.u.data)), QField(g, np.array(self.q.data)))


def _data(x):
    return x.data if isinstance(x, Field) else np.asarray(x, dtype=float)


# -- pointwise tensors -------------------------------------------------------

def velocity_gradient(u: VecField):
    """``A_ij = d_i u_j`` as a Mat3 field."""
    g = u.grid
    ah = np.stack([1j * g.xi_eff[i] * u.hat for i in range(3)])
    return g.inverse(ah)


def q_gradient(q: QField):
    """``(3, 5, ...)`` array of ``d_j q_a``."""
    g = q.grid
    return g.inverse(np.stack([1j * xe * q.hat for xe in g.xi_eff]))


def odot(grad_q):
    """``(grad Q (.) grad Q)_ij = d_i Q_ab d_j Q_ab`` from ``(3, 5, ...)`` coordinates."""
    gq = np.asarray(grad_q)
    out = np.empty((3, 3) + gq.shape[2:])
    for i in range(3):
        for j in range(i, 3):
            out[i, j] = np.sum(gq[i] * gq[j], axis=0)
            if j != i:
                out[j, i] = out[i, j]
    return out


def molecular_field(q: QField, pot: Potential, dealiased: bool = False) -> QField:
    """``H = Lap Q - L[dF(Q)]``.

    With ``dealiased=True`` the potential term is 2/3-truncated first, which
    is the form the solver evolves and dissipates.
    """
    g = q.grid
    lam = pot.projected_gradient(q.data)
    if dealiased:
        return QField(g, hat=g.lap_hat(q.hat) - g.dealias_hat(g.forward(lam)))
    return QField(g, g.inverse(g.lap_hat(q.hat)) - lam)


def potential_hat(q: QField, pot: Potential):
    """Dealiased spectrum of ``L[dF(Q)]``, cached on ``q``.

    The cache is keyed by the potential and dropped whenever ``q.data`` is
    reassigned; callers must not modify the returned array.
    """
    key = ("lam_hat", pot)
    lam = q.cache.get(key)
    if lam is None:
        lam = q.grid.forward(pot.projected_gradient(q.data), dealias=True)
        q.cache[key] = lam
    return lam


def tensor_S(grad_u, q, xi: float):
    """Co-rotational/aligning term in 5 coordinates.

    Dispatches to the commutator form at ``xi = 0`` (no ``I/3`` rounding)
    and to :func:`tensor_S_full` otherwise.
    """
    if xi == 0.0:
        return tensor_S_reduced(grad_u, q)
    return tensor_S_full(grad_u, q, xi)


def tensor_S_full(grad_u, q, xi: float):
    """``S = (xi eps + omega)(Q + I/3) + (Q + I/3)(xi eps - omega)
    - 2 xi (Q + I/3)(Q : grad u)``, symmetrised and trace-projected."""
    a = _data(grad_u)
    qm = tensor.to_matrix(_data(q))
    omega = tensor.skew(a)
    qt = qm.copy()
    for i in range(3):
        qt[i, i] = qt[i, i] + 1.0 / 3.0
    eps = tensor.sym(a)
    s = tensor.matmul(xi * eps + omega, qt) + tensor.matmul(qt, xi * eps - omega)
    s = s - 2.0 * xi * qt * tensor.frobenius_inner(qm, a)
    return tensor.from_matrix(s)


def tensor_S_reduced(grad_u, q):
    """``omega Q - Q omega`` (the ``xi = 0`` form)."""
    qm = tensor.to_matrix(_data(q))
    omega = tensor.skew(_data(grad_u))
    return tensor.from_matrix(tensor.commutator(omega, qm))


def tensor_Sigma(q, h, xi: float, grad_q=None):
    """Elastic stress as a Mat3 field.

    ``Sigma = 2 xi (H:Q)(Q + I/3) - xi [H (Q + I/3) + (Q + I/3) H]
    - (QH - HQ) - grad Q (.) grad Q``.  ``grad_q`` is computed spectrally
    when ``q`` is a :class:`QField` and it is not supplied.
    """
    if grad_q is None:
        grad_q = q_gradient(q)
    qm = tensor.to_matrix(_data(q))
    hm = tensor.to_matrix(_data(h))
    sig = -tensor.commutator(qm, hm) - odot(grad_q)
    if xi != 0.0:
        qt = qm.copy()
        for i in range(3):
            qt[i, i] = qt[i, i] + 1.0 / 3.0
        sig = sig + 2.0 * xi * tensor.frobenius_inner(hm, qm) * qt
        sig = sig - xi * (tensor.matmul(hm, qt) + tensor.matmul(qt, hm))
    return sig


def tensor_Sigma_reduced(q, lap_q, grad_q):
    """``-Q Lap Q + Lap Q Q - grad Q (.) grad Q`` (the ``xi = 0`` form)."""
    qm = tensor.to_matrix(_data(q))
    lm = tensor.to_matrix(_data(lap_q))
    return -tensor.commutator(qm, lm) - odot(grad_q)


# -- right-hand sides --------------------------------------------------------

class Rhs:
    """Non-Laplacian part ``N(u, Q)`` of the right-hand side in spectral form.

    At ``xi = 0`` the momentum forcing is evaluated in force form,
    ``P[2 omega u - grad Q : H - div(QH - HQ)]``.  It differs from
    ``P div(Sigma - u (x) u)`` only by gradients, which the projector
    removes, and pairs exactly with the advection and ``S`` terms of the
    ``Q`` equation, so the discrete energy exchange cancels to rounding.
    ``H`` here is ``Lap Q`` minus the dealiased potential gradient.
    """

    def __init__(self, grid: PeriodicGrid, params: ModelParams):
        self.grid = grid
        self.params = params
        self.mask = grid.dealias_mask

    def __call__(self, u: VecField, q: QField):
        g, p = self.grid, self.params
        if p.linearized:
            return np.zeros_like(u.hat), -p.potential.linear_rate * q.hat
        if p.xi != 0.0:
            return self._general(u, q)
        uh, qh = u.hat, q.hat
        m = g.n**3
        fb = bool(p.feedback)
        uu = u.data.reshape(3, m)
        qq = q.data.reshape(5, m)
        lam_hat = potential_hat(q, p.potential)
        gqh = g.empty_hat((3, 5))
        wh = g.empty_hat((3,))
        hh = g.empty_hat((5,)) if fb else wh
        _kernels.spectral_prep(uh, qh, lam_hat, *g.k1d, gqh, wh, hh, fb)
        gq = g.inverse(gqh, overwrite=True).reshape(3, 5, m)
        w = g.inverse(wh, overwrite=True).reshape(3, m)
        h = g.inverse(hh, overwrite=True).reshape(5, m) if fb else qq
        rq, force = g.empty_real((5,)), g.empty_real((3,))
        kk = g.empty_real((3,)) if fb else force
        _kernels.coupling_terms(uu, qq, gq, w, h, fb, rq.reshape(5, m), force.reshape(3, m),
                                kk.reshape(3, m))
        nq_hat = g.forward(rq, dealias=True)
        nq_hat -= lam_hat
        fh = g.forward(force, dealias=True)
        kh = g.forward(kk, dealias=True) if fb else fh
        _kernels.assemble_momentum(fh, kh, *g.k1d, fb)
        return fh, nq_hat

    def _general(self, u: VecField, q: QField):
        g, p, mask = self.grid, self.params, self.mask
        xe = g.xi_eff
        uu = u.data
        qq = q.data
        lam_hat = potential_hat(q, p.potential)
        gq = g.inverse(g.grad_hat(q.hat))
        a = g.inverse(np.stack([1j * xe[i] * u.hat for i in range(3)]))
        adv = np.einsum("i...,ia...->a...", uu, gq)
        nq_hat = g.forward(tensor_S(a, qq, p.xi) - adv) * mask - lam_hat
        uu_t = np.einsum("i...,j...->ij...", uu, uu)
        if p.feedback:
            h = g.inverse(g.lap_hat(q.hat) - lam_hat)
            stress = tensor_Sigma(qq, h, p.xi, grad_q=gq) - uu_t
        else:
            stress = -uu_t
        th = g.forward(stress) * mask
        div = 1j * (xe[0] * th[:, 0] + xe[1] * th[:, 1] + xe[2] * th[:, 2])
        return g.project_hat(div), nq_hat


_R3 = np.sqrt(3.0)


def _commutator_wq(w, q):
    """5 coordinates of ``W Q - Q W`` for antisymmetric ``W`` given by
    ``(W_01, W_02, W_12)`` and symmetric traceless ``Q``."""
    w0, w1, w2 = w
    q0, q1, q2, q3, q4 = q
    return np.stack([
        -_R3 * (q3 * w1 + q4 * w2),
        2.0 * q2 * w0 + q3 * w1 - q4 * w2,
        -2.0 * q1 * w0 + q3 * w2 + q4 * w1,
        (_R3 * q0 - q1) * w1 - q2 * w2 + q4 * w0,
        (_R3 * q0 + q1) * w2 - q2 * w1 - q3 * w0,
    ])


def _commutator_qh(q, h):
    """``(K_01, K_02, K_12)`` of the antisymmetric ``K = QH - HQ``."""
    q0, q1, q2, q3, q4 = q
    h0, h1, h2, h3, h4 = h
    return np.stack([
        h2 * q1 - h1 * q2 + 0.5 * (h4 * q3 - h3 * q4),
        0.5 * (_R3 * (h0 * q3 - h3 * q0) - h1 * q3 + h3 * q1 - h2 * q4 + h4 * q2),
        0.5 * (_R3 * (h0 * q4 - h4 * q0) + h1 * q4 - h4 * q1 - h2 * q3 + h3 * q2),
    ])


def q_rhs(state: State, params: ModelParams) -> QField:
    """Full ``dQ/dt`` including the Laplacian."""
    g = state.grid
    _, nq = Rhs(g, params)(state.u, state.q)
    return QField(g, hat=g.lap_hat(state.q.hat) + nq)


def u_rhs(state: State, params: ModelParams) -> VecField:
    """Full ``du/dt`` including the Laplacian; pressure never formed."""
    g = state.grid
    nu, _ = Rhs(g, params)(state.u, state.q)
    return VecField(g, hat=g.lap_hat(state.u.hat) + nu)


def max_speed(u: VecField) -> float:
    return float(np.sqrt(np.max(np.sum(u.data**2, axis=0))))


class Stepper:
    """Integrating-factor Heun scheme, second order in ``dt``.

    ``y* = E (y + dt N(y))``, ``y_new = E y + dt/2 (E N(y) + N(y*))`` with
    ``E = exp(-|xi|^2 dt)`` applied to both ``u`` and ``Q``.
    """

    def __init__(self, grid: PeriodicGrid, params: ModelParams, dt: float, cfl_safety: float = 0.5):
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.params = params
        self.dt = float(dt)
        self.cfl_safety = cfl_safety
        self.rhs = Rhs(grid, params)
        self.decay = np.exp(-grid.k2 * self.dt)

    def with_dt(self, dt: float) -> "Stepper":
        return Stepper(self.grid, self.params, dt, self.cfl_safety)

    def check_cfl(self, state: State):
        vmax = max_speed(state.u)
        limit = self.cfl_safety * self.grid.dx
        if vmax * self.dt > limit:
            raise CFLViolation(self.dt, limit / vmax, state)

    def step(self, state: State, t_new: float | None = None) -> State:
        g, dt, e = self.grid, self.dt, self.decay
        self.check_cfl(state)
        uh0, qh0 = state.u.hat, state.q.hat
        nu0, nq0 = self.rhs(state.u, state.q)
        u1, q1 = g.empty_hat((3,)), g.empty_hat((5,))
        _kernels.heun_predict(uh0, nu0, e, dt, u1)
        _kernels.heun_predict(qh0, nq0, e, dt, q1)
        nu1, nq1 = self.rhs(VecField(g, hat=u1), QField(g, hat=q1))
        uh, qh = u1, q1
        ok = _kernels.heun_correct(uh0, nu0, nu1, e, dt, uh)
        ok &= _kernels.heun_correct(qh0, nq0, nq1, e, dt, qh)
        _kernels.assemble_momentum(uh, uh, *g.k1d, False)
        t = state.t + dt if t_new is None else t_new
        if not ok:
            raise NumericalFailure(f"non-finite state at t={t:g}", state)
        return State(t, VecField(g, hat=uh), QField(g, hat=qh))


def step(state: State, params: ModelParams, dt: float, cfl_safety: float = 0.5) -> State:
    """One integrating-factor Heun step; see :class:`Stepper`."""
    return Stepper(state.grid, params, dt, cfl_safety).step(state)


def linear_state(grid: PeriodicGrid, u=None, q=None, t: float = 0.0) -> State:
    """State from physical arrays, dealiased and with ``u`` projected."""
    u = np.zeros((3,) + grid.shape) if u is None else u
    q = np.zeros((5,) + grid.shape) if q is None else q
    uh = grid.project_hat(grid.dealias_hat(grid.forward(u)))
    qh = grid.dealias_hat(grid.forward(q))
    return State(t, VecField(grid, grid.inverse(uh)), QField(grid, grid.inverse(qh)))


def with_potential(params: ModelParams, pot: Potential) -> ModelParams:
    return replace(params, potential=pot)
