"""Property sweeps over random instances (used by ``lcdecay verify``).

Each check returns the largest error it observed; ``verify_suite`` compares
them with the default tolerances and reports ``*_ok`` flags.
"""
from __future__ import annotations

import numpy as np

from .. import tensor
from ..dynamics import tensor_S_full, tensor_S_reduced, tensor_Sigma, tensor_Sigma_reduced
from ..potentials import Potential, verify_hypotheses
from ..spectral import PeriodicGrid

IDENTITY_TOL = 1e-12
GRADIENT_TOL = 1e-6


def random_q(rng: np.random.Generator, m: int, scale: float = 1.0):
    """``m`` random SymTraceless3 values (5 coordinates, standard normal)."""
    return scale * rng.standard_normal((5, m))


def random_skew(rng: np.random.Generator, m: int):
    a = rng.standard_normal((3, 3, m))
    return 0.5 * (a - a.transpose(1, 0, 2))


def corotation_identity_error(rng, m: int = 1000) -> float:
    """``max |(W Q - Q W) : Q| / (|W| |Q|^2)`` for antisymmetric ``W``."""
    q = random_q(rng, m)
    w = random_skew(rng, m)
    qm = tensor.to_matrix(q)
    val = tensor.frobenius_inner(tensor.commutator(w, qm), qm)
    scale = np.sqrt(tensor.frobenius_inner(w, w)) * tensor.norm2(q)
    return float(np.max(np.abs(val) / scale))


def potential_commutation_error(pot: Potential, rng, m: int = 1000) -> float:
    """``max |Q dF(Q) - dF(Q) Q| / (|Q| |dF(Q)|)``."""
    q = random_q(rng, m)
    qm = tensor.to_matrix(q)
    g = pot.gradient(q)
    c = tensor.commutator(qm, g)
    num = np.sqrt(tensor.frobenius_inner(c, c))
    den = np.sqrt(tensor.norm2(q) * tensor.frobenius_inner(g, g))
    return float(np.max(num / den))


def s_consistency_error(rng, m: int = 1000) -> float:
    """Full ``S`` at ``xi = 0`` against the commutator form."""
    a = rng.standard_normal((3, 3, m))
    q = random_q(rng, m)
    d = tensor_S_full(a, q, 0.0) - tensor_S_reduced(a, q)
    return float(np.max(np.abs(d)))


def sigma_consistency_error(pot: Potential, rng, m: int = 1000) -> float:
    """Full stress at ``xi = 0`` with ``H = Lap Q - L[dF(Q)]`` against the
    reduced form built from ``Lap Q`` alone."""
    q = random_q(rng, m)
    lap = random_q(rng, m)
    gq = rng.standard_normal((3, 5, m))
    h = lap - pot.projected_gradient(q)
    d = tensor_Sigma(q, h, 0.0, grad_q=gq) - tensor_Sigma_reduced(q, lap, gq)
    return float(np.max(np.abs(d)))


def projector_errors(rng, n: int = 16, L: float = 2.0 * np.pi):
    """``(idempotence, self-adjointness)`` relative errors on random fields."""
    g = PeriodicGrid(n, L)
    u = rng.standard_normal((3,) + g.shape)
    v = rng.standard_normal((3,) + g.shape)
    uh, vh = g.forward(u), g.forward(v)
    pu = g.project_hat(uh)
    idem = np.sqrt(g.norm2_hat(g.project_hat(pu) - pu) / g.norm2_hat(uh))
    lhs = g.inner_hat(pu, vh)
    rhs = g.inner_hat(uh, g.project_hat(vh))
    adj = abs(lhs - rhs) / np.sqrt(g.norm2_hat(uh) * g.norm2_hat(vh))
    return float(idem), float(adj)


def gradient_fd_error(pot: Potential, rng, m: int = 1000, h: float = 1e-5) -> float:
    """Largest relative error of ``L[dF]`` against central differences of
    ``F`` along the 5 orthonormal coordinates."""
    q = random_q(rng, m)
    fd = np.empty_like(q)
    for k in range(5):
        e = np.zeros((5, 1))
        e[k] = h
        fd[k] = (pot.value(q + e) - pot.value(q - e)) / (2.0 * h)
    pg = pot.projected_gradient(q)
    err = np.sqrt(np.sum((pg - fd) ** 2, axis=0)) / np.maximum(
        np.sqrt(np.sum(pg**2, axis=0)), 1e-300)
    return float(np.max(err))


def verify_suite(cfg, seed: int = 0, m: int = 1000) -> dict:
    """Hypotheses report plus all identity checks for the configured potential."""
    pot = cfg.potential()
    rng = np.random.default_rng(seed)
    out = {}
    rep = verify_hypotheses(pot)
    out["i6_ok"] = rep.i6_ok
    out["i7_ok"] = rep.i7_ok
    out["r1"] = rep.r1
    out["r2"] = rep.r2
    out["lambda"] = rep.lam if rep.lam is not None else float("nan")
    out["alpha"] = rep.alpha
    out["samples"] = rep.samples
    if rep.message:
        out["message"] = rep.message
    e = corotation_identity_error(rng, m)
    out["corotation_identity_err"] = e
    out["corotation_identity_ok"] = e <= IDENTITY_TOL
    e = potential_commutation_error(pot, rng, m)
    out["potential_commutation_err"] = e
    out["potential_commutation_ok"] = e <= IDENTITY_TOL
    idem, adj = projector_errors(rng)
    out["projector_idempotence_err"] = idem
    out["projector_selfadjoint_err"] = adj
    out["projector_ok"] = idem <= IDENTITY_TOL and adj <= IDENTITY_TOL
    e = max(s_consistency_error(rng, m), sigma_consistency_error(pot, rng, m))
    out["xi_consistency_err"] = e
    out["xi_consistency_ok"] = e <= IDENTITY_TOL
    e = gradient_fd_error(pot, rng, m)
    out["gradient_fd_err"] = e
    out["gradient_fd_ok"] = e <= GRADIENT_TOL
    return out
