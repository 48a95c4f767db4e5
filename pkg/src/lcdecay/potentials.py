"""Bulk free energies and numerical checks of their structural hypotheses."""
from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, tensor


class Potential(abc.ABC):
    """Bulk free energy ``F`` of a Q-tensor.

    All methods take ``SymTraceless3`` coordinates of shape ``(5, ...)``.
    Implementations are assumed invariant under rotations ``Q -> R Q R^T``,
    so ``F`` depends on ``Q`` only through ``|Q|^2`` and ``tr Q^3``.
    """

    @abc.abstractmethod
    def value(self, q):
        """``F(Q)``, shape ``q.shape[1:]``."""

    @abc.abstractmethod
    def gradient(self, q):
        """Full Euclidean gradient ``dF(Q)`` as a ``Mat3`` array."""

    def projected_gradient(self, q):
        """``L[dF(Q)]`` in 5 coordinates (the trace part is dropped)."""
        return tensor.from_matrix(self.gradient(q))

    def pairing(self, q):
        """``dF(Q) : Q``."""
        return np.sum(self.projected_gradient(q) * q, axis=0)

    @property
    def linear_rate(self) -> float:
        """Coefficient ``s`` of the linearisation ``L[dF(Q)] ~ s Q`` at 0."""
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialPotential(Potential):
    """``F(Q) = a/2 |Q|^2 + b/3 tr Q^3 + c/4 |Q|^4``."""

    a: float = 1.0
    b: float = 0.0
    c: float = 1.0

    def value(self, q):
        q = np.asarray(q, dtype=float)
        flat = np.ascontiguousarray(q.reshape(5, -1))
        out = _kernels.polynomial_value(flat, float(self.a), float(self.b), float(self.c))
        return out.reshape(q.shape[1:])

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        m = tensor.to_matrix(q)
        r2 = tensor.norm2(q)
        g = (self.a + self.c * r2) * m
        if self.b != 0.0:
            g = g + self.b * tensor.matmul(m, m)
        return g

    def projected_gradient(self, q):
        # a Q + b (Q^2 - tr(Q^2)/3 I) + c |Q|^2 Q
        q = np.asarray(q, dtype=float)
        flat = np.ascontiguousarray(q.reshape(5, -1))
        out = _kernels.polynomial_gradient(flat, float(self.a), float(self.b), float(self.c))
        return out.reshape(q.shape)

    @property
    def linear_rate(self) -> float:
        return self.a


@dataclass
class SamplingConfig:
    """Sample grid for :func:`verify_hypotheses`.

    Radii are sampled on ``(0, 2 * r2_max]``; candidate outer radii ``r2`` on
    ``[r2_min, r2_max]``.  Angles parameterise the eigenvalue simplex of
    traceless symmetric matrices.
    """

    n_radial: int = 200
    n_angular: int = 61
    n_candidates: int = 20
    r2_min: float = 0.5
    r2_max: float = 2.0


@dataclass
class PotentialHypothesesReport:
    r1: float
    r2: float
    i6_ok: bool
    i7_ok: bool
    lam: Optional[float]
    alpha: float
    samples: int
    witness: Optional[np.ndarray] = None
    message: str = ""
    exterior_certified: Optional[bool] = None
    extras: dict = field(default_factory=dict)


def eigen_samples(radii, n_angular):
    """5-coordinate samples ``Q = diag(lam)`` with ``|Q| = r``.

    ``lam = r sqrt(2/3) (cos t, cos(t - 2pi/3), cos(t + 2pi/3))`` for
    ``t`` in ``[0, pi/3]``; this covers every spectrum up to ordering, and
    ``tr Q^3 = r^3 cos(3t) / sqrt(6)`` sweeps ``[-1, 1]`` times its extreme.
    Returns an array of shape ``(5, len(radii), n_angular)``.
    """
    radii = np.asarray(radii, dtype=float)
    theta = np.linspace(0.0, np.pi / 3.0, n_angular)
    shifts = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
    lam = np.sqrt(2.0 / 3.0) * np.cos(theta[None, :] + shifts[:, None])
    lam = lam[:, None, :] * radii[None, :, None]
    return tensor.from_eigenvalues(lam)


def verify_hypotheses(pot: Potential, config: SamplingConfig | None = None):
    """Sample ``pot`` to locate radii ``r1 < r2`` for the positivity hypotheses.

    The outer radius ``r2`` is the smallest candidate such that ``F > 0`` on
    every sample with ``0 < |Q| <= r2`` and ``dF(Q):Q >= 0`` on every sample of
    the shell ``r2 <= |Q| <= 2 r2``.  The inner radius ``r1`` is the largest
    sampled radius below ``r2`` with ``dF(Q):Q >= 0`` on the whole ball.
    ``lam`` is the infimum of ``F/|Q|^2`` over the ``r1`` ball (reported only
    when positive) and ``alpha`` the supremum over the ``r2`` ball.

    When a hypothesis fails, the corresponding flag is false and ``witness``
    holds a violating sample (5 coordinates), chosen closest to the origin.
    """
    cfg = config or SamplingConfig()
    if not 0.0 < cfg.r2_min <= cfg.r2_max:
        raise ValueError("need 0 < r2_min <= r2_max")
    candidates = np.linspace(cfg.r2_min, cfg.r2_max, max(cfg.n_candidates, 1))
    if cfg.r2_min == cfg.r2_max:
        candidates = candidates[:1]
    radii = np.linspace(0.0, 2.0 * cfg.r2_max, cfg.n_radial + 1)[1:]
    radii = np.unique(np.concatenate([radii, candidates, 2.0 * candidates]))
    qs = eigen_samples(radii, cfg.n_angular)
    r2s = radii**2
    f = np.asarray(pot.value(qs))
    p = np.asarray(pot.pairing(qs))
    f_min = f.min(axis=1)
    p_min = p.min(axis=1)
    n_samples = f.size

    def witness_at(values, index):
        j = int(np.argmin(values[index]))
        return qs[:, index, j].copy()

    f_bad = np.nonzero(f_min <= 0.0)[0]
    p_bad = np.nonzero(p_min < 0.0)[0]
    first_f_bad = radii[f_bad[0]] if f_bad.size else np.inf
    rep = PotentialHypothesesReport(
        r1=np.nan, r2=np.nan, i6_ok=True, i7_ok=True, lam=None,
        alpha=np.nan, samples=n_samples)

    if isinstance(pot, PolynomialPotential):
        rep.exterior_certified = _polynomial_exterior_radius(pot) is not None

    if f_bad.size and first_f_bad <= cfg.r2_min:
        rep.i6_ok = False
        rep.witness = witness_at(f, f_bad[0])
        rep.message = f"F <= 0 at |Q| = {radii[f_bad[0]]:.6g}"
        if p_bad.size and radii[p_bad[0]] == radii[0]:
            rep.i7_ok = False
        return rep

    r2 = None
    for rho in candidates:
        if rho >= first_f_bad:
            break
        shell = (radii >= rho) & (radii <= 2.0 * rho)
        if np.all(p_min[shell] >= 0.0):
            r2 = float(rho)
            break
    if r2 is None:
        bad = f_bad[0] if f_bad.size and first_f_bad <= cfg.r2_max else None
        if bad is not None:
            rep.i6_ok = False
            rep.witness = witness_at(f, bad)
            rep.message = f"F <= 0 at |Q| = {radii[bad]:.6g}"
        else:
            rep.i7_ok = False
            shell = np.nonzero((radii >= cfg.r2_max) & (p_min < 0.0))[0]
            rep.witness = witness_at(p, shell[0] if shell.size else p_bad[0])
            rep.message = "dF:Q < 0 outside every candidate ball"
        return rep

    inner = np.nonzero(radii < r2)[0]
    good = inner[np.cumsum(p_min[inner] < 0.0) == 0]
    if good.size == 0:
        rep.i7_ok = False
        rep.witness = witness_at(p, p_bad[0])
        rep.message = "dF:Q < 0 arbitrarily close to 0"
        return rep
    r1 = float(radii[good[-1]])
    ratio = f / r2s[:, None]
    lam = float(ratio[radii <= r1].min())
    rep.r1, rep.r2 = r1, r2
    rep.lam = lam if lam > 0.0 else None
    rep.alpha = float(ratio[radii <= r2].max())
    return rep


def _polynomial_exterior_radius(pot: PolynomialPotential):
    """Radius beyond which ``dF:Q >= 0`` provably holds for all ``Q``, or None.

    ``dF:Q = a|Q|^2 + b tr Q^3 + c|Q|^4 >= |Q|^2 (a - |b| r / sqrt 6 + c r^2)``.
    """
    a, b, c = pot.a, abs(pot.b), pot.c
    if c <= 0.0:
        return None
    disc = b * b / 6.0 - 4.0 * a * c
    if disc < 0.0:
        return 0.0
    return (b / np.sqrt(6.0) + np.sqrt(disc)) / (2.0 * c)
