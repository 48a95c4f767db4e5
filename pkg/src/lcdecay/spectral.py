"""Periodic box discretisation and Fourier-space operators.

Transform convention: the forward transform carries the ``1/n^3`` factor,

    c_k = n^-3 sum_x f(x) exp(-i xi_k . x),   xi_k = 2 pi k / L,

so ``c_k`` approximates Fourier-series coefficients and Plancherel reads
``int |f|^2 dx = L^3 sum_k |c_k|^2``.  Real fields are stored with the
half-spectrum layout of ``scipy.fft.rfftn`` over the last three axes.

First-derivative multipliers ``i xi_j`` are zeroed on the Nyquist plane of
axis ``j`` (no real field can carry an odd derivative there); the Laplacian
multiplier is ``-sum_j (xi_j^eff)^2`` with the same effective wavenumbers, so
``div(grad f) == lap f`` holds exactly.  Fields evolved by the solver are
dealiased and never touch the Nyquist planes.

Transforms run on the system FFTW3 library when it can be loaded and on
``scipy.fft`` otherwise; ``LCDECAY_FFT=scipy`` forces the fallback.
"""
from __future__ import annotations

import os
import struct

import numpy as np
import scipy.fft as sfft

from . import _fftw, _kernels

MAGIC = b"BEDL1"


def workers() -> int:
    """Thread count for transforms (``THREADS`` environment override)."""
    try:
        return max(1, int(os.environ.get("THREADS", "1")))
    except ValueError:
        return 1


def fft_backend() -> str:
    if os.environ.get("LCDECAY_FFT", "").lower() == "scipy" or _fftw.load() is None:
        return "scipy"
    return "fftw"


def tree_sum(x) -> float:
    """Deterministic fixed-tree pairwise sum of all entries of ``x``.

    The reduction order depends only on ``x.size``, never on thread count.
    """
    return float(_kernels.pairwise_sum(np.ascontiguousarray(x, dtype=float).ravel()))


class GridMismatch(ValueError):
    pass


class PeriodicGrid:
    """Uniform ``n^3`` grid on the box ``[0, L)^3``."""

    def __init__(self, n: int, box_length: float = 2.0 * np.pi):
        n = int(n)
        if n < 8 or n % 2:
            raise ValueError(f"grid n must be even and >= 8, got {n}")
        if not box_length > 0.0:
            raise ValueError("box_length must be positive")
        self.n = n
        self.L = float(box_length)
        self.dx = self.L / n
        self.shape = (n, n, n)
        self.spectral_shape = (n, n, n // 2 + 1)

        k = np.fft.fftfreq(n, 1.0 / n)
        kz = np.arange(n // 2 + 1, dtype=float)
        self.kint = (k[:, None, None], k[None, :, None], kz[None, None, :])
        scale = 2.0 * np.pi / self.L
        self.xi = tuple(scale * ki for ki in self.kint)
        xi_eff = []
        for ki in self.kint:
            xe = scale * np.where(np.abs(ki) == n // 2, 0.0, ki)
            xi_eff.append(xe)
        self.xi_eff = tuple(xi_eff)
        self.xi2 = self.xi[0] ** 2 + self.xi[1] ** 2 + self.xi[2] ** 2
        self.k2 = xi_eff[0] ** 2 + xi_eff[1] ** 2 + xi_eff[2] ** 2
        self.xi_norm = np.sqrt(self.xi2)

        cutoff = n / 3.0
        self.dealias_mask = (
            (np.abs(self.kint[0]) <= cutoff)
            & (np.abs(self.kint[1]) <= cutoff)
            & (self.kint[2] <= cutoff))

        # Weights counting each stored half-spectrum coefficient with its
        # conjugate partner.
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self._hw1d = w
        self.hermitian_weight = np.broadcast_to(w[None, None, :], self.spectral_shape)

        self._backend = fft_backend()
        self._mask_scale = self.dealias_mask / float(n) ** 3
        self.ixi_eff = tuple(1j * xe for xe in xi_eff)
        self.k1d = tuple(np.ascontiguousarray(xe.ravel()) for xe in xi_eff)
        self._inv_k2 = np.where(self.k2 > 0.0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)

    def __eq__(self, other):
        return isinstance(other, PeriodicGrid) and self.n == other.n and self.L == other.L

    def __hash__(self):
        return hash((self.n, self.L))

    def __repr__(self):
        return f"PeriodicGrid(n={self.n}, L={self.L!r})"

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    def coordinates(self):
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, x, indexing="ij")

    # -- transforms ----------------------------------------------------
    def _plan(self, lead):
        if self._backend != "fftw":
            return None
        return _fftw.plan(self.n)

    def forward(self, f, dealias: bool = False):
        """Forward transform; ``dealias=True`` also applies the 2/3 mask."""
        f = np.asarray(f, dtype=float)
        lead = f.shape[:-3]
        p = self._plan(lead)
        if p is None:
            fh = sfft.rfftn(f, axes=(-3, -2, -1), norm="forward", workers=workers())
            return fh * self.dealias_mask if dealias else fh
        w = self._mask_scale if dealias else None
        return p.forward(f.reshape((-1,) + self.shape), w).reshape(lead + self.spectral_shape)

    def inverse(self, fh, overwrite: bool = False):
        """Inverse transform; ``overwrite=True`` allows destroying ``fh``."""
        fh = np.asarray(fh)
        lead = fh.shape[:-3]
        p = self._plan(lead)
        if p is None:
            return sfft.irfftn(fh, s=self.shape, axes=(-3, -2, -1), norm="forward",
                               workers=workers())
        return p.inverse(fh.reshape((-1,) + self.spectral_shape), overwrite).reshape(lead + self.shape)

    def empty_hat(self, lead=()):
        """Uninitialised spectral array, aligned for in-place transforms."""
        return _fftw._aligned(tuple(lead) + self.spectral_shape, np.complex128)

    def empty_real(self, lead=()):
        """Uninitialised physical array, aligned for the transforms."""
        return _fftw._aligned(tuple(lead) + self.shape, np.float64)

    # -- spectral multipliers (arrays in half-spectrum layout) ---------
    def grad_hat(self, fh):
        """``(3, ...)`` spectral gradient of spectral array ``fh``."""
        fh = np.asarray(fh)
        out = _fftw._aligned((3,) + fh.shape, np.complex128)
        for i, ix in enumerate(self.ixi_eff):
            np.multiply(ix, fh, out=out[i])
        return out

    def div_hat(self, vh):
        """Spectral divergence contracting the first axis of ``vh``."""
        return 1j * (self.xi_eff[0] * vh[0] + self.xi_eff[1] * vh[1] + self.xi_eff[2] * vh[2])

    def lap_hat(self, fh):
        return -self.k2 * fh

    def project_hat(self, vh):
        """Helmholtz projector ``delta_ij - xi_i xi_j / |xi|^2``; mean mode kept."""
        xe = self.xi_eff
        s = (xe[0] * vh[0] + xe[1] * vh[1] + xe[2] * vh[2]) * self._inv_k2
        return np.stack([vh[i] - xe[i] * s for i in range(3)])

    def dealias_hat(self, fh):
        return fh * self.dealias_mask

    def inner_hat(self, fh, gh) -> float:
        """``int f g dx`` from spectral coefficients (Plancherel)."""
        prod = (fh * np.conj(gh)).real * self.hermitian_weight
        return self.volume * tree_sum(prod)

    def norm2_hat(self, fh) -> float:
        """``int |f|^2 dx`` summed over all leading components."""
        return self.volume * tree_sum(self.mode_density(fh))

    def mode_density(self, fh):
        """``|f^|^2`` per stored mode, summed over components and weighted
        by the conjugate multiplicity of the half spectrum."""
        fh = np.asarray(fh)
        fh = fh.reshape((-1,) + self.spectral_shape)
        return _kernels.mode_density(np.ascontiguousarray(fh), self._hw1d)

    def integrate(self, f) -> float:
        """Rectangle-rule integral (exact for resolved trigonometric polynomials)."""
        return self.cell_volume * tree_sum(f)


class Field:
    """Grid-sampled field with ``ncomp`` components and a lazily cached spectrum.

    ``data`` has shape ``(ncomp, n, n, n)``.  Assigning ``data`` marks the
    cached spectrum dirty; constructing from a spectrum caches it clean.
    """

    ncomp = 1

    def __init__(self, grid: PeriodicGrid, data=None, *, hat=None):
        self.grid = grid
        self._data = None
        self._hat = None
        self.cache = {}
        if data is not None:
            self.data = data
        elif hat is not None:
            hat = np.asarray(hat, dtype=complex)
            if hat.shape != (self.ncomp,) + grid.spectral_shape:
                raise GridMismatch(f"spectral shape {hat.shape} does not fit {grid}")
            self._hat = hat
        else:
            self.data = np.zeros((self.ncomp,) + grid.shape)

    @property
    def data(self):
        if self._data is None:
            self._data = self.grid.inverse(self._hat)
        return self._data

    @data.setter
    def data(self, value):
        value = np.asarray(value, dtype=float)
        if value.shape == self.grid.shape and self.ncomp == 1:
            value = value[None]
        if value.shape != (self.ncomp,) + self.grid.shape:
            raise GridMismatch(f"data shape {value.shape} does not fit {self.grid}")
        self._data = value
        self._hat = None
        self.cache = {}

    @property
    def hat(self):
        if self._hat is None:
            self._hat = self.grid.forward(self._data)
        return self._hat

    @property
    def spectral_clean(self) -> bool:
        return self._hat is not None

    def copy(self):
        out = type(self)(self.grid, np.array(self.data))
        if self._hat is not None:
            out._hat = np.array(self._hat)
        return out

    def l2(self) -> float:
        return np.sqrt(self.grid.integrate(np.sum(self.data**2, axis=0)))


class ScalarField(Field):
    ncomp = 1


class VecField(Field):
    ncomp = 3


class QField(Field):
    """Q-tensor field in the 5 canonical coordinates of :mod:`lcdecay.tensor`."""

    ncomp = 5


def _check(grid, *fields):
    for f in fields:
        if f.grid != grid:
            raise GridMismatch("fields live on different grids")


def gradient(f: Field):
    """Gradient of a scalar (``VecField``) or of each component (array ``(3, ncomp, ...)``)."""
    g = f.grid
    gh = np.stack([1j * xe * f.hat for xe in g.xi_eff])
    if isinstance(f, ScalarField):
        return VecField(g, hat=gh[:, 0])
    return g.inverse(gh)


def divergence(v: VecField) -> ScalarField:
    g = v.grid
    return ScalarField(g, hat=g.div_hat(v.hat)[None])


def laplacian(f: Field) -> Field:
    return type(f)(f.grid, hat=f.grid.lap_hat(f.hat))


def helmholtz_project(v: VecField) -> VecField:
    return VecField(v.grid, hat=v.grid.project_hat(v.hat))


def dealias(f: Field) -> Field:
    """Zero every coefficient with some ``|k_j| > n/3`` (strict 2/3 rule)."""
    return type(f)(f.grid, hat=f.grid.dealias_hat(f.hat))


def max_divergence(v: VecField) -> float:
    return float(np.max(np.abs(divergence(v).data)))


def spectral_energy_split(v: Field, radius: float):
    """``(int_{|xi|<R} |v^|^2, int_{|xi|>=R} |v^|^2)``, summing to ``int |v|^2``."""
    if radius < 0.0:
        raise ValueError("radius must be non-negative")
    g = v.grid
    dens = g.mode_density(v.hat)
    low_mask = g.xi_norm < radius
    low = g.volume * tree_sum(np.where(low_mask, dens, 0.0))
    high = g.volume * tree_sum(np.where(low_mask, 0.0, dens))
    return low, high


# -- checkpoints -----------------------------------------------------------

def write_checkpoint(path, grid: PeriodicGrid, t: float, u, q) -> None:
    """Write ``u`` (3 comps) and ``q`` (5 comps) in the binary checkpoint format.

    Layout: ``b"BEDL1"``, then little-endian int64 ``n``, float64 ``L``,
    float64 ``t``; then float64 samples, component-major with the x index
    fastest: ``3 n^3`` values for ``u`` followed by ``5 n^3`` for ``q``.
    """
    u = np.asarray(u, dtype="<f8")
    q = np.asarray(q, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<qdd", grid.n, grid.L, float(t)))
        for arr in (u, q):
            for comp in arr:
                fh.write(np.asarray(comp, dtype="<f8").ravel(order="F").tobytes())


def read_checkpoint(path):
    """Return ``(grid, t, u, q)`` from a checkpoint file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    n, L, t = struct.unpack("<qdd", raw[5:29])
    grid = PeriodicGrid(int(n), L)
    body = np.frombuffer(raw, dtype="<f8", offset=29)
    if body.size != 8 * n**3:
        raise ValueError(f"{path}: expected {8 * n**3} samples, found {body.size}")
    comps = body.reshape(8, n, n, n).transpose(0, 3, 2, 1)
    comps = np.ascontiguousarray(comps, dtype=float)
    return grid, t, comps[:3], comps[3:]
