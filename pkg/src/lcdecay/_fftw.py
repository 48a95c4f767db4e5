"""Minimal ctypes binding to the system FFTW3 library for batched 3D real transforms.

Plans are made with ``FFTW_ESTIMATE`` (deterministic, no timing
measurements) on 64-byte aligned buffers.  Inputs and outputs are always
64-byte aligned when executed (misaligned inputs are copied first), so the
executed algorithm never depends on where numpy placed an array.
Execution is single-threaded.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import threading

import numpy as np

FFTW_ESTIMATE = 1 << 6
FFTW_DESTROY_INPUT = 1
_ALIGN = 64

_lib = None
_lock = threading.Lock()


def load():
    """Return the loaded library or None when FFTW3 is not available."""
    global _lib
    if _lib is not None:
        return _lib or None
    name = ctypes.util.find_library("fftw3") or "libfftw3.so.3"
    try:
        lib = ctypes.CDLL(name)
    except OSError:
        _lib = False
        return None
    vp = ctypes.c_void_p
    tune_allocator()
    ci = ctypes.c_int
    for fn in (lib.fftw_plan_dft_r2c_3d, lib.fftw_plan_dft_c2r_3d):
        fn.restype = vp
        fn.argtypes = [ci, ci, ci, vp, vp, ctypes.c_uint]
    for fn in (lib.fftw_execute_dft_r2c, lib.fftw_execute_dft_c2r):
        fn.restype = None
        fn.argtypes = [vp, vp, vp]
    _lib = lib
    return lib


def tune_allocator():
    """Keep freed transform buffers in the glibc heap.

    Every step allocates and frees several megabytes of spectra; by default
    glibc returns such blocks to the kernel and each new allocation then
    pays page faults.  Disabled with ``LCDECAY_MALLOC_TUNE=0``.
    """
    import os
    if os.environ.get("LCDECAY_MALLOC_TUNE", "1") == "0":
        return False
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        m_trim_threshold, m_mmap_threshold = -1, -3
        return bool(libc.mallopt(m_mmap_threshold, 1 << 25)) and bool(
            libc.mallopt(m_trim_threshold, 1 << 30))
    except (OSError, AttributeError):
        return False


def _aligned(shape, dtype):
    dtype = np.dtype(dtype)
    nbytes = int(np.prod(shape)) * dtype.itemsize
    raw = np.empty(nbytes + _ALIGN, dtype=np.uint8)
    off = (-raw.ctypes.data) % _ALIGN
    return raw[off:off + nbytes].view(dtype).reshape(shape)


def _addr(a):
    return ctypes.c_void_p(a.ctypes.data)


class Plan:
    """Single-field forward and inverse plans for size ``n^3``, applied to
    each component of a batch through the new-array execute interface."""

    def __init__(self, lib, n: int):
        self.lib = lib
        self.n = n
        self.nh = n // 2 + 1
        real = _aligned((n, n, n), np.float64)
        cplx = _aligned((n, n, self.nh), np.complex128)
        rp, cp = _addr(real), _addr(cplx)
        self.fwd = lib.fftw_plan_dft_r2c_3d(n, n, n, rp, cp, FFTW_ESTIMATE)
        self.inv = lib.fftw_plan_dft_c2r_3d(n, n, n, cp, rp, FFTW_ESTIMATE | FFTW_DESTROY_INPUT)
        if not (self.fwd and self.inv):
            raise RuntimeError("FFTW planning failed")
        self.scale = 1.0 / n**3

    def forward(self, f, weight=None):
        """Spectrum of each ``f[b]`` times ``1/n^3`` (or times ``weight``,
        which must already include that factor)."""
        n = self.n
        batch = f.shape[0]
        out = _aligned((batch, n, n, self.nh), np.complex128)
        if f.ctypes.data % _ALIGN or not f.flags.c_contiguous:
            f = _copy_aligned(f)
        src, dst = f.ctypes.data, out.ctypes.data
        rs, cs = f[0].nbytes, out[0].nbytes
        for b in range(batch):
            self.lib.fftw_execute_dft_r2c(self.fwd, src + b * rs, dst + b * cs)
        out *= self.scale if weight is None else weight
        return out

    def inverse(self, fh, overwrite=False):
        """Inverse transform of each ``fh[b]``; ``overwrite=True`` lets the
        transform destroy ``fh`` instead of working on a copy."""
        n = self.n
        batch = fh.shape[0]
        out = _aligned((batch, n, n, n), np.float64)
        if not overwrite or fh.ctypes.data % _ALIGN or not fh.flags.c_contiguous:
            fh = _copy_aligned(fh)
        src, dst = fh.ctypes.data, out.ctypes.data
        cs, rs = fh[0].nbytes, out[0].nbytes
        for b in range(batch):
            self.lib.fftw_execute_dft_c2r(self.inv, src + b * cs, dst + b * rs)
        return out


def _copy_aligned(f):
    out = _aligned(f.shape, f.dtype)
    out[...] = f
    return out


_plans: dict = {}


def plan(n: int):
    lib = load()
    if lib is None:
        return None
    p = _plans.get(n)
    if p is None:
        with _lock:
            p = _plans.get(n)
            if p is None:
                p = _plans[n] = Plan(lib, n)
    return p
