"""Runtime backend selection: FFT engine and pointwise kernels.

Two independent choices are made once, at import time:

* FFT engine.  torch's CPU FFT is noticeably faster than scipy's pocketfft
  for the small 2n-dimensional transforms this package lives on, so torch
  is used when importable.  Both produce full double precision; results
  agree to round-off.  Override with DHYM_FFT=scipy|torch.

* Pointwise kernels.  The compiled Cython extension is preferred; a pure
  NumPy twin with identical semantics is the fallback.  Override with
  DHYM_KERNELS=cython|python.

``benchmarks/bench_backends.py`` compares all combinations.
"""

import os

import numpy as np
import scipy.fft as _sfft

__all__ = ["fftn", "ifftn", "fft_engine", "kernels", "kernel_engine"]


def _pick_fft():
    choice = os.environ.get("DHYM_FFT", "auto").lower()
    if choice not in ("auto", "torch", "scipy"):
        raise ValueError("DHYM_FFT must be one of auto, torch, scipy")
    if choice in ("auto", "torch"):
        try:
            import torch

            def fftn(a, axes=None):
                t = torch.from_numpy(np.ascontiguousarray(a))
                dim = tuple(range(a.ndim)) if axes is None else tuple(axes)
                return torch.fft.fftn(t, dim=dim).numpy()

            def ifftn(a, axes=None):
                t = torch.from_numpy(np.ascontiguousarray(a))
                dim = tuple(range(a.ndim)) if axes is None else tuple(axes)
                return torch.fft.ifftn(t, dim=dim).numpy()

            return fftn, ifftn, "torch"
        except ImportError:
            if choice == "torch":
                raise

    def fftn(a, axes=None):
        return _sfft.fftn(a, axes=axes)

    def ifftn(a, axes=None):
        return _sfft.ifftn(a, axes=axes)

    return fftn, ifftn, "scipy"


fftn, ifftn, fft_engine = _pick_fft()


class SpectralPlan:
    """Repeated multiply-and-invert of a fixed multiplier family.

    Built once per domain; on the torch engine the multipliers live as
    resident tensors so the per-step cost is the transforms alone.
    apply(u_grid) returns one complex field per multiplier.
    """

    def __init__(self, multipliers):
        self._np_mults = [np.ascontiguousarray(m, dtype=np.complex128)
                          for m in multipliers]
        self._torch = None
        if fft_engine == "torch":
            import torch

            self._torch = torch
            self._t_mults = [torch.from_numpy(m) for m in self._np_mults]

    def apply(self, u_grid):
        if self._torch is not None:
            torch = self._torch
            uh = torch.fft.fftn(torch.from_numpy(u_grid))
            return [torch.fft.ifftn(m * uh).numpy() for m in self._t_mults]
        uh = _sfft.fftn(u_grid)
        return [_sfft.ifftn(m * uh) for m in self._np_mults]


def _pick_kernels():
    choice = os.environ.get("DHYM_KERNELS", "auto").lower()
    if choice not in ("auto", "cython", "python"):
        raise ValueError("DHYM_KERNELS must be one of auto, cython, python")
    if choice in ("auto", "cython"):
        try:
            from . import _kernels

            return _kernels, "cython"
        except ImportError:
            if choice == "cython":
                raise
    from . import _kernels_py

    return _kernels_py, "python"


kernels, kernel_engine = _pick_kernels()
