"""Flat complex torus as a periodic grid, with spectral calculus.

The torus is [0,1)^{2n} with the complex structure z_j = x_j + i y_j and a
constant Hermitian metric g.  Scalar fields are stored flat, row-major
over the axis order (x_1, y_1, ..., x_n, y_n); that order is the one
canonical serialization used everywhere (CSV companions, snapshots).

Differentiation is Fourier-spectral.  First-derivative symbols have their
Nyquist mode zeroed (the usual real-symmetry convention), and every
higher-order multiplier is built from those zeroed symbols, so applying a
derivative twice agrees exactly with the squared multiplier.
"""

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .backend import fftn, ifftn
from .errors import DomainMismatch

__all__ = [
    "GridDomain",
    "ScalarField",
    "HermitianMatrixField",
    "build_domain",
    "complex_hessian",
    "hessian_pack",
    "holomorphic_gradient",
    "holomorphic_gradient_norm",
    "integrate",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = b"DHYM"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class GridDomain:
    """Uniform periodic grid on the flat torus T^n_C.

    Use :func:`build_domain`; the constructor performs no validation.
    Derived spectral data (symbols, multiplier tables, Cholesky factors)
    is cached on first use and never mutated afterwards, so a domain is
    safe to share between threads.
    """

    n: int
    N: int
    metric: np.ndarray = field(repr=False)

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def shape(self):
        return (self.N,) * (2 * self.n)

    @property
    def total_points(self):
        return self.N ** (2 * self.n)

    @cached_property
    def is_identity_metric(self):
        return np.array_equal(self.metric, np.eye(self.n))

    @cached_property
    def cholesky(self):
        """Lower Cholesky factor L with g = L L^H."""
        return np.linalg.cholesky(self.metric)

    @cached_property
    def linv(self):
        """Inverse Cholesky factor, or None for the identity metric."""
        if self.is_identity_metric:
            return None
        return np.linalg.inv(self.cholesky)

    @cached_property
    def metric_inv(self):
        return np.linalg.inv(self.metric)

    def _axis_wavenumbers(self, zero_nyquist):
        k = np.fft.fftfreq(self.N) * self.N
        if zero_nyquist:
            k = k.copy()
            k[np.abs(k) == self.N // 2] = 0.0
        return k

    def _axis_grid(self, axis, k):
        shape = [1] * (2 * self.n)
        shape[axis] = self.N
        return k.reshape(shape)

    @cached_property
    def sigma(self):
        """Symbols of d/dz_j, j=0..n-1: sigma_j = pi*(k_y + i k_x).

        Nyquist-zeroed per axis; full-shape complex arrays.
        """
        out = []
        k = self._axis_wavenumbers(zero_nyquist=True)
        for j in range(self.n):
            kx = self._axis_grid(2 * j, k)
            ky = self._axis_grid(2 * j + 1, k)
            out.append(np.pi * (ky + 1j * kx) * np.ones(self.shape))
        return out

    def hessian_multiplier(self, i, j):
        """Symbol of d^2/dz_i dzbar_j, i.e. -sigma_i * conj(sigma_j)."""
        return -self.sigma[i] * np.conj(self.sigma[j])

    @cached_property
    def _hess_pair_multipliers(self):
        """Fused multipliers for one-pass Hessian extraction.

        Real diagonal symbols are packed two per complex transform:
        Re/Im of ifftn((m_ii + i m_jj) * u_hat) are the two diagonal
        entries.  Off-diagonal entries are complex fields already.
        """
        s = self.sigma
        if self.n == 1:
            return [-(s[0] * np.conj(s[0])).real]
        mults = []
        m00 = -(s[0] * np.conj(s[0])).real
        m11 = -(s[1] * np.conj(s[1])).real
        mults.append(m00 + 1j * m11)
        if self.n == 3:
            mults.append(-(s[2] * np.conj(s[2])).real + 0j)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                mults.append(-s[i] * np.conj(s[j]))
        return mults

    @cached_property
    def _hess_plan(self):
        from .backend import SpectralPlan

        return SpectralPlan(self._hess_pair_multipliers)

    @cached_property
    def coords(self):
        """Full-shape coordinate arrays, one per real axis."""
        x = np.arange(self.N) / self.N
        return [self._axis_grid(a, x) * np.ones(self.shape)
                for a in range(2 * self.n)]

    def zeros(self):
        return ScalarField(self, np.zeros(self.total_points))

    def field_from_grid(self, grid):
        """Wrap a (N,)*2n array (canonical axis order) as a ScalarField."""
        grid = np.asarray(grid, dtype=np.float64)
        if grid.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {grid.shape}")
        return ScalarField(self, grid.reshape(-1).copy())


@dataclass
class ScalarField:
    """Real scalar field on a grid domain, flat canonical-order storage."""

    domain: GridDomain
    values: np.ndarray

    def grid(self):
        """View of the values in (N,)*2n shape."""
        return self.values.reshape(self.domain.shape)

    def copy(self):
        return ScalarField(self.domain, self.values.copy())


@dataclass
class HermitianMatrixField:
    """Per-point n x n Hermitian matrices, stacked as (P, n, n) complex."""

    domain: GridDomain
    values: np.ndarray

    def check_hermitian(self, tol=1e-12):
        dev = np.abs(self.values - np.conj(np.swapaxes(self.values, -1, -2)))
        return float(dev.max()) <= tol


def build_domain(n, N, g=None):
    """Validate and build a GridDomain.

    n in {1,2,3}; N even and >= 8 (odd N breaks the Fourier real-symmetry
    conventions); g Hermitian positive definite, default identity.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"complex dimension must be 1, 2 or 3, got {n}")
    N = int(N)
    if N < 8 or N % 2 != 0:
        raise ValueError(f"points_per_axis must be even and >= 8, got {N}")
    if g is None:
        g = np.eye(n)
    g = np.asarray(g, dtype=np.complex128).reshape(n, n)
    herm_dev = np.abs(g - g.conj().T).max()
    if herm_dev > 1e-14 * max(1.0, np.abs(g).max()):
        raise ValueError(f"metric is not Hermitian (deviation {herm_dev:.3e})")
    g = 0.5 * (g + g.conj().T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ValueError("metric is not positive definite") from None
    if np.abs(g.imag).max() == 0.0:
        g = g.real.astype(np.float64)
        g = g.astype(np.complex128)
    return GridDomain(n=n, N=N, metric=g)


def _require_same_domain(a, b):
    if a.domain is not b.domain:
        raise DomainMismatch("fields live on different grid domains")


def hessian_pack(domain, values, out=None):
    """Complex Hessian of a flat value array, in packed kernel layout.

    Returns a C-contiguous (n*n, P) float64 array ordered as the kernel
    backends expect: n diagonal rows, then (Re, Im) row pairs for each
    off-diagonal entry in lexicographic (i < j) order.  ``out`` is
    reused as the destination when provided.
    """
    n, P = domain.n, domain.total_points
    fields = domain._hess_plan.apply(values.reshape(domain.shape))
    pack = np.empty((n * n, P), dtype=np.float64) if out is None else out
    if n == 1:
        pack[0] = fields[0].real.reshape(-1)
        return pack
    e1 = fields[0].reshape(-1)
    pack[0] = e1.real
    pack[1] = e1.imag
    base = n
    if n == 3:
        pack[2] = fields[1].real.reshape(-1)
        off_fields = fields[2:]
    else:
        off_fields = fields[1:]
    for k, e in enumerate(off_fields):
        e = e.reshape(-1)
        pack[base + 2 * k] = e.real
        pack[base + 2 * k + 1] = e.imag
    return pack


def complex_hessian(u):
    """u_{i jbar} = d^2 u / dz_i dzbar_j as a HermitianMatrixField."""
    from ._kernels_py import pack_to_matrices

    pack = hessian_pack(u.domain, u.values)
    return HermitianMatrixField(u.domain, pack_to_matrices(pack, u.domain.n))


def holomorphic_gradient(u):
    """The n complex fields d u / dz_j, stacked as (P, n)."""
    d = u.domain
    uh = fftn(u.values.reshape(d.shape))
    out = np.empty((d.total_points, d.n), dtype=np.complex128)
    for j in range(d.n):
        out[:, j] = ifftn(d.sigma[j] * uh).reshape(-1)
    return out

def holomorphic_gradient_norm(u):
    """|grad u|^2_g = sum_jk g^{jk} u_{z_j} conj(u_{z_k}) (monitoring)."""
    d = u.domain
    grad = holomorphic_gradient(u)
    if d.linv is None:
        vals = np.abs(grad) ** 2
        return ScalarField(d, vals.sum(axis=1))
    tg = grad @ d.linv.T.conj()
    return ScalarField(d, (np.abs(tg) ** 2).sum(axis=1))


def integrate(f):
    """Quadrature against the unit-mass uniform measure: h^{2n} * sum.

    Exact for band-limited integrands; the summation order is fixed, so
    results are reproducible bit for bit.
    """
    d = f.domain
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    return vals.sum() * d.h ** (2 * d.n)


def integrate_values(domain, values):
    """integrate() for a raw value array (real or complex)."""
    return values.sum() * domain.h ** (2 * domain.n)


def write_snapshot(field, path):
    """Binary field snapshot: 'DHYM', u32 version, u32 n, u32 N, f64 LE."""
    header = SNAPSHOT_MAGIC + struct.pack(
        "<III", SNAPSHOT_VERSION, field.domain.n, field.domain.N
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.values.astype("<f8").tobytes())


def read_snapshot(path, domain=None):
    """Read a snapshot; builds an identity-metric domain when none given.

    The format stores grid geometry only, so a caller using a non-default
    metric must pass the matching domain.
    """
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:4] != SNAPSHOT_MAGIC:
            raise ValueError("not a DHYM snapshot")
        version, n, N = struct.unpack("<III", head[4:])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if domain is None:
        domain = build_domain(n, N)
    elif (domain.n, domain.N) != (n, N):
        raise DomainMismatch(
            f"snapshot is {n=} N={N}, domain is n={domain.n} N={domain.N}"
        )
    if payload.size != domain.total_points:
        raise ValueError("snapshot payload size mismatch")
    return ScalarField(domain, payload.astype(np.float64))
