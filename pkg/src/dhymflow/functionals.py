"""Global complex-valued integrals over the torus.

The central object is the pointwise top wedge det(g^{-1} w + i I), equal
to prod_j(lam_j + i): integrated over the grid it gives the complex
volume Z whose argument is theta_0; mixed powers of two forms reduce to
coefficient extraction from det(s X + t Y), done at n+1 integer nodes
through a tiny Vandermonde solve; and the Calabi-Yau functional

    CY(v) = 1/(n+1) * sum_i  integral of v * ratio_i(w_v, w_chi)

whose imaginary part the dHYM flow conserves.  All integrals use the
unit-mass uniform measure of geometry.integrate.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from . import geometry
from ._kernels_py import det_plus_i, matrices_to_pack, pack_to_matrices
from .errors import NotSupercritical
from .geometry import ScalarField, complex_hessian, hessian_pack, integrate_values

__all__ = [
    "ClosedForm",
    "ComplexVolume",
    "pointwise_top_wedge",
    "theta_zero",
    "mixed_wedge_ratio",
    "calabi_yau",
    "im_cy",
]


@dataclass
class ClosedForm:
    """A closed real (1,1) form chi = C + i d dbar(phi).

    Stored as a constant Hermitian matrix plus a scalar potential, which
    makes closedness automatic on the flat torus.
    """

    domain: geometry.GridDomain
    constant_part: np.ndarray
    potential: ScalarField

    def __post_init__(self):
        n = self.domain.n
        C = np.asarray(self.constant_part, dtype=np.complex128).reshape(n, n)
        if np.abs(C - C.conj().T).max() > 1e-12 * max(1.0, np.abs(C).max()):
            raise ValueError("constant part of a closed form must be Hermitian")
        self.constant_part = 0.5 * (C + C.conj().T)
        if self.potential.domain is not self.domain:
            raise ValueError("potential lives on a different domain")
        self._pack = None

    @classmethod
    def constant(cls, domain, C):
        return cls(domain, C, domain.zeros())

    def entry_pack(self):
        """Packed (n*n, P) realization C + hess(phi); cached."""
        if self._pack is None:
            n, P = self.domain.n, self.domain.total_points
            pack = hessian_pack(self.domain, self.potential.values)
            const = matrices_to_pack(self.constant_part.reshape(1, n, n))
            pack += const  # broadcasts (n*n,1) over (n*n,P)
            self._pack = pack
        return self._pack

    def realize(self):
        """The form as a HermitianMatrixField."""
        return geometry.HermitianMatrixField(
            self.domain, pack_to_matrices(self.entry_pack(), self.domain.n)
        )


@dataclass
class ComplexVolume:
    """Z = integral of det(g^{-1} w_chi + i I) and its argument."""

    value: complex
    theta0: float

    @property
    def cot_theta0(self):
        """Re Z / Im Z; exact cot of the argument, no trig round trip."""
        return self.value.real / self.value.imag


def _det_stack(M):
    """Determinant of stacked (..., n, n) complex matrices, n <= 3."""
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    return (
        M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
        - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
        + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
    )


def pointwise_top_wedge(A, g=None):
    """det(g^{-1} A + i I) for Hermitian A; the ratio (a + i w)^n / w^n.

    Accepts a single (n, n) matrix or a stacked (..., n, n) field; the
    modulus is prod_j sqrt(1 + lam_j^2) and the imaginary part is that
    modulus times sin(theta).
    """
    A = np.asarray(A, dtype=np.complex128)
    single = A.ndim == 2
    n = A.shape[-1]
    stack = A.reshape(-1, n, n)
    linv = None
    if g is not None:
        g = np.asarray(g, dtype=np.complex128)
        if not np.array_equal(g, np.eye(n)):
            linv = np.linalg.inv(np.linalg.cholesky(g))
    re, im = det_plus_i(matrices_to_pack(stack), n, linv)
    out = re + 1j * im
    if single:
        return complex(out[0])
    return out.reshape(A.shape[:-2])


def theta_zero(chi):
    """Complex volume Z and theta_0 = Arg Z, normalized into (0, 2 pi).

    Raises NotSupercritical when theta_0 is not strictly inside (0, pi);
    the flow is only defined in the supercritical regime.
    """
    d = chi.domain
    re, im = det_plus_i(chi.entry_pack(), d.n, d.linv)
    Z = complex(integrate_values(d, re), integrate_values(d, im))
    t = float(np.arctan2(Z.imag, Z.real))
    if t <= 0.0:
        t += 2.0 * np.pi
    if not 0.0 < t < np.pi:
        raise NotSupercritical(
            f"theta_0 = {t:.6f} is outside (0, pi); Z = {Z:.6g}"
        )
    return ComplexVolume(value=Z, theta0=t)


_VANDERMONDE_INV = {
    n: np.linalg.inv(np.vander(np.arange(n + 1.0), increasing=True))
    for n in (1, 2, 3)
}


def _mixed_coefficients(X, Y, n):
    """Coefficients c_i of det(s X + t Y) = sum_i c_i s^i t^{n-i}.

    X, Y stacked (P, n, n).  Evaluated at t = 1, s = 0..n and solved with
    the precomputed inverse Vandermonde (exact for degree-n polynomials).
    """
    D = np.stack([_det_stack(s * X + Y) for s in range(n + 1)])
    return _VANDERMONDE_INV[n] @ D


def mixed_wedge_ratio(A, B, g=None, i=0):
    """Pointwise ratio of (a + i w)^i wedge (b + i w)^{n-i} to w^n.

    A and B are Hermitian matrices (or stacked fields) of the two forms;
    internally A_c = A + i g, B_c = B + i g, and the answer is
    c_i / binom(n, i) from det(s g^{-1}A_c + t g^{-1}B_c).  For A = B it
    reduces to det(g^{-1}A_c) for every i.
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    single = A.ndim == 2 and B.ndim == 2
    n = A.shape[-1]
    if not 0 <= i <= n:
        raise ValueError(f"index i must lie in 0..{n}")
    A, B = np.broadcast_arrays(A.reshape(-1, n, n), B.reshape(-1, n, n))
    if g is None:
        g = np.eye(n)
    g = np.asarray(g, dtype=np.complex128)
    ginv = np.linalg.inv(g)
    X = np.einsum("ab,pbc->pac", ginv, A + 1j * g)
    Y = np.einsum("ab,pbc->pac", ginv, B + 1j * g)
    c = _mixed_coefficients(X, Y, n)
    out = c[i] / comb(n, i)
    if single:
        return complex(out[0])
    return out


def _cy_from_packs(domain, v_values, A_pack, B_pack):
    """Calabi-Yau functional from packed realizations (fast path)."""
    n = domain.n
    g = domain.metric
    ginv = domain.metric_inv
    A = pack_to_matrices(A_pack, n) + 1j * g
    B = pack_to_matrices(B_pack, n) + 1j * g
    if not domain.is_identity_metric:
        A = np.einsum("ab,pbc->pac", ginv, A)
        B = np.einsum("ab,pbc->pac", ginv, B)
    c = _mixed_coefficients(A, B, n)
    weights = np.array([1.0 / comb(n, i) for i in range(n + 1)])
    total = (weights[:, None] * c).sum(axis=0)
    return complex(integrate_values(domain, v_values * total)) / (n + 1)


def calabi_yau(v, chi):
    """CY(v) = 1/(n+1) sum_i integral v * ratio_i(w_{chi_v}, w_chi).

    CY(0) = 0; for constant v = c it equals c * Z; and its first variation
    is the pointwise top wedge, which is what the conservation check uses.
    """
    d = chi.domain
    if v.domain is not d:
        raise ValueError("field and form live on different domains")
    B_pack = chi.entry_pack()
    A_pack = hessian_pack(d, v.values)
    A_pack += B_pack
    return _cy_from_packs(d, v.values, A_pack, B_pack)


def im_cy(v, chi):
    """Imaginary part of the Calabi-Yau functional."""
    return calabi_yau(v, chi).imag
