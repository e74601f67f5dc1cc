"""Pointwise algebra of the Lagrangian phase operator.

For a Hermitian matrix w and metric g, the eigenvalues lam of w relative
to g determine the phase theta = sum_j arccot(lam_j), with arccot valued
in (0, pi) so that theta ranges over (0, n*pi).  Everything else here is
algebra of that phase: cot(theta) through the product formula

    cot(theta) = Re prod_j(lam_j + i) / Im prod_j(lam_j + i),

the linearization matrix F = csc^2(theta) * (w g^{-1} w + g)^{-1}, the
cone Gamma_tau = {theta(lam) < tau}, and the Hessian of cot(theta(lam))
used for concavity checks.

Scalar entry points accept single points; grid-sized batches go through
the kernel backends (see backend.py).
"""

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import PhaseSingular

__all__ = [
    "arccot",
    "theta_of",
    "cot_theta",
    "eigenvalues_descending",
    "linearization_matrix",
    "in_gamma_tau",
    "structural_inequalities",
    "cot_theta_hessian",
    "PointSpectrum",
    "ConeParams",
    "SpectrumField",
    "spectrum_field",
    "StructuralReport",
]

DEFAULT_THETA_GUARD = 1e-8


def arccot(x):
    """arccot with range (0, pi): pi/2 - arctan(x).  Vectorizes."""
    return np.pi / 2 - np.arctan(x)


def theta_of(lam):
    """theta(lam) = sum_j arccot(lam_j), summed over the last axis."""
    return np.sum(arccot(np.asarray(lam, dtype=np.float64)), axis=-1)


def _det_plus_i(lam):
    prod = np.prod(np.asarray(lam, dtype=np.complex128) + 1j, axis=-1)
    return prod.real, prod.imag


def cot_theta(lam, theta_guard=DEFAULT_THETA_GUARD):
    """cot(theta(lam)) via the product formula; exact lam_1 for n=1.

    Raises PhaseSingular when |sin theta| < sin(theta_guard), i.e. the
    phase came too close to a multiple of pi for the cotangent to mean
    anything numerically.
    """
    re, im = _det_plus_i(lam)
    sin_theta = im / np.hypot(re, im)
    if np.min(np.abs(sin_theta)) < math.sin(theta_guard):
        raise PhaseSingular("theta within theta_guard of a multiple of pi")
    return re / im


def _cholesky_inv(g):
    g = np.asarray(g, dtype=np.complex128)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ValueError("metric g is not positive definite") from None
    return np.linalg.inv(L)


def eigenvalues_descending(A, g=None):
    """Eigenvalues of A relative to g (A v = lam g v), sorted descending.

    A Hermitian, g Hermitian positive definite.  Invariant under the
    congruence A -> U^H A U, g -> U^H g U.  Descending sort with stable
    tie order, so output is deterministic.
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    if np.abs(A - A.conj().T).max() > 1e-10 * max(1.0, np.abs(A).max()):
        raise ValueError("matrix A is not Hermitian")
    linv = None if g is None else _cholesky_inv(g)
    from ._kernels_py import matrices_to_pack

    pack = matrices_to_pack(A.reshape(1, n, n))
    lam, _, _, _, _ = kernels.spectrum_from_entries(pack, n, linv)
    return lam[0]


def linearization_matrix(w, g, theta, theta_guard=DEFAULT_THETA_GUARD):
    """F = csc^2(theta) * (w g^{-1} w + g)^{-1}, Hermitian positive definite.

    In a simultaneous eigenbasis its eigenvalues are csc^2(theta)/(1+lam_i^2).
    """
    if abs(math.sin(theta)) < math.sin(theta_guard):
        raise PhaseSingular("theta within theta_guard of a multiple of pi")
    w = np.asarray(w, dtype=np.complex128)
    g = np.asarray(g, dtype=np.complex128)
    M = w @ np.linalg.inv(g) @ w + g
    F = np.linalg.inv(M) / math.sin(theta) ** 2
    return 0.5 * (F + F.conj().T)


@dataclass(frozen=True)
class ConeParams:
    """The cone Gamma_tau = {lam : theta(lam) < tau}, 0 < tau < pi."""

    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau < np.pi:
            raise ValueError("tau must lie in (0, pi)")


def in_gamma_tau(lam, cone):
    """Strict cone membership: theta(lam) < tau."""
    tau = cone.tau if isinstance(cone, ConeParams) else float(cone)
    return bool(theta_of(lam) < tau)


@dataclass
class StructuralReport:
    """Outcome of the eigenvalue inequalities valid on {theta <= tau}."""

    precondition_ok: bool
    passed: bool
    margins: tuple


def structural_inequalities(lam, tau, tol=1e-12):
    """Check the structure inequalities for theta(lam) <= tau in (0, pi).

    Margins (left minus right) of: lam_{n-1} >= cot(tau/2),
    lam_{n-1} >= |lam_n|, and lam_1 + (n-1) lam_n >= 0.  lam must be
    sorted descending; n >= 2 (the statements are vacuous for n = 1).
    """
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.size
    if n < 2:
        raise ValueError("structural inequalities need n >= 2")
    if np.any(np.diff(lam) > 0):
        raise ValueError("lam must be sorted descending")
    if not 0.0 < tau < np.pi:
        raise ValueError("tau must lie in (0, pi)")
    if theta_of(lam) > tau:
        return StructuralReport(False, False, (np.nan, np.nan, np.nan))
    margins = (
        float(lam[n - 2] - 1.0 / math.tan(tau / 2.0)),
        float(lam[n - 2] - abs(lam[n - 1])),
        float(lam[0] + (n - 1) * lam[n - 1]),
    )
    return StructuralReport(True, all(m >= -tol for m in margins), margins)


def cot_theta_hessian(lam, theta_guard=DEFAULT_THETA_GUARD):
    """Hessian of lam -> cot(theta(lam)); symmetric n x n.

    Negative semidefinite on Gamma_tau for any tau in (0, pi), which is
    the concavity this package verifies by sampling.  Identically zero
    for n = 1 where cot(theta) = lam is linear.
    """
    lam = np.asarray(lam, dtype=np.float64)
    cot = cot_theta(lam, theta_guard)
    csc2 = 1.0 + cot * cot
    denom = 1.0 + lam**2
    H = 2.0 * csc2 * cot / np.outer(denom, denom)
    H[np.diag_indices(lam.size)] -= 2.0 * csc2 * lam / denom**2
    return H


@dataclass
class PointSpectrum:
    """Spectrum data of one grid point."""

    lam: np.ndarray
    theta: float
    cot_theta: float
    csc2_theta: float
    F: np.ndarray


def _inv_hermitian_stack(M):
    """Closed-form inverse of stacked (P, n, n) Hermitian matrices, n<=3."""
    n = M.shape[-1]
    if n == 1:
        return 1.0 / M
    if n == 2:
        a, d = M[:, 0, 0].real, M[:, 1, 1].real
        b = M[:, 0, 1]
        det = a * d - np.abs(b) ** 2
        out = np.empty_like(M)
        out[:, 0, 0] = d / det
        out[:, 1, 1] = a / det
        out[:, 0, 1] = -b / det
        out[:, 1, 0] = np.conj(out[:, 0, 1])
        return out
    # 3x3 adjugate; the inverse of a Hermitian matrix is Hermitian.
    a, d, f = M[:, 0, 0].real, M[:, 1, 1].real, M[:, 2, 2].real
    b, c, e = M[:, 0, 1], M[:, 0, 2], M[:, 1, 2]
    det = (
        a * (d * f - np.abs(e) ** 2)
        - f * np.abs(b) ** 2
        - d * np.abs(c) ** 2
        + 2.0 * (b * e * np.conj(c)).real
    )
    out = np.empty_like(M)
    out[:, 0, 0] = (d * f - np.abs(e) ** 2) / det
    out[:, 0, 1] = (c * np.conj(e) - b * f) / det
    out[:, 0, 2] = (b * e - c * d) / det
    out[:, 1, 1] = (a * f - np.abs(c) ** 2) / det
    out[:, 1, 2] = (c * np.conj(b) - a * e) / det
    out[:, 2, 2] = (a * d - np.abs(b) ** 2) / det
    out[:, 1, 0] = np.conj(out[:, 0, 1])
    out[:, 2, 0] = np.conj(out[:, 0, 2])
    out[:, 2, 1] = np.conj(out[:, 1, 2])
    return out


class SpectrumField:
    """Struct-of-arrays spectrum cache for a whole grid.

    Holds sorted eigenvalues, theta, cot(theta) and csc^2(theta) per
    point; linearization matrices are assembled on demand since only
    diagnostics and oracles need them.
    """

    def __init__(self, domain, w_pack, lam, theta, cot, csc2, min_sin):
        self.domain = domain
        self._w_pack = w_pack
        self.lam = lam
        self.theta = theta
        self.cot_theta = cot
        self.csc2_theta = csc2
        self.min_sin = min_sin

    @property
    def theta_min(self):
        return float(self.theta.min())

    @property
    def theta_max(self):
        return float(self.theta.max())

    @property
    def lambda_min(self):
        return float(self.lam[:, -1].min())

    def max_abs_lambda(self):
        return float(np.abs(self.lam).max())

    def max_F_eigenvalue(self):
        """Largest eigenvalue of F over the grid: csc^2/(1 + min_i lam_i^2)."""
        closest = (self.lam**2).min(axis=1)
        return float((self.csc2_theta / (1.0 + closest)).max())

    def F_field(self, prefactor=None):
        """Stacked (P, n, n) linearization matrices.

        F = csc^2(theta) * (w g^{-1} w + g)^{-1}; with linv the inverse
        Cholesky factor of g this is csc^2 * linv^H (B^2 + I)^{-1} linv.
        ``prefactor`` replaces csc^2(theta) when given (the competitor
        flows have the same operator up to a scalar field).
        """
        from ._kernels_py import pack_to_matrices

        d = self.domain
        n = d.n
        W = pack_to_matrices(self._w_pack, n)
        linv = d.linv
        if linv is None:
            B = W
        else:
            B = np.einsum("ab,pbc,dc->pad", linv, W, np.conj(linv),
                          optimize=True)
        M = B @ B + np.eye(n)
        inv = _inv_hermitian_stack(M)
        if linv is not None:
            inv = np.einsum("ba,pbc,cd->pad", np.conj(linv), inv, linv,
                            optimize=True)
        scale = self.csc2_theta if prefactor is None else prefactor
        return inv * scale[:, None, None]

    def point(self, idx):
        """PointSpectrum view of one grid point (assembles its F)."""
        from ._kernels_py import pack_to_matrices

        W = pack_to_matrices(self._w_pack[:, idx : idx + 1], self.domain.n)[0]
        F = linearization_matrix(W, self.domain.metric, float(self.theta[idx]))
        return PointSpectrum(
            lam=self.lam[idx].copy(),
            theta=float(self.theta[idx]),
            cot_theta=float(self.cot_theta[idx]),
            csc2_theta=float(self.csc2_theta[idx]),
            F=F,
        )


def spectrum_field(domain, w_pack):
    """Batched spectrum of a packed Hermitian matrix field."""
    lam, theta, cot, csc2, min_sin = kernels.spectrum_from_entries(
        np.ascontiguousarray(w_pack), domain.n, domain.linv
    )
    return SpectrumField(domain, w_pack, lam, theta, cot, csc2, min_sin)
