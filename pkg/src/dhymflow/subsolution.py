"""Certification of initial data as a subsolution.

A candidate potential certifies when A_0 < theta_0 and B_0 < pi, where
A_0 takes, over the grid and over each dropped index j, the largest of
the partial phase sums sum_{i != j} arccot(lam_i), and B_0 is the grid
maximum of the full phase.  The parabolic constants are

    delta = min( (pi - B_0)/(2n), (theta_0 - A_0)/(2(n+2)) )
    K     = 2n ( delta + max|lam| + cot(theta_0) - cot((pi + B_0)/2)
                 + cot( n (theta_0 - A_0) / (2(n+1)) ) )

kept exactly in this form, including the n+2 vs n+1 asymmetry between
the two displays.  sample_S_delta probes the defining set

    S_delta = { (mu, tau) : cot(theta(lam + mu)) + tau = cot(theta_0),
                mu_i > -delta, tau > -delta }

(steady candidate, so the time-derivative term is zero) and confirms by
sampling that it stays inside the ball of radius K.
"""

import math
from dataclasses import dataclass

import numpy as np

from .phase import arccot, spectrum_field, theta_of

__all__ = [
    "SubsolutionCertificate",
    "SDeltaReport",
    "compute_A0",
    "compute_B0",
    "certify",
    "sample_S_delta",
]


@dataclass
class SubsolutionCertificate:
    A0: float
    B0: float
    theta0: float
    passes: bool
    delta: float
    K: float

    @property
    def margin_A(self):
        return self.theta0 - self.A0

    @property
    def margin_B(self):
        return math.pi - self.B0

    def summary_items(self):
        return [
            ("certificate_passes", self.passes),
            ("A0", self.A0),
            ("B0", self.B0),
            ("theta0", self.theta0),
            ("delta", self.delta),
            ("K", self.K),
            ("margin_A", self.margin_A),
            ("margin_B", self.margin_B),
        ]


def _spectra_of(chi_u):
    return spectrum_field(chi_u.domain, chi_u.entry_pack())


def compute_A0(chi_u):
    """max over the grid, max over j, of sum_{i != j} arccot(lam_i).

    The inner max is taken explicitly over every dropped index j rather
    than assuming which term wins.  Empty sum for n = 1, so A_0 = 0.
    """
    if chi_u.domain.n == 1:
        return 0.0
    spec = _spectra_of(chi_u)
    terms = arccot(spec.lam)
    partial = spec.theta[:, None] - terms
    return float(partial.max())


def compute_B0(chi_u):
    """max over the grid of theta(chi_u)."""
    return _spectra_of(chi_u).theta_max


def certify(chi_u, theta0):
    """Build the subsolution certificate for a steady candidate.

    delta and K follow the closed forms in the module docstring and are
    NaN when certification fails (their defining expressions lose
    meaning once theta_0 - A_0 <= 0 or B_0 >= pi).
    """
    if not 0.0 < theta0 < math.pi:
        raise ValueError("theta0 must lie in (0, pi)")
    n = chi_u.domain.n
    spec = _spectra_of(chi_u)
    A0 = compute_A0(chi_u)
    B0 = spec.theta_max
    passes = A0 < theta0 and B0 < math.pi
    delta = K = float("nan")
    if passes:
        delta = min((math.pi - B0) / (2 * n), (theta0 - A0) / (2 * (n + 2)))
        max_abs_lam = spec.max_abs_lambda()
        K = 2 * n * (
            delta
            + max_abs_lam
            + 1.0 / math.tan(theta0)
            - 1.0 / math.tan((math.pi + B0) / 2.0)
            + 1.0 / math.tan(n * (theta0 - A0) / (2.0 * (n + 1)))
        )
    return SubsolutionCertificate(
        A0=A0, B0=B0, theta0=theta0, passes=passes, delta=delta, K=K
    )


@dataclass
class SDeltaReport:
    count: int
    solvable: int
    members: int
    violations: int
    max_norm: float
    K: float
    worst: tuple | None

    @property
    def passed(self):
        return self.violations == 0


def sample_S_delta(lambda_ubar, theta0, delta, K, count, seed=0, mu_hi=None):
    """Monte-Carlo boundedness check of S_delta for a constant candidate.

    Draws mu uniformly from (-delta, mu_hi]^n (mu_hi defaults to 2K so
    the sampling box strictly contains the claimed ball), solves the
    constraint for tau, discards draws whose shifted phase leaves (0, pi)
    (the cotangent branch makes the constraint unsolvable there) or whose
    tau fails tau > -delta, and records any member with |mu| + |tau| > K.
    """
    lam = np.asarray(lambda_ubar, dtype=np.float64)
    n = lam.size
    if mu_hi is None:
        mu_hi = 2.0 * K
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-delta, mu_hi, size=(count, n))
    shifted = lam[None, :] + mu
    theta = theta_of(shifted)
    solvable = (theta > 0.0) & (theta < math.pi) & (np.abs(np.sin(theta)) > 1e-12)
    prod = np.prod(shifted + 1j, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = prod.real / prod.imag
    cot0 = 1.0 / math.tan(theta0)
    tau = cot0 - cot
    member = solvable & (tau > -delta)
    norms = np.linalg.norm(mu, axis=1) + np.abs(tau)
    member_norms = norms[member]
    violating = member & (norms > K)
    worst = None
    if member.any():
        idx = int(np.argmax(np.where(member, norms, -np.inf)))
        worst = (mu[idx].copy(), float(tau[idx]), float(norms[idx]))
    return SDeltaReport(
        count=count,
        solvable=int(solvable.sum()),
        members=int(member.sum()),
        violations=int(violating.sum()),
        max_norm=float(member_norms.max()) if member_norms.size else 0.0,
        K=K,
        worst=worst,
    )
