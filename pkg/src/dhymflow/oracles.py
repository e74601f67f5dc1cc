"""Independent oracles that gate the main build.

Everything here is implementable without the flow engine: finite
differences in the perturbation parameter for the linearization, the
exact mode-by-mode solution of the n=1 flow (which is linear because
cot(theta) = lambda there), grid-refinement comparisons driven through a
caller-supplied runner, and rejection sampling for the concavity and
cone-inequality statements.  All sampling is deterministic under a fixed
seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import phase
from .functionals import ClosedForm
from .geometry import ScalarField, build_domain, hessian_pack

__all__ = [
    "fd_linearization_check",
    "FdLinearizationReport",
    "HeatFlowOracle",
    "heat_flow_oracle",
    "refinement_study",
    "restrict_to_common_grid",
    "concavity_sampler",
    "ConcavityReport",
]


@dataclass
class FdLinearizationReport:
    s_list: tuple
    errors: tuple
    slope: float
    passed: bool


def fd_linearization_check(u, v, chi, s_list=(1e-2, 1e-3, 1e-4),
                           slope_tol=0.1, floor=1e-12):
    """Central differences of cot(theta(chi_{u+s v})) vs the linearization.

    Compares (cot theta(u+sv) - cot theta(u-sv)) / (2s) against the
    pointwise contraction tr(F . hess v) and Richardson-fits the order of
    convergence in s, which must be 2.  When both sides agree to the
    round-off floor for every s (the n=1 linear case) the slope is
    meaningless and the check passes on the floor criterion instead.
    """
    d = chi.domain
    chi_pack = chi.entry_pack()
    base_pack = hessian_pack(d, u.values) + chi_pack
    spectra = phase.spectrum_field(d, base_pack)
    F = spectra.F_field()
    V = _hess_matrices(d, v.values)
    rhs = np.einsum("pij,pji->p", F, V).real

    v_pack = hessian_pack(d, v.values)
    errors = []
    for s in s_list:
        plus = phase.spectrum_field(d, base_pack + s * v_pack).cot_theta
        minus = phase.spectrum_field(d, base_pack - s * v_pack).cot_theta
        lhs = (plus - minus) / (2.0 * s)
        errors.append(float(np.abs(lhs - rhs).max()))
    errors = tuple(errors)
    if max(errors) <= floor:
        return FdLinearizationReport(tuple(s_list), errors, math.nan, True)
    logs, loge = np.log(np.asarray(s_list)), np.log(np.asarray(errors))
    slope = float(np.polyfit(logs, loge, 1)[0])
    return FdLinearizationReport(tuple(s_list), errors, slope,
                                 abs(slope - 2.0) <= slope_tol)


def _hess_matrices(domain, values):
    from ._kernels_py import pack_to_matrices

    return pack_to_matrices(hessian_pack(domain, values), domain.n)


class HeatFlowOracle:
    """Exact trajectory of the n=1 flow for chi_11 = 1 + a cos(2 pi x1).

    The n=1 velocity is chi_11 + u_11bar - cot(theta_0) with theta_0 =
    pi/4 here, i.e. linear heat flow with source a cos(2 pi x1).  Every
    Fourier mode obeys an independent scalar ODE, so the solution is
    closed form; the fundamental mode decays like exp(-pi^2 t) toward
    the stationary profile u_11bar = -a cos(2 pi x1).
    """

    def __init__(self, a, N):
        if not abs(a) < 1.0:
            raise ValueError("need |a| < 1 to keep the phase positive")
        self.a = a
        self.domain = build_domain(1, N)
        d = self.domain
        phi = ScalarField(
            d, (-a / math.pi**2) * np.cos(2 * math.pi * d.coords[0]).reshape(-1)
        )
        self.chi = ClosedForm(d, np.array([[1.0]]), phi)
        self.theta0 = math.pi / 4.0
        self.cot_theta0 = 1.0
        self.rate = math.pi**2  # decay of the fundamental mode of Delta/4
        # source spectrum: chi_11 - cot(theta_0) = a cos(2 pi x1)
        from .backend import fftn

        src = self.a * np.cos(2 * math.pi * d.coords[0])
        self._src_hat = fftn(src)
        self._mu = -d._hess_pair_multipliers[0]  # decay rates, >= 0

    def exact_values(self, t, u0=None):
        """Grid values of the exact solution at time t."""
        from .backend import fftn, ifftn

        d = self.domain
        u0_hat = np.zeros(d.shape, dtype=np.complex128) if u0 is None \
            else fftn(u0.values.reshape(d.shape))
        mu = self._mu
        decay = np.exp(-mu * t)
        with np.errstate(divide="ignore", invalid="ignore"):
            forced = np.where(mu > 0.0, (1.0 - decay) / np.where(mu > 0, mu, 1.0),
                              t)
        u_hat = decay * u0_hat + forced * self._src_hat
        return ifftn(u_hat).real.reshape(-1)

    def exact_state(self, t, u0=None):
        return ScalarField(self.domain, self.exact_values(t, u0))

    def mode_amplitude(self, t, amplitude0):
        """Fundamental-mode amplitude after time t."""
        return amplitude0 * math.exp(-self.rate * t)

    def stationary_values(self):
        d = self.domain
        return (self.a / math.pi**2) * np.cos(
            2 * math.pi * d.coords[0]
        ).reshape(-1)


def heat_flow_oracle(a, N):
    return HeatFlowOracle(a, N)


def restrict_to_common_grid(values, N, n, N_common):
    """Subsample a flat field to the common grid of stride N//N_common."""
    if N % N_common:
        raise ValueError("N_common must divide N")
    stride = N // N_common
    grid = values.reshape((N,) * (2 * n))
    sl = (slice(None, None, stride),) * (2 * n)
    return grid[sl].reshape(-1)


@dataclass
class RefinementRow:
    N: int
    theta0: float
    drift: float
    diff_prev: float


def refinement_study(run_fn, N_list):
    """Run a scenario at several resolutions and tabulate refinement.

    ``run_fn(N)`` must return a dict with keys ``theta0``, ``drift`` and
    ``final`` (flat values, n implied by length); consecutive final
    states are compared on the gcd common subgrid.  The oracle module
    stays independent of the flow engine by taking the runner as input.
    """
    rows = []
    prev = None
    for N in N_list:
        out = run_fn(N)
        final = np.asarray(out["final"])
        n = round(math.log(final.size) / math.log(N) / 2)
        diff = math.nan
        if prev is not None:
            N_prev, final_prev = prev
            N_common = math.gcd(N, N_prev)
            a = restrict_to_common_grid(final, N, n, N_common)
            b = restrict_to_common_grid(final_prev, N_prev, n, N_common)
            a = a - a.mean()
            b = b - b.mean()
            diff = float(np.abs(a - b).max())
        rows.append(RefinementRow(N=N, theta0=float(out["theta0"]),
                                  drift=float(out["drift"]), diff_prev=diff))
        prev = (N, final)
    return rows


@dataclass
class ConcavityReport:
    count: int
    violations: int
    max_eigenvalue: float
    fd_max_dev: float
    passed: bool


def sample_gamma_tau(n, tau, count, seed, a_min=1e-3):
    """Rejection-sample lambda in Gamma_tau via uniform arccot angles."""
    rng = np.random.default_rng(seed)
    out = np.empty((count, n))
    got = 0
    while got < count:
        a = rng.uniform(a_min, math.pi - a_min, size=(4 * count, n))
        keep = a.sum(axis=1) < tau
        take = a[keep][: count - got]
        out[got : got + take.shape[0]] = 1.0 / np.tan(take)
        got += take.shape[0]
    return out


def concavity_sampler(n, tau, count, seed=0, eig_tol=1e-9, fd_subset=40,
                      fd_step=1e-3):
    """Sampled concavity of cot(theta) on Gamma_tau.

    Asserts the largest eigenvalue of the cot-theta Hessian is <= eig_tol
    on every sample and cross-checks the closed-form Hessian against
    central finite differences on a subset.
    """
    lam = sample_gamma_tau(n, tau, count, seed)
    max_eig = -math.inf
    violations = 0
    for row in lam:
        H = phase.cot_theta_hessian(np.sort(row)[::-1])
        top = float(np.linalg.eigvalsh(H).max())
        max_eig = max(max_eig, top)
        if top > eig_tol:
            violations += 1
    fd_dev = 0.0
    for row in lam[: min(fd_subset, count)]:
        H = phase.cot_theta_hessian(row)
        H_fd = _fd_hessian(phase.cot_theta, row, fd_step)
        scale = max(1.0, float(np.abs(H).max()))
        fd_dev = max(fd_dev, float(np.abs(H - H_fd).max()) / scale)
    return ConcavityReport(count=count, violations=violations,
                           max_eigenvalue=max_eig, fd_max_dev=fd_dev,
                           passed=violations == 0)


def _fd_hessian(f, x, s):
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = s
            ej = np.zeros(n); ej[j] = s
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                + f(x - ei - ej)
            ) / (4.0 * s * s)
    return 0.5 * (H + H.T)
