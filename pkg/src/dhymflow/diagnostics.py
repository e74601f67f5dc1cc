"""Per-step invariant recording and the a priori estimates as checks.

A DiagnosticsSeries is a plain table, one row per recorded step, with the
fixed CSV schema

    t,max_ut,min_ut,osc_ut,theta_min,theta_max,lambda_min_global,
    im_cy,re_cy,sup_u,inf_u_minus_usub,grad_norm_max,hess_norm_max,dt_used

written with 17 significant digits so every check is replayable from the
file alone.  Checks come in two kinds: estimates with computable
constants (velocity max principle, phase confinement, eigenvalue bound,
conservation of Im CY) are asserted against their stated tolerances;
estimates whose constants the source analysis leaves abstract (Harnack
constant, decay rate, the C0/C1/C2 suprema) are fitted or reported, and
only their structure (boundedness, exponential shape) is checked.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .functionals import _cy_from_packs, calabi_yau
from .geometry import ScalarField, hessian_pack, holomorphic_gradient_norm

__all__ = [
    "COLUMNS",
    "DiagnosticsSeries",
    "CheckReport",
    "DecayFit",
    "record",
    "check_max_principle",
    "check_theta_bounds",
    "check_lambda_min_bound",
    "check_im_cy",
    "im_cy_drift",
    "fit_decay_rate",
    "check_harnack",
    "harnack_lower_bound",
    "check_suprema_settled",
    "lambda_min_constant",
]

COLUMNS = (
    "t",
    "max_ut",
    "min_ut",
    "osc_ut",
    "theta_min",
    "theta_max",
    "lambda_min_global",
    "im_cy",
    "re_cy",
    "sup_u",
    "inf_u_minus_usub",
    "grad_norm_max",
    "hess_norm_max",
    "dt_used",
)


class DiagnosticsSeries:
    """Time series of monitored invariants; append-only."""

    def __init__(self):
        self.rows = []

    def append(self, row):
        if self.rows and row["t"] <= self.rows[-1]["t"]:
            raise ValueError("diagnostics rows must have strictly increasing t")
        if not all(np.isfinite(row[c]) for c in COLUMNS):
            from .errors import NonFinite

            raise NonFinite("non-finite diagnostics row")
        self.rows.append({c: float(row[c]) for c in COLUMNS})

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join("%.17g" % r[c] for c in COLUMNS) + "\n")

    @classmethod
    def from_csv(cls, path):
        series = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames) != COLUMNS:
                raise ValueError("unexpected diagnostics CSV header")
            for rec in reader:
                series.rows.append({c: float(rec[c]) for c in COLUMNS})
        return series


def _velocity_from_spectra(spectra, kind_code, theta0, cot_theta0):
    if kind_code == 0:
        return spectra.cot_theta - cot_theta0
    dev = theta0 - spectra.theta
    return dev if kind_code == 1 else np.tan(dev)


def _hess_frobenius_max(domain, hess_pack_arr):
    """max over the grid of the g-frame Frobenius norm of d dbar u."""
    from ._kernels_py import matrices_to_pack, pack_to_matrices

    n = domain.n
    if domain.linv is None:
        b = hess_pack_arr
    else:
        H = pack_to_matrices(hess_pack_arr, n)
        B = np.einsum("ab,pbc,dc->pad", domain.linv, H,
                      np.conj(domain.linv), optimize=True)
        b = matrices_to_pack(B)
    sq = sum(b[j] ** 2 for j in range(n))
    for k in range(n * (n - 1) // 2):
        sq = sq + 2.0 * (b[n + 2 * k] ** 2 + b[n + 2 * k + 1] ** 2)
    return float(np.sqrt(sq.max()))


def record(series, state, chi, usub, kind_code=0, velocity=None,
           dt_used=0.0, w_pack=None, hess_pack_arr=None):
    """Append one row for the current state; returns the row.

    The velocity and packed realizations can be passed in from a running
    flow to avoid recomputation; when omitted everything is rebuilt from
    the state, which is what makes rows recomputable from snapshots.
    """
    d = state.u.domain
    u = state.u.values
    if hess_pack_arr is None:
        hess_pack_arr = hessian_pack(d, u)
    if w_pack is None:
        w_pack = hess_pack_arr + chi.entry_pack()
    spectra = state.spectra
    if velocity is None:
        cot0 = getattr(state, "cot_theta0", None)
        if cot0 is None:
            cot0 = 1.0 / math.tan(state.theta0)
        velocity = _velocity_from_spectra(spectra, kind_code,
                                          state.theta0, cot0)
    cy = _cy_from_packs(d, u, w_pack, chi.entry_pack())
    grad2 = holomorphic_gradient_norm(state.u).values
    row = {
        "t": state.t,
        "max_ut": float(velocity.max()),
        "min_ut": float(velocity.min()),
        "osc_ut": float(velocity.max() - velocity.min()),
        "theta_min": spectra.theta_min,
        "theta_max": spectra.theta_max,
        "lambda_min_global": spectra.lambda_min,
        "im_cy": cy.imag,
        "re_cy": cy.real,
        "sup_u": float(u.max()),
        "inf_u_minus_usub": float((u - usub.values).min()),
        "grad_norm_max": float(np.sqrt(grad2.max())),
        "hess_norm_max": _hess_frobenius_max(d, hess_pack_arr),
        "dt_used": dt_used,
    }
    series.append(row)
    return row


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    details: dict = field(default_factory=dict)

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"{self.name}: {status} (worst margin {self.worst:.3e})"


def check_max_principle(series, tol_scale=1e-9):
    """max u_t non-increasing, min u_t non-decreasing, tol 1e-9*(1+t)."""
    t = series.column("t")
    mx, mn = series.column("max_ut"), series.column("min_ut")
    tol = tol_scale * (1.0 + t)
    up = mx - (mx[0] + tol)
    dn = (mn[0] - tol) - mn
    worst = float(max(up.max(), dn.max()))
    return CheckReport("max_principle", worst <= 0.0, worst,
                       {"max_excess": float(up.max()),
                        "min_deficit": float(dn.max())})


def check_theta_bounds(series, theta_min_init, B0, tol=1e-8):
    """Phase confinement: theta_min_init <= theta(x,t) <= B0 throughout."""
    lo = series.column("theta_min")
    hi = series.column("theta_max")
    worst = float(max((theta_min_init - tol - lo).max(),
                      (hi - B0 - tol).max()))
    return CheckReport("theta_bounds", worst <= 0.0, worst,
                       {"theta_min_init": theta_min_init, "B0": B0})


def lambda_min_constant(B0, theta_min_init, n):
    """A1 = |cot B0| + |cot(theta_min_init / n)|."""
    return abs(1.0 / math.tan(B0)) + abs(1.0 / math.tan(theta_min_init / n))


def check_lambda_min_bound(series, A1, tol=1e-8):
    """|smallest eigenvalue| stays within A1 everywhere along the run."""
    lam = series.column("lambda_min_global")
    worst = float((np.abs(lam) - A1 - tol).max())
    return CheckReport("lambda_min_bound", worst <= 0.0, worst, {"A1": A1})


def im_cy_drift(series):
    """Relative drift max_t |Im CY(t) - Im CY(0)| / (1 + |Im CY(0)|)."""
    im = series.column("im_cy")
    return float(np.abs(im - im[0]).max() / (1.0 + abs(im[0])))


def check_im_cy(series, tol=1e-6):
    """Conservation of Im CY; meaningful for the cot-theta flow only."""
    drift = im_cy_drift(series)
    return CheckReport("im_cy_conservation", drift <= tol, drift - tol,
                       {"relative_drift": drift, "tol": tol})


@dataclass
class DecayFit:
    amplitude: float
    rate: float
    r_squared: float
    points: int


def fit_decay_rate(series, window=0.5):
    """Least-squares fit of log osc_ut vs t on the trailing window.

    ``window`` is the trailing fraction of the run's time span to use.
    Returns amplitude (extrapolated to t=0), decay rate, and r^2.
    """
    t = series.column("t")
    osc = series.column("osc_ut")
    if len(t) < 3:
        return DecayFit(math.nan, math.nan, math.nan, 0)
    t_cut = t[-1] - window * (t[-1] - t[0])
    mask = (t >= t_cut) & (osc > 0.0) & np.isfinite(osc)
    if mask.sum() < 3:
        return DecayFit(math.nan, math.nan, math.nan, int(mask.sum()))
    tt, yy = t[mask], np.log(osc[mask])
    slope, intercept = np.polyfit(tt, yy, 1)
    resid = yy - (slope * tt + intercept)
    sstot = float(((yy - yy.mean()) ** 2).sum())
    ssres = float((resid**2).sum())
    r2 = 1.0 if sstot <= 1e-300 else 1.0 - ssres / sstot
    return DecayFit(float(np.exp(intercept)), float(-slope), float(r2),
                    int(mask.sum()))


def check_harnack(series, eta0, c0):
    """Smallest empirical C with sup u <= C * (1 - inf(u - usub)).

    Reported, never asserted: the analytic constant is not computable.
    """
    sup_u = float(series.column("sup_u").max())
    inf_dev = float(series.column("inf_u_minus_usub").min())
    denom = -inf_dev + 1.0
    C = math.inf if denom <= 0.0 else max(sup_u, 0.0) / denom
    return CheckReport("harnack_constant", math.isfinite(C), C,
                       {"C_empirical": C, "eta0": eta0, "c0": c0,
                        "sup_u": sup_u, "inf_u_minus_usub": inf_dev})


def harnack_lower_bound(u, usub, chi, B0, s_values=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Pointwise bound Im det(g^{-1} w_{s u + (1-s) usub} + iI) >= 2 c0.

    eta0 = B0/6 + 5 pi/6 and 2 c0 = sin(eta0).  Returns the worst margin
    over the sampled interpolation parameters.
    """
    from ._kernels_py import det_plus_i

    d = chi.domain
    eta0 = B0 / 6.0 + 5.0 * math.pi / 6.0
    bound = math.sin(eta0)
    chi_pack = chi.entry_pack()
    margins = {}
    for s in s_values:
        mix = s * u.values + (1.0 - s) * usub.values
        pack = hessian_pack(d, mix)
        pack += chi_pack
        _, im = det_plus_i(pack, d.n, d.linv)
        margins[s] = float(im.min() - bound)
    worst = min(margins.values())
    return CheckReport("harnack_lower_bound", worst >= -1e-12, worst,
                       {"eta0": eta0, "two_c0": bound, "margins": margins})


def check_suprema_settled(series, rel=0.01):
    """No late blow-up: final-quarter suprema within 1% of the run max.

    Applies to M0 = sup|u| (computed from sup_u and inf(u - usub); exact
    when usub = 0, as in the shipped scenarios), M1 = sup grad norm and
    M2 = sup Hessian norm.
    """
    t = series.column("t")
    m0 = np.maximum(np.abs(series.column("sup_u")),
                    np.abs(series.column("inf_u_minus_usub")))
    m1 = series.column("grad_norm_max")
    m2 = series.column("hess_norm_max")
    t_cut = t[0] + 0.75 * (t[-1] - t[0])
    tail = t >= t_cut
    worst = 0.0
    values = {}
    for name, col in (("M0", m0), ("M1", m1), ("M2", m2)):
        M = float(col.max())
        values[name] = M
        if M <= 0.0:
            continue
        dev = float(np.abs(col[tail] - M).max() / M)
        worst = max(worst, dev - rel)
    return CheckReport("suprema_settled", worst <= 0.0, worst, values)
