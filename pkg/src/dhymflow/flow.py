"""Time evolution of the potential under three phase flows.

Flow kinds (velocities, all vanishing exactly when theta = theta_0):

    DHYM   u_t = cot(theta(chi_u)) - cot(theta_0)
    LBMCF  u_t = theta_0 - theta(chi_u)
    TLPF   u_t = tan(theta_0 - theta(chi_u))

Steppers: explicit Euler, classical RK4 (the default; the conservation
checks need its accuracy), and a semi-implicit scheme that freezes the
grid-averaged linearization into a constant-coefficient operator and
inverts it diagonally in Fourier space, buying roughly an order of
magnitude in step size for stiff long-horizon runs.

The explicit step size is dt = dt_safety / (Lambda_F * kappa_max), with
Lambda_F the largest linearization eigenvalue over the grid and
kappa_max = sum over real axes of (pi N)^2 times the inverse-metric
diagonal factor: deliberately conservative (the Fourier symbol bound
ignores the 1/4 from d dbar, and RK4's stability interval is wider than
Euler's).

Inside the stepping loop the pointwise guards run on kernel aggregates
(min sin(theta), the TLPF branch deviation, NaN detection, Lambda_F);
the full per-point spectrum cache is materialized whenever a FlowState
is exposed: on every recorded row, on the final state, and in the
single-step API.
"""

import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backend import fftn, ifftn, kernels
from .diagnostics import DiagnosticsSeries, record
from .errors import NonFinite, PhaseSingular, TlpfRangeViolation
from .functionals import theta_zero
from .geometry import ScalarField, hessian_pack, write_snapshot
from .phase import spectrum_field

__all__ = [
    "FlowKind",
    "Stepper",
    "FlowConfig",
    "FlowState",
    "FlowResult",
    "make_state",
    "velocity",
    "stable_dt",
    "kappa_max",
    "step",
    "run",
]


class FlowKind(str, Enum):
    DHYM = "dhym"
    LBMCF = "lbmcf"
    TLPF = "tlpf"


class Stepper(str, Enum):
    EXPLICIT_EULER = "euler"
    RK4 = "rk4"
    SEMI_IMPLICIT = "semi-implicit"


_KIND_CODE = {FlowKind.DHYM: 0, FlowKind.LBMCF: 1, FlowKind.TLPF: 2}
TLPF_RANGE_MARGIN = 1e-6


@dataclass
class FlowConfig:
    kind: FlowKind = FlowKind.DHYM
    stepper: Stepper = Stepper.RK4
    dt_safety: float = 1.0
    tol_stationary: float = 1e-8
    max_time: float = 25.0
    snapshot_every: float = 0.0
    theta_guard: float = 1e-8
    record_every: float = 0.0  # 0 = auto cadence (~256 rows per run)
    si_boost: float = 10.0  # semi-implicit dt multiplier over stable_dt
    mean_F_refresh: int = 20  # steps between preconditioner refreshes
    max_steps: int = 0  # 0 = no step cap

    def __post_init__(self):
        self.kind = FlowKind(self.kind)
        self.stepper = Stepper(self.stepper)
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.tol_stationary < 0.0:
            raise ValueError("tol_stationary must be >= 0")
        if self.max_time <= 0.0:
            raise ValueError("max_time must be positive")
        if self.theta_guard <= 0.0:
            raise ValueError("theta_guard must be positive")
        if self.si_boost < 1.0:
            raise ValueError("si_boost must be >= 1")


@dataclass
class FlowState:
    """The evolving potential with its cached pointwise spectra."""

    u: ScalarField
    t: float
    spectra: object
    theta0: float
    chi: object
    cot_theta0: float = None

    def __post_init__(self):
        if self.cot_theta0 is None:
            self.cot_theta0 = 1.0 / math.tan(self.theta0)


@dataclass
class FlowResult:
    state: FlowState
    series: DiagnosticsSeries
    converged: bool
    reason: str
    steps: int
    wall_time: float
    volume: object = None

    def __iter__(self):
        return iter((self.state, self.series))


def kappa_max(domain):
    """Largest Fourier symbol of the flat principal part (safety bound)."""
    diag = np.real(np.diag(domain.metric_inv)).sum()
    return 2.0 * (math.pi * domain.N) ** 2 * float(diag)


def stable_dt(state, dt_safety=1.0):
    """dt = dt_safety / (Lambda_F * kappa_max); quarters when N doubles."""
    lam_F = state.spectra.max_F_eigenvalue()
    return dt_safety / (lam_F * kappa_max(state.u.domain))


class _VolumeView:
    def __init__(self, theta0, cot_theta0):
        self.theta0 = theta0
        self.cot_theta0 = cot_theta0


class _Driver:
    """Owns the per-run buffers and the guarded velocity evaluation."""

    def __init__(self, chi, volume, config):
        self.chi = chi
        self.d = chi.domain
        self.config = config
        self.kind_code = _KIND_CODE[config.kind]
        self.theta0 = volume.theta0
        self.cot0 = volume.cot_theta0
        self.sin_guard = math.sin(config.theta_guard)
        self.chi_pack = chi.entry_pack()
        self.fmax = None  # grid max of the top linearization eigenvalue
        self.sup_vel = None
        self._si_sym = None
        self._si_age = None
        # scratch reused across stage evaluations (never exposed)
        P = self.d.total_points
        m = self.d.n * self.d.n
        self._stage_u = np.empty(P)
        self._stage_pack = np.empty((m, P))
        self._stage_vels = [np.empty(P) for _ in range(3)]

    def velocity_at(self, u_values, want_fmax=False, pack_out=None,
                    vel_out=None):
        """(vel, w_pack) with the stage-level guards applied."""
        w = hessian_pack(self.d, u_values, out=pack_out)
        np.add(w, self.chi_pack, out=w)
        vel, min_sin, max_dev, finite, fmax, sup_abs = \
            kernels.velocity_from_entries(
                w, self.d.n, self.d.linv, self.kind_code, self.cot0,
                self.theta0, want_fmax, vel_out,
            )
        if min_sin < self.sin_guard:
            raise PhaseSingular(
                f"min sin(theta) = {min_sin:.3e} under guard "
                f"{self.sin_guard:.3e}; the discrete flow left its "
                "admissible phase range"
            )
        if self.kind_code == 2 and max_dev >= math.pi / 2 - TLPF_RANGE_MARGIN:
            raise TlpfRangeViolation(
                f"max |theta0 - theta| = {max_dev:.6f} reached the tan branch"
            )
        if not finite:
            raise NonFinite("velocity field contains non-finite values")
        if want_fmax:
            self.fmax = fmax
            self.sup_vel = sup_abs
        return vel, w

    def spectra_for(self, w_pack):
        spectra = spectrum_field(self.d, w_pack)
        self.check_state_phase(spectra)
        return spectra

    def check_state_phase(self, spectra):
        g = self.config.theta_guard
        if spectra.theta_min <= g or spectra.theta_max >= math.pi - g:
            raise PhaseSingular(
                f"theta range [{spectra.theta_min:.6f}, "
                f"{spectra.theta_max:.6f}] left ({g:.1e}, pi - {g:.1e})"
            )

    # steppers ------------------------------------------------------

    def step_euler(self, u, vel, dt):
        return u + dt * vel

    def _stage_eval(self, u, k, coef, slot):
        """Velocity at u + coef * k, through the reusable scratch."""
        np.multiply(k, coef, out=self._stage_u)
        self._stage_u += u
        return self.velocity_at(self._stage_u, pack_out=self._stage_pack,
                                vel_out=self._stage_vels[slot])[0]

    def step_rk4(self, u, vel, dt):
        k1 = vel
        k2 = self._stage_eval(u, k1, 0.5 * dt, 0)
        k3 = self._stage_eval(u, k2, 0.5 * dt, 1)
        k4 = self._stage_eval(u, k3, dt, 2)
        acc = self._stage_u  # stage scratch is free now
        np.add(k2, k3, out=acc)
        acc *= 2.0
        acc += k1
        acc += k4
        return u + (dt / 6.0) * acc

    def _linearization_prefactor(self, spectra):
        if self.kind_code == 0:
            return None  # default csc^2(theta)
        if self.kind_code == 1:
            return np.ones_like(spectra.theta)
        return 1.0 / np.cos(self.theta0 - spectra.theta) ** 2

    def _si_symbol(self, w_pack, steps_done):
        refresh = self.config.mean_F_refresh
        if (self._si_sym is None or self._si_age is None
                or steps_done - self._si_age >= refresh):
            spectra = spectrum_field(self.d, w_pack)
            Fbar = spectra.F_field(self._linearization_prefactor(spectra))
            Fbar = Fbar.mean(axis=0)
            sig = self.d.sigma
            sym = np.zeros(self.d.shape)
            for i in range(self.d.n):
                for j in range(self.d.n):
                    sym += np.real(Fbar[i, j] * sig[i] * np.conj(sig[j]))
            self._si_sym = sym
            self._si_age = steps_done
        return self._si_sym

    def step_semi_implicit(self, u, vel, dt, w_pack, steps_done=0):
        sym = self._si_symbol(w_pack, steps_done)
        vh = fftn(vel.reshape(self.d.shape))
        du = ifftn(vh * (dt / (1.0 + dt * sym))).real.reshape(-1)
        return u + du

    def advance(self, u, vel, dt, w_pack, steps_done):
        if self.config.stepper is Stepper.RK4:
            return self.step_rk4(u, vel, dt)
        if self.config.stepper is Stepper.SEMI_IMPLICIT:
            return self.step_semi_implicit(u, vel, dt, w_pack, steps_done)
        return self.step_euler(u, vel, dt)

    def dt_for(self):
        dt = self.config.dt_safety / (self.fmax * kappa_max(self.d))
        if self.config.stepper is Stepper.SEMI_IMPLICIT:
            dt *= self.config.si_boost
        return dt


def make_state(chi, u, t=0.0, volume=None):
    """Build a FlowState (computes theta_0 and the spectra cache)."""
    if volume is None:
        volume = theta_zero(chi)
    w_pack = hessian_pack(chi.domain, u.values) + chi.entry_pack()
    spectra = spectrum_field(chi.domain, w_pack)
    return FlowState(u=u, t=t, spectra=spectra, theta0=volume.theta0,
                     chi=chi, cot_theta0=volume.cot_theta0)


def velocity(state, kind=FlowKind.DHYM, theta_guard=1e-8):
    """The pointwise flow velocity for the given kind, as a ScalarField.

    Identically zero exactly when theta = theta_0 on the whole grid.
    """
    config = FlowConfig(kind=kind, theta_guard=theta_guard)
    driver = _Driver(state.chi, _VolumeView(state.theta0, state.cot_theta0),
                     config)
    vel, _ = driver.velocity_at(state.u.values)
    return ScalarField(state.u.domain, vel)


def step(state, config):
    """Advance one accepted step; spectra are recomputed on the result."""
    driver = _Driver(state.chi, _VolumeView(state.theta0, state.cot_theta0),
                     config)
    vel, w_pack = driver.velocity_at(state.u.values, want_fmax=True)
    dt = driver.dt_for()
    u_new = driver.advance(state.u.values, vel, dt, w_pack, 0)
    w_new = hessian_pack(state.u.domain, u_new) + driver.chi_pack
    spectra_new = driver.spectra_for(w_new)
    return FlowState(
        u=ScalarField(state.u.domain, u_new),
        t=state.t + dt,
        spectra=spectra_new,
        theta0=state.theta0,
        chi=state.chi,
        cot_theta0=state.cot_theta0,
    )


def run(chi, u0, config, usub=None, snapshot_dir=None):
    """Integrate until sup|u_t| < tol_stationary or t >= max_time.

    Returns a FlowResult (iterable as (state, series)).  PhaseSingular,
    TlpfRangeViolation and NonFinite abort with the partial diagnostics
    series attached to the exception; running out the clock is reported
    through ``converged``/``reason`` so the partial series stays usable.
    """
    t_start = time.perf_counter()
    volume = theta_zero(chi)
    driver = _Driver(chi, volume, config)
    d = chi.domain
    if usub is None:
        usub = u0
    series = DiagnosticsSeries()
    u = u0.values.copy()
    t = 0.0
    steps = 0

    def _expose(u_arr, t_now, w_pack):
        spectra = driver.spectra_for(w_pack)
        return FlowState(u=ScalarField(d, u_arr), t=t_now, spectra=spectra,
                         theta0=volume.theta0, chi=chi,
                         cot_theta0=volume.cot_theta0)

    def _record(state, vel, w_pack, dt_used):
        hess = w_pack - driver.chi_pack
        record(series, state, chi, usub, kind_code=driver.kind_code,
               velocity=vel, dt_used=dt_used, w_pack=w_pack,
               hess_pack_arr=hess)

    def _snapshot(state):
        if snapshot_dir is not None:
            write_snapshot(state.u, f"{snapshot_dir}/u_t{state.t:.6f}.bin")

    try:
        vel, w_pack = driver.velocity_at(u, want_fmax=True)
        state = _expose(u, t, w_pack)
        _record(state, vel, w_pack, 0.0)
        _snapshot(state)

        dt0 = driver.dt_for()
        if config.record_every > 0.0:
            record_stride = None
        else:
            est_steps = max(1, int(config.max_time / dt0))
            record_stride = max(1, est_steps // 256)
        next_record_t = config.record_every
        next_snap_t = config.snapshot_every

        converged = (config.tol_stationary > 0.0
                     and driver.sup_vel < config.tol_stationary)
        reason = "stationary" if converged else ""
        state = None

        while not converged and t < config.max_time:
            if config.max_steps and steps >= config.max_steps:
                reason = "max_steps"
                break
            dt = min(driver.dt_for(), config.max_time - t)
            u = driver.advance(u, vel, dt, w_pack, steps)
            t += dt
            steps += 1
            vel, w_pack = driver.velocity_at(u, want_fmax=True)

            if config.tol_stationary > 0.0 and driver.sup_vel < config.tol_stationary:
                converged = True
                reason = "stationary"
            last = converged or t >= config.max_time or (
                config.max_steps and steps + 1 > config.max_steps)
            due = (steps % record_stride == 0) if record_stride else \
                (t >= next_record_t)
            if due or last:
                state = _expose(u, t, w_pack)
                _record(state, vel, w_pack, dt)
                if record_stride is None:
                    while next_record_t <= t:
                        next_record_t += config.record_every
                if config.snapshot_every > 0.0 and (t >= next_snap_t or last):
                    _snapshot(state)
                    while next_snap_t <= t:
                        next_snap_t += config.snapshot_every
            elif config.snapshot_every > 0.0 and t >= next_snap_t:
                _snapshot(_expose(u, t, w_pack))
                while next_snap_t <= t:
                    next_snap_t += config.snapshot_every
        if not reason:
            reason = "max_time"
        if state is None or state.t < t:
            state = _expose(u, t, w_pack)
    except (PhaseSingular, TlpfRangeViolation, NonFinite) as exc:
        exc.series = series
        exc.t_reached = t
        raise

    return FlowResult(
        state=state,
        series=series,
        converged=converged,
        reason=reason,
        steps=steps,
        wall_time=time.perf_counter() - t_start,
        volume=volume,
    )
