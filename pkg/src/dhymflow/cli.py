"""Command-line front end: configure a scenario, run it, emit artifacts.

Outputs in --out-dir:

    summary.txt          key: value lines (certificate, theta_0, fits,
                         check outcomes); identical across reruns of the
                         same spec and seed
    diagnostics.csv      one per flow (diagnostics-<kind>.csv when more
                         than one flow runs)
    snapshots            binary fields, when --snapshot-every > 0

Exit codes: 0 converged with all asserted checks passing, 1 check
failure or non-convergence, 2 runtime error.
"""

import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = ["RunSpec", "parse_config", "execute", "main"]

_DEFAULTS = dict(
    scenario="perturbed-constant",
    n=2,
    N=16,
    flow="dhym",
    stepper="rk4",
    dt_safety=1.0,
    tol=1e-8,
    max_time=25.0,
    seed=0,
    out_dir="dhym-out",
    snapshot_every=0.0,
    amplitude=None,
)

_KEY_TYPES = dict(
    scenario=str, n=int, N=int, flow=str, stepper=str, dt_safety=float,
    tol=float, max_time=float, seed=int, out_dir=str, snapshot_every=float,
    amplitude=float,
)


@dataclass
class RunSpec:
    scenario: str
    n: int
    N: int
    flow: str
    stepper: str
    dt_safety: float
    tol: float
    max_time: float
    seed: int
    out_dir: str
    snapshot_every: float
    amplitude: float | None = None

    def validate(self):
        from .flow import FlowKind, Stepper
        from .scenarios import SCENARIO_NAMES

        if self.scenario not in SCENARIO_NAMES:
            raise ValueError(f"scenario: unknown value '{self.scenario}'")
        if self.flow != "all":
            FlowKind(self.flow)
        Stepper(self.stepper)
        if self.n not in (1, 2, 3):
            raise ValueError(f"n: must be 1, 2 or 3, got {self.n}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N: must be even and >= 8, got {self.N}")
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError(f"dt-safety: must be in (0, 1], got {self.dt_safety}")
        if self.max_time <= 0:
            raise ValueError(f"max-time: must be positive, got {self.max_time}")
        return self


def _read_config_file(path):
    """Flat key = value text with # comments."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_").replace("grid", "N")
        if key not in _KEY_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
        out[key] = _KEY_TYPES[key](value)
    return out


def _build_parser():
    p = argparse.ArgumentParser(
        prog="dhym-flow",
        description="Run a dHYM-flow scenario and emit diagnostics.",
    )
    p.add_argument("--scenario", choices=(
        "constant", "perturbed-constant", "random-subsolution",
        "flow-comparison", "heat-oracle"))
    p.add_argument("--n", type=int, help="complex dimension (1, 2 or 3)")
    p.add_argument("--grid", type=int, dest="N", help="points per axis N")
    p.add_argument("--flow", choices=("dhym", "lbmcf", "tlpf", "all"))
    p.add_argument("--stepper", choices=("euler", "rk4", "semi-implicit"))
    p.add_argument("--dt-safety", type=float, dest="dt_safety")
    p.add_argument("--tol", type=float, help="stationarity tolerance on sup|u_t|")
    p.add_argument("--max-time", type=float, dest="max_time")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--snapshot-every", type=float, dest="snapshot_every")
    p.add_argument("--amplitude", type=float,
                   help="override the scenario's perturbation amplitude")
    p.add_argument("--config", help="flat key = value config file")
    return p


def parse_config(argv=None):
    """Merge defaults, config file and flags (flags win) into a RunSpec."""
    args = _build_parser().parse_args(argv)
    merged = dict(_DEFAULTS)
    if args.config:
        merged.update(_read_config_file(args.config))
    for key in merged:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return RunSpec(**merged).validate()


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _mean_removed_sup_distance(a, b):
    da = a - a.mean()
    db = b - b.mean()
    return float(np.abs(da - db).max())


def execute(spec):
    """Run the spec; write diagnostics and summary; return the exit code."""
    from .diagnostics import (check_harnack, check_im_cy,
                              check_lambda_min_bound, check_max_principle,
                              check_suprema_settled, check_theta_bounds,
                              fit_decay_rate, harnack_lower_bound,
                              im_cy_drift, lambda_min_constant)
    from .errors import DhymError
    from .flow import FlowConfig, FlowKind, run
    from .functionals import theta_zero
    from .scenarios import build_scenario
    from .subsolution import certify

    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []

    def emit(key, value):
        lines.append(f"{key}: {_fmt(value)}")

    for key in ("scenario", "n", "N", "flow", "stepper", "dt_safety",
                "tol", "max_time", "seed", "snapshot_every"):
        emit(key, getattr(spec, key))

    exit_code = 0
    try:
        scenario = build_scenario(spec.scenario, spec.n, spec.N, spec.seed,
                                  spec.amplitude)
        chi = scenario.chi
        volume = theta_zero(chi)
        emit("theta0", volume.theta0)
        emit("Z_re", volume.value.real)
        emit("Z_im", volume.value.imag)
        cert = certify(chi, volume.theta0)
        for key, value in cert.summary_items():
            emit(key, value)
        if not cert.passes:
            emit("warning", "uncertified start: flow runs, estimate "
                            "checks are reported, not asserted")
            print("warning: initial data failed subsolution certification",
                  file=sys.stderr)

        kinds = [FlowKind(spec.flow)] if spec.flow != "all" else list(FlowKind)
        if spec.scenario == "flow-comparison":
            kinds = list(FlowKind)
        multi = len(kinds) > 1

        finals = {}
        check_failures = []
        for kind in kinds:
            config = FlowConfig(
                kind=kind,
                stepper=spec.stepper,
                dt_safety=spec.dt_safety,
                tol_stationary=spec.tol,
                max_time=spec.max_time,
                snapshot_every=spec.snapshot_every,
            )
            snap_dir = None
            if spec.snapshot_every > 0:
                snap_dir = out / (f"snapshots-{kind.value}" if multi
                                  else "snapshots")
                snap_dir.mkdir(exist_ok=True)
            result = run(chi, scenario.u0, config, usub=scenario.usub,
                         snapshot_dir=str(snap_dir) if snap_dir else None)
            tag = f"{kind.value}." if multi else ""
            csv_name = (f"diagnostics-{kind.value}.csv" if multi
                        else "diagnostics.csv")
            result.series.to_csv(out / csv_name)
            finals[kind] = result.state.u.values

            emit(tag + "converged", result.converged)
            emit(tag + "reason", result.reason)
            emit(tag + "steps", result.steps)
            emit(tag + "t_final", result.state.t)
            if not result.converged:
                check_failures.append(f"{kind.value}:convergence")

            spectra = result.state.spectra
            theta_dev = max(abs(spectra.theta_max - volume.theta0),
                            abs(spectra.theta_min - volume.theta0))
            emit(tag + "final_max_theta_dev", theta_dev)
            fit = fit_decay_rate(result.series, window=0.5)
            emit(tag + "decay_amplitude", fit.amplitude)
            emit(tag + "decay_rate", fit.rate)
            emit(tag + "decay_r2", fit.r_squared)
            emit(tag + "im_cy_drift", im_cy_drift(result.series))

            theta_min_init = result.series.rows[0]["theta_min"]
            checks = [check_theta_bounds(result.series, theta_min_init,
                                         cert.B0)]
            A1 = lambda_min_constant(cert.B0, theta_min_init, spec.n)
            emit(tag + "A1", A1)
            checks.append(check_lambda_min_bound(result.series, A1))
            if kind is FlowKind.DHYM:
                checks.append(check_max_principle(result.series))
                checks.append(check_im_cy(result.series))
                harnack = check_harnack(result.series, cert.B0 / 6
                                        + 5 * math.pi / 6, None)
                emit(tag + "harnack_C", harnack.details["C_empirical"])
                lower = harnack_lower_bound(result.state.u, scenario.usub,
                                            chi, cert.B0)
                emit(tag + "harnack_lower_margin", lower.worst)
            if result.converged:
                checks.append(check_suprema_settled(result.series))
            m0 = max(abs(result.series.column("sup_u").max()),
                     abs(result.series.column("inf_u_minus_usub").min()))
            emit(tag + "M0", m0)
            emit(tag + "M1", result.series.column("grad_norm_max").max())
            emit(tag + "M2", result.series.column("hess_norm_max").max())
            for report in checks:
                emit(tag + "check." + report.name, report.passed)
                if not report.passed and cert.passes:
                    check_failures.append(f"{kind.value}:{report.name}")

        if scenario.name == "heat-oracle":
            oracle = scenario.info["oracle"]
            exact = oracle.exact_values(
                max(r.state.t for r in [result]))
            err = float(np.abs(finals[kinds[-1]] - exact).max())
            emit("oracle_sup_error", err)

        if multi:
            names = [k.value for k in kinds]
            worst = 0.0
            for i in range(len(kinds)):
                for j in range(i + 1, len(kinds)):
                    dist = _mean_removed_sup_distance(finals[kinds[i]],
                                                      finals[kinds[j]])
                    emit(f"compare.{names[i]}-{names[j]}", dist)
                    worst = max(worst, dist)
            emit("compare.max_pairwise", worst)

        if check_failures:
            emit("failed_checks", ",".join(check_failures))
            exit_code = 1
    except DhymError as exc:
        emit("error", f"{type(exc).__name__}: {exc}")
        exit_code = 2
    except (ValueError, RuntimeError) as exc:
        emit("error", f"{type(exc).__name__}: {exc}")
        exit_code = 2

    emit("exit_code", exit_code)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return exit_code


def main(argv=None):
    try:
        spec = parse_config(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = execute(spec)
    print(f"dhym-flow: exit {code} (outputs in {spec.out_dir})")
    return code


if __name__ == "__main__":
    sys.exit(main())
