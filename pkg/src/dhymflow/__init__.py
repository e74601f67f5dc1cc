"""Numerical laboratory for the deformed Hermitian Yang-Mills flow
u_t = cot(theta(chi_u)) - cot(theta_0) on flat complex tori, with its two
competitor flows, subsolution certificates, the Calabi-Yau functional,
and the associated a priori estimates wired up as machine-checkable
invariants.
"""

from .backend import fft_engine, kernel_engine
from .diagnostics import (DiagnosticsSeries, check_harnack, check_im_cy,
                          check_lambda_min_bound, check_max_principle,
                          check_suprema_settled, check_theta_bounds,
                          fit_decay_rate, harnack_lower_bound, im_cy_drift,
                          lambda_min_constant, record)
from .errors import (DhymError, DomainMismatch, MaxTimeExceeded, NonFinite,
                     NotSupercritical, PhaseSingular, TlpfRangeViolation)
from .flow import (FlowConfig, FlowKind, FlowResult, FlowState, Stepper,
                   kappa_max, make_state, run, stable_dt, step, velocity)
from .functionals import (ClosedForm, ComplexVolume, calabi_yau, im_cy,
                          mixed_wedge_ratio, pointwise_top_wedge, theta_zero)
from .geometry import (GridDomain, HermitianMatrixField, ScalarField,
                       build_domain, complex_hessian, holomorphic_gradient,
                       holomorphic_gradient_norm, integrate, read_snapshot,
                       write_snapshot)
from .oracles import (concavity_sampler, fd_linearization_check,
                      heat_flow_oracle, refinement_study)
from .phase import (ConeParams, PointSpectrum, SpectrumField, arccot,
                    cot_theta, cot_theta_hessian, eigenvalues_descending,
                    in_gamma_tau, linearization_matrix, spectrum_field,
                    structural_inequalities, theta_of)
from .scenarios import Scenario, build_scenario
from .subsolution import (SubsolutionCertificate, certify, compute_A0,
                          compute_B0, sample_S_delta)

__version__ = "0.1.0"
