"""Readout error rates for qubits relaxing through a cascade of states.

Forcing relaxation through N intermediate states narrows the jump-time
distribution from exponential to Gamma, which suppresses early jumps and
with them the single-shot readout error, even at fixed signal-to-noise
ratio. This package provides the closed-form and quadrature error rates,
the stochastic record simulator, the optimal likelihood-ratio filter, the
Monte Carlo estimator and the (rho, nu) optimizer behind those results.
"""

__version__ = "0.1.0"

from .model import (CascadeModel, NormalizedModel, STATE_MINUS, STATE_PLUS,
                    asymmetric_model, denormalize, normalize, partial_snr,
                    rate_matrix, symmetric_model)
from .statistics import (DimensionlessPoint, DomainError, ErrorRates,
                         JumpTimeDistribution, asymptotic_error,
                         error_rates_closed_n0, error_rates_derivative,
                         error_rates_quadrature, heuristic_error_scale,
                         jump_pdf, jump_pdf_via_derivative, jump_survival,
                         outcome_pdf_minus, outcome_pdf_plus)
from .simulate import (RngStream, Trajectory, default_dt, max_dt,
                       sample_jump_times, simulate_trajectory, time_average)
from .filtering import (FilterError, FilterState, decide, decide_threshold,
                        euler_ito_reference, run_filter, run_filter_trace)
from .montecarlo import (McConfig, McResult, binomial_stderr, derive_seed,
                         estimate_error, plateau_check)
from .optimize import (Fig3Row, Fig3Table, Fig6Row, OptimizationResult,
                       asymptotic_trend, minimize_error, sweep_fig3,
                       sweep_fig6)
from .quadrature import QuadratureError, adaptive_quad

__all__ = [name for name in dir() if not name.startswith("_")]
