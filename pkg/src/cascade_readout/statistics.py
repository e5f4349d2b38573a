"""Jump-time and readout-outcome statistics for the cascade model.

All quantities live in dimensionless form: the readout window is
``rho = r t`` with ``r = R (contrast/2)^2``, the decision threshold is
``nu = (threshold - ground) / contrast``, and the time-averaged outcome is
measured in contrast units from the ground level, so its conditional
distributions are Gaussians of standard deviation ``1/(2 sqrt(rho))``.

Three routes to the conditional error rates coexist on purpose:

* a closed form for direct relaxation (single stage),
* its extension to N intermediate states by exact N-th derivatives in the
  stage rate, carried out with jet arithmetic,
* brute-force quadrature of the outcome distributions, kept as the
  independent oracle for the other two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .jets import Jet, jet_erf, jet_erfc, jet_erfcx, jet_exp
from .quadrature import adaptive_quad

# Exponent threshold above which the exp * erf-difference product in the
# closed form must not be evaluated literally.
OVERFLOW_EXPONENT = 500.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Input outside the validity region of a formula."""


@dataclass(frozen=True)
class JumpTimeDistribution:
    """Total relaxation time through an (N+1)-stage cascade at equal rates.

    The density is Gamma with shape N+1 and rate ``rate``; mean (N+1)/rate
    and variance (N+1)/rate^2. With rate = (N+1) * gamma the mean stays at
    1/gamma for every N while the distribution narrows.
    """

    n_intermediate: int
    rate: float

    def __post_init__(self):
        if self.n_intermediate < 0:
            raise ValueError("n_intermediate must be >= 0")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    @property
    def mean(self) -> float:
        return (self.n_intermediate + 1) / self.rate

    @property
    def variance(self) -> float:
        return (self.n_intermediate + 1) / self.rate ** 2


@dataclass(frozen=True)
class DimensionlessPoint:
    """Operating point (rho, nu) at a given SNR and cascade depth."""

    rho: float
    nu: float
    snr: float
    n_intermediate: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.snr <= 0:
            raise ValueError("snr must be positive")


@dataclass(frozen=True)
class ErrorRates:
    """Conditional and average misidentification probabilities."""

    eps_plus: float
    eps_minus: float
    eps_avg: float = field(init=False)
    stderr: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eps_avg", 0.5 * (self.eps_plus + self.eps_minus))


# ---------------------------------------------------------------------------
# jump-time distribution
# ---------------------------------------------------------------------------

def jump_pdf(dist: JumpTimeDistribution, tau):
    """Gamma density rate^(N+1) tau^N exp(-rate tau) / N! for tau >= 0."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be >= 0")
    n = dist.n_intermediate
    g = dist.rate
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            (tau == 0) & (n > 0),
            0.0,
            g ** (n + 1) * tau ** n * np.exp(-g * tau) / math.factorial(n),
        )
    return out if out.ndim else float(out)


def jump_survival(dist: JumpTimeDistribution, tau: float) -> float:
    """P(jump time > tau), the upper regularized incomplete gamma."""
    if tau < 0:
        raise DomainError("tau must be >= 0")
    return float(sp.gammaincc(dist.n_intermediate + 1, dist.rate * tau))


def jump_pdf_via_derivative(n_intermediate: int, gamma_rate: float, tau):
    """Gamma density built from N-th rate-derivatives of the exponential one.

    Evaluates (-1)^N g^(N+1)/N! * d^N/dg^N [exp(-g tau)] with an order-N jet
    in g, which reproduces the direct formula to machine precision. Kept as
    a worked check that the derivative identity used for the error rates is
    implemented correctly.
    """
    n = int(n_intermediate)
    if n < 0:
        raise DomainError("n_intermediate must be >= 0")
    if gamma_rate <= 0:
        raise DomainError("gamma_rate must be positive")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be >= 0")
    g = Jet.variable(np.broadcast_to(gamma_rate, tau.shape), n)
    decay = jet_exp(g * (-tau))  # exp(-g tau) = P0(tau)/g
    c_n = decay.coef[n]
    out = (-1.0) ** n * gamma_rate ** (n + 1) * c_n
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# outcome distributions of the time-averaged signal
# ---------------------------------------------------------------------------

def _gauss(x, mean, sigma):
    z = (x - mean) / sigma
    return np.exp(-0.5 * z * z) / (sigma * _SQRT_2PI)


def outcome_pdf_minus(point: DimensionlessPoint, x):
    """Density of the normalized outcome for the ground state: N(0, 1/(2 sqrt(rho)))."""
    if point.rho <= 0:
        raise DomainError("outcome distribution requires rho > 0")
    sigma = 0.5 / math.sqrt(point.rho)
    out = _gauss(np.asarray(x, dtype=float), 0.0, sigma)
    return out if out.ndim else float(out)


def outcome_pdf_plus(point: DimensionlessPoint, x, *, abs_tol: float = 1e-10):
    """Density of the normalized outcome for the excited state.

    Marginalizes the jump-conditioned Gaussian over the jump time: a
    Gamma-weighted quadrature over the scaled jump time s = tau/t in [0, 1]
    plus a survival term at mean 1. Accepts scalar or array ``x``.
    """
    if point.rho <= 0:
        raise DomainError("outcome distribution requires rho > 0")
    n = point.n_intermediate
    # Gamma_N * t in the readout window, for rate (N+1) * gamma and rho = r t.
    a = (n + 1) * point.rho / point.snr
    sigma = 0.5 / math.sqrt(point.rho)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))

    def integrand(s):
        dens = a ** (n + 1) * s ** n * np.exp(-a * s) / math.factorial(n)
        return dens * _gauss(x_arr[:, None], s[None, :], sigma)

    mode = n / a if n > 0 else None
    splits = [mode] if mode is not None and 0 < mode < 1 else []
    body, _ = adaptive_quad(integrand, 0.0, 1.0, abs_tol=abs_tol, split_points=splits)
    surv = sp.gammaincc(n + 1, a) * _gauss(x_arr, 1.0, sigma)
    out = body + surv
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# closed-form error rates and their derivative extension
# ---------------------------------------------------------------------------
#
# For direct relaxation at rate g, with u = g / r:
#
#   eps_plus = 0.5 exp(X) [erf(A) - erf(B)] + 0.5 erfc(-nu sqrt(2 rho))
#   eps_minus = 0.5 erfc(nu sqrt(2 rho))
#
#   X = rho u (u/8 - nu),  A = sqrt(2 rho)(u/4 - nu),  B = A + sqrt(2 rho)
#
# sqrt(2 rho nu^2) is taken as the signed nu sqrt(2 rho), which reproduces
# the pure-Gaussian discrimination limit for u -> 0 at any sign of nu.
#
# The product exp(X) * (erf A - erf B) cancels catastrophically once A (or
# -B) is a few units: erf saturates at double precision while exp(X) grows.
# Whenever A >= 0 or B <= 0 the product is therefore evaluated in scaled
# form through erfcx, using the identities X - A^2 = -2 rho nu^2 and
# X - B^2 = -2 rho (1 - nu)^2 - rho u, whose exponents never overflow.
# This subsumes the hard overflow guard at X > OVERFLOW_EXPONENT.


def _n0_exp_erf_term(rho: float, nu: float, u) -> "Jet | float":
    """0.5 exp(X) (erf A - erf B) for scalar or jet u, numerically stable."""
    is_jet = isinstance(u, Jet)
    u0 = u.value if is_jet else u
    sq = math.sqrt(2.0 * rho)
    a0 = sq * (u0 / 4.0 - nu)
    b0 = a0 + sq

    if is_jet:
        A = u * (sq / 4.0) + (-sq * nu)
        B = u * (sq / 4.0) + (sq * (1.0 - nu))
        if a0 >= 0.0:
            scale = math.exp(-2.0 * rho * nu * nu)
            diff = jet_erfcx(A) - jet_exp(A * A - B * B) * jet_erfcx(B)
            return diff * (-0.5 * scale)
        if b0 <= 0.0:
            scale = math.exp(-2.0 * rho * (1.0 - nu) ** 2)
            X_minus_B2 = u * (-rho)  # X - B^2 = -2 rho (1-nu)^2 - rho u
            diff = jet_exp(B * B - A * A) * jet_erfcx(-A) - jet_erfcx(-B)
            return jet_exp(X_minus_B2) * diff * (0.5 * scale)
        X = u * (u * (rho / 8.0) + (-rho * nu))
        return jet_exp(X) * (jet_erf(A) - jet_erf(B)) * 0.5

    if a0 >= 0.0:
        scale = math.exp(-2.0 * rho * nu * nu)
        return -0.5 * scale * (sp.erfcx(a0) - math.exp(a0 * a0 - b0 * b0) * sp.erfcx(b0))
    if b0 <= 0.0:
        expo = -2.0 * rho * (1.0 - nu) ** 2 - rho * u0
        return 0.5 * math.exp(expo) * (math.exp(b0 * b0 - a0 * a0) * sp.erfcx(-a0) - sp.erfcx(-b0))
    X = rho * u0 * (u0 / 8.0 - nu)
    return 0.5 * math.exp(X) * (sp.erf(a0) - sp.erf(b0))


def error_rates_closed_n0(point: DimensionlessPoint, gamma_over_r: float) -> ErrorRates:
    """Closed-form conditional error rates for direct relaxation.

    ``gamma_over_r`` is the transition rate in units of the SNR rate r; at
    rho = 0 both conditional rates are 1/2 (no data), and for
    gamma_over_r = 0 the rates reduce to pure Gaussian discrimination.
    """
    rho, nu = point.rho, point.nu
    if gamma_over_r < 0:
        raise DomainError("gamma_over_r must be >= 0")
    if rho == 0.0:
        return ErrorRates(0.5, 0.5)
    sq = math.sqrt(2.0 * rho)
    if gamma_over_r == 0.0:
        return ErrorRates(0.5 * sp.erfc(sq * (1.0 - nu)), 0.5 * sp.erfc(nu * sq))
    eps_plus = _n0_exp_erf_term(rho, nu, gamma_over_r) + 0.5 * sp.erfc(-nu * sq)
    eps_minus = 0.5 * sp.erfc(nu * sq)
    return ErrorRates(float(eps_plus), float(eps_minus))


def error_rates_derivative(n_intermediate: int, point: DimensionlessPoint) -> ErrorRates:
    """Conditional error rates for N intermediate states via exact derivatives.

    With the stage rate g = (N+1) gamma and u = g/r = (N+1)/snr, the
    excited-state rate is (-1)^N u0^(N+1) times the N-th Taylor coefficient
    of [closed-form eps_plus](u) / u, computed with order-N jets. The
    ground-state rate is unchanged by the cascade.
    """
    n = int(n_intermediate)
    if n < 0:
        raise DomainError("n_intermediate must be >= 0")
    rho, nu = point.rho, point.nu
    if rho == 0.0:
        return ErrorRates(0.5, 0.5)
    u0 = (n + 1) / point.snr
    sq = math.sqrt(2.0 * rho)
    if n == 0:
        return error_rates_closed_n0(point, u0)
    u = Jet.variable(u0, n)
    e_plus_of_u = _n0_exp_erf_term(rho, nu, u) + 0.5 * sp.erfc(-nu * sq)
    c_n = (e_plus_of_u / u).coef[n]
    eps_plus = (-1.0) ** n * u0 ** (n + 1) * c_n
    eps_minus = 0.5 * sp.erfc(nu * sq)
    return ErrorRates(float(eps_plus), float(eps_minus))


def error_rates_derivative_grid(n_intermediate: int, snr: float,
                                rho, nu) -> np.ndarray:
    """Average error rate over broadcastable (rho, nu) arrays.

    Convenience for the optimizer's coarse grid stage; evaluates
    :func:`error_rates_derivative` pointwise so each point picks its own
    stable branch of the closed form.
    """
    n = int(n_intermediate)
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    rho_b, nu_b = np.broadcast_arrays(rho, nu)
    out = np.empty(rho_b.shape)
    it = np.nditer(rho_b, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        point = DimensionlessPoint(rho=float(rho_b[idx]), nu=float(nu_b[idx]),
                                   snr=snr, n_intermediate=n)
        out[idx] = error_rates_derivative(n, point).eps_avg
    return out


def error_rates_quadrature(n_intermediate: int, point: DimensionlessPoint, *,
                           abs_tol: float = 1e-9) -> ErrorRates:
    """Error rates by integrating the outcome densities across the threshold.

    Independent oracle for :func:`error_rates_derivative`: integrates
    ``outcome_pdf_plus`` below nu and ``outcome_pdf_minus`` above nu with
    adaptive quadrature, never touching the closed forms.
    """
    n = int(n_intermediate)
    rho, nu = point.rho, point.nu
    if rho <= 0:
        raise DomainError("quadrature route requires rho > 0")
    pt = DimensionlessPoint(rho=rho, nu=nu, snr=point.snr, n_intermediate=n)
    sigma = 0.5 / math.sqrt(rho)

    lo = min(-9.0 * sigma, nu - 1.0)
    plus_val, _ = adaptive_quad(
        lambda xs: outcome_pdf_plus(pt, xs, abs_tol=abs_tol / 10.0),
        lo, nu, abs_tol=abs_tol,
        split_points=[p for p in (0.0, 1.0) if lo < p < nu])

    hi = max(9.0 * sigma, nu + 1.0)
    minus_val, _ = adaptive_quad(
        lambda xs: outcome_pdf_minus(pt, xs),
        nu, hi, abs_tol=abs_tol)
    if nu < 0:
        # mass below nu on the minus side is negligible by construction
        minus_val = min(minus_val, 1.0)
    return ErrorRates(float(np.clip(plus_val, 0.0, 1.0)),
                      float(np.clip(minus_val, 0.0, 1.0)))


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def asymptotic_error(n_intermediate: int, snr: float) -> float:
    """Leading-order optimal error rate for large SNR.

    eps ~ [ (N+1)/S * ln(2^N N! (S/(N+1))^(N+1)) ]^(N+1) / (2 (N+1)!),
    which for N = 0 reduces to ln(S) / (2 S). Requires S/(N+1) > 1 so the
    logarithm's argument exceeds one.
    """
    n = int(n_intermediate)
    if n < 0:
        raise DomainError("n_intermediate must be >= 0")
    if snr / (n + 1) <= 1.0:
        raise DomainError(f"asymptotic form needs snr/(N+1) > 1, got {snr / (n + 1):.3g}")
    log_arg = n * math.log(2.0) + math.lgamma(n + 1) + (n + 1) * math.log(snr / (n + 1))
    return ((n + 1) / snr * log_arg) ** (n + 1) / (2.0 * math.factorial(n + 1))


def heuristic_error_scale(n_intermediate: int, snr: float) -> float:
    """Order-of-magnitude error scale [(N+1)/S]^(N+1) / (N+1)!.

    Not calibrated: proportionality only, no prefactor or log corrections.
    """
    n = int(n_intermediate)
    if n < 0:
        raise DomainError("n_intermediate must be >= 0")
    if snr <= 0:
        raise DomainError("snr must be positive")
    return ((n + 1) / snr) ** (n + 1) / math.factorial(n + 1)
