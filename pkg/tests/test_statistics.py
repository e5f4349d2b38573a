"""Statistics module against independent oracles.

The reference values here are produced by scipy.integrate.quad on the
defining integrals (Gamma-weighted Gaussian CDFs), a code path fully
disjoint from both the closed forms and the package's own quadrature.
"""

import math

import numpy as np
import pytest
from scipy import special as sp
from scipy.integrate import quad

from cascade_readout.statistics import (DimensionlessPoint, DomainError,
                                        ErrorRates, JumpTimeDistribution,
                                        asymptotic_error,
                                        error_rates_closed_n0,
                                        error_rates_derivative,
                                        error_rates_quadrature,
                                        heuristic_error_scale, jump_pdf,
                                        jump_pdf_via_derivative, jump_survival,
                                        outcome_pdf_minus, outcome_pdf_plus)


def eps_plus_oracle(n, rho, nu, gamma_over_r):
    """Excited-state error by direct quadrature of the defining integral.

    eps_plus = int_0^t P_N(tau) P(x <= nu | jump at tau) dtau + survival term,
    written in the scaled variable y = Gamma_N tau so the integrand is well
    conditioned even for sharply decaying cascades.
    """
    a = gamma_over_r * rho  # Gamma_N * t

    def integrand(y):
        s = y / a  # tau / t
        return (y**n * math.exp(-y) / math.factorial(n)
                * 0.5 * sp.erfc(math.sqrt(2 * rho) * (s - nu)))

    upper = min(a, 60.0 + 10.0 * n)
    val, _ = quad(integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-12, limit=400)
    surv = sp.gammaincc(n + 1, a)
    return val + surv * 0.5 * sp.erfc(math.sqrt(2 * rho) * (1 - nu))


# ---------------------------------------------------------------------------
# jump-time distribution
# ---------------------------------------------------------------------------

def test_jump_pdf_exponential_at_origin():
    assert jump_pdf(JumpTimeDistribution(0, 1.0), 0.0) == 1.0


def test_jump_pdf_mode():
    # argmax of the Gamma density sits at N / rate
    dist = JumpTimeDistribution(3, 4.0)
    mode = 3.0 / 4.0
    taus = np.linspace(0.01, 3.0, 2000)
    dens = jump_pdf(dist, taus)
    assert taus[np.argmax(dens)] == pytest.approx(mode, abs=2e-3)
    eps = 1e-6
    assert jump_pdf(dist, mode) > jump_pdf(dist, mode + eps)
    assert jump_pdf(dist, mode) > jump_pdf(dist, mode - eps)


@pytest.mark.parametrize("n,rate", [(0, 1.0), (2, 3.0), (5, 6.0)])
def test_jump_pdf_normalization_and_moments(n, rate):
    dist = JumpTimeDistribution(n, rate)
    total, _ = quad(lambda t: jump_pdf(dist, t), 0.0, 50.0 / rate * (n + 1),
                    limit=200, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)
    mean, _ = quad(lambda t: t * jump_pdf(dist, t), 0.0, 80.0 / rate * (n + 1),
                   limit=200, epsabs=1e-12)
    assert mean == pytest.approx(dist.mean, rel=1e-6)
    second, _ = quad(lambda t: t * t * jump_pdf(dist, t), 0.0,
                     80.0 / rate * (n + 1), limit=200, epsabs=1e-12)
    assert second - mean**2 == pytest.approx(dist.variance, rel=1e-6)


def test_jump_mean_is_lifetime_for_scaled_rate():
    # rate (N+1) gamma keeps the mean at 1/gamma for every N
    for n in range(6):
        dist = JumpTimeDistribution(n, (n + 1) * 2.0)
        assert dist.mean == pytest.approx(0.5, rel=1e-15)


def test_jump_pdf_negative_tau_rejected():
    with pytest.raises(DomainError):
        jump_pdf(JumpTimeDistribution(1, 1.0), -0.1)


def test_jump_pdf_via_derivative_n0_identical():
    dist = JumpTimeDistribution(0, 2.3)
    taus = np.linspace(0.0, 4.0, 50)
    np.testing.assert_allclose(jump_pdf_via_derivative(0, 2.3, taus),
                               jump_pdf(dist, taus), rtol=1e-15)


def test_jump_pdf_via_derivative_point_value():
    got = jump_pdf_via_derivative(2, 3.0, 0.7)
    expect = jump_pdf(JumpTimeDistribution(2, 3.0), 0.7)
    assert got == pytest.approx(expect, rel=1e-12)
    assert got == pytest.approx(3.0**3 * 0.7**2 * math.exp(-2.1) / 2.0, rel=1e-12)


def test_jump_pdf_via_derivative_random_grid():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(0, 7))
        g = float(rng.uniform(0.2, 8.0))
        tau = float(rng.uniform(0.0, 5.0 / g * (n + 1)))
        direct = jump_pdf(JumpTimeDistribution(n, g), tau)
        via = jump_pdf_via_derivative(n, g, tau)
        if direct > 1e-290:
            worst = max(worst, abs(via - direct) / max(abs(direct), 1e-300))
    assert worst < 1e-10


# ---------------------------------------------------------------------------
# outcome distributions
# ---------------------------------------------------------------------------

def test_outcome_pdf_minus_peak_and_symmetry():
    pt = DimensionlessPoint(rho=2.0, nu=0.5, snr=20.0)
    peak = 2.0 * math.sqrt(2.0) / math.sqrt(2 * math.pi)
    assert outcome_pdf_minus(pt, 0.0) == pytest.approx(peak, rel=1e-13)
    assert outcome_pdf_minus(pt, 0.3) == pytest.approx(outcome_pdf_minus(pt, -0.3))
    total, _ = quad(lambda x: outcome_pdf_minus(pt, x), -3.0, 3.0, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_outcome_pdf_minus_requires_positive_rho():
    with pytest.raises(DomainError):
        outcome_pdf_minus(DimensionlessPoint(rho=0.0, nu=0.5, snr=5.0), 0.0)


def test_outcome_pdf_plus_no_relaxation_limit():
    # snr -> large makes Gamma_N t tiny: a Gaussian centered at x = 1
    pt = DimensionlessPoint(rho=2.0, nu=0.5, snr=1e9, n_intermediate=0)
    sigma = 0.5 / math.sqrt(2.0)
    xs = np.linspace(0.2, 1.8, 9)
    gauss = np.exp(-0.5 * ((xs - 1) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(outcome_pdf_plus(pt, xs), gauss, rtol=1e-6)


@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("snr", [5.0, 20.0])
@pytest.mark.parametrize("rho", [0.5, 2.0])
def test_outcome_pdf_plus_normalized(n, snr, rho):
    pt = DimensionlessPoint(rho=rho, nu=0.5, snr=snr, n_intermediate=n)
    sigma = 0.5 / math.sqrt(rho)
    lo, hi = -9 * sigma, 1.0 + 9 * sigma
    total, _ = quad(lambda x: outcome_pdf_plus(pt, x), lo, hi,
                    epsabs=1e-10, limit=300)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_outcome_pdf_plus_tail_matches_closed_form():
    # integral below nu equals the closed-form plus error at N=0
    pt = DimensionlessPoint(rho=3.0, nu=0.45, snr=8.0, n_intermediate=0)
    sigma = 0.5 / math.sqrt(3.0)
    val, _ = quad(lambda x: outcome_pdf_plus(pt, x), -9 * sigma, 0.45,
                  epsabs=1e-11, limit=300)
    closed = error_rates_closed_n0(pt, 1.0 / 8.0)
    assert val == pytest.approx(closed.eps_plus, abs=1e-8)


# ---------------------------------------------------------------------------
# closed-form and derivative error rates
# ---------------------------------------------------------------------------

def test_error_rates_dataclass_average():
    r = ErrorRates(0.2, 0.1)
    assert r.eps_avg == 0.5 * (0.2 + 0.1)
    assert r.stderr == 0.0


def test_closed_n0_zero_time_is_chance():
    pt = DimensionlessPoint(rho=0.0, nu=0.5, snr=20.0)
    r = error_rates_closed_n0(pt, 0.05)
    assert (r.eps_plus, r.eps_minus) == (0.5, 0.5)


def test_closed_n0_pure_gaussian_limit():
    # gamma/r = 0: two fixed Gaussians separated by the contrast
    for rho, nu in [(2.0, 0.3), (5.0, 0.7), (1.0, -0.2)]:
        pt = DimensionlessPoint(rho=rho, nu=nu, snr=20.0)
        r = error_rates_closed_n0(pt, 0.0)
        assert r.eps_plus == pytest.approx(
            0.5 * sp.erfc(math.sqrt(2 * rho) * (1 - nu)), rel=1e-12)
        assert r.eps_minus == pytest.approx(
            0.5 * sp.erfc(nu * math.sqrt(2 * rho)), rel=1e-12)


def test_closed_n0_nu_zero_minus_is_half():
    pt = DimensionlessPoint(rho=4.0, nu=0.0, snr=20.0)
    assert error_rates_closed_n0(pt, 0.1).eps_minus == 0.5


def test_closed_n0_against_direct_quadrature():
    worst = 0.0
    for rho in [0.3, 1.0, 5.0, 20.0, 80.0]:
        for nu in [-0.3, 0.1, 0.5, 0.95]:
            for gr in [0.05, 0.5, 2.0]:
                pt = DimensionlessPoint(rho=rho, nu=nu, snr=20.0)
                got = error_rates_closed_n0(pt, gr).eps_plus
                ref = eps_plus_oracle(0, rho, nu, gr)
                worst = max(worst, abs(got - ref))
    assert worst < 2e-13


def test_closed_n0_overflow_guard_region():
    # naive evaluation would compute exp(3000) * (cancelled erf difference)
    pt = DimensionlessPoint(rho=5000.0, nu=-0.05, snr=20.0)
    r = error_rates_closed_n0(pt, 2.0)
    ref = eps_plus_oracle(0, 5000.0, -0.05, 2.0)
    assert math.isfinite(r.eps_plus)
    assert r.eps_plus == pytest.approx(ref, rel=1e-10)


def test_closed_n0_cancellation_region():
    # moderate exponent, severe erf cancellation: X ~ 24, A ~ 5
    pt = DimensionlessPoint(rho=80.0, nu=0.1, snr=20.0)
    got = error_rates_closed_n0(pt, 2.0).eps_plus
    ref = eps_plus_oracle(0, 80.0, 0.1, 2.0)
    assert got == pytest.approx(ref, abs=1e-12)


def test_derivative_equals_closed_at_n0():
    pt = DimensionlessPoint(rho=6.0, nu=0.4, snr=15.0)
    a = error_rates_derivative(0, pt)
    b = error_rates_closed_n0(pt, 1.0 / 15.0)
    assert a.eps_plus == pytest.approx(b.eps_plus, rel=1e-14)
    assert a.eps_minus == b.eps_minus


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_derivative_against_direct_quadrature(n):
    for rho, nu in [(2.0, 0.3), (8.0, 0.55), (20.0, 0.7)]:
        pt = DimensionlessPoint(rho=rho, nu=nu, snr=20.0, n_intermediate=n)
        got = error_rates_derivative(n, pt)
        ref = eps_plus_oracle(n, rho, nu, (n + 1) / 20.0)
        assert got.eps_plus == pytest.approx(ref, abs=1e-11)
        assert got.eps_minus == pytest.approx(
            0.5 * sp.erfc(nu * math.sqrt(2 * rho)), rel=1e-12)


@pytest.mark.parametrize("n", [0, 2])
def test_quadrature_route_matches_derivative(n):
    for rho, nu in [(1.0, 0.35), (6.0, 0.6)]:
        pt = DimensionlessPoint(rho=rho, nu=nu, snr=12.0, n_intermediate=n)
        a = error_rates_derivative(n, pt)
        b = error_rates_quadrature(n, pt)
        assert b.eps_plus == pytest.approx(a.eps_plus, abs=1e-8)
        assert b.eps_minus == pytest.approx(a.eps_minus, abs=1e-8)


def test_quadrature_degenerate_thresholds():
    sigma = 0.5 / math.sqrt(2.0)
    far = 12 * sigma
    pt = DimensionlessPoint(rho=2.0, nu=1.0 + far, snr=10.0, n_intermediate=1)
    r = error_rates_quadrature(1, pt)
    assert r.eps_minus == pytest.approx(0.0, abs=1e-10)
    assert r.eps_plus == pytest.approx(1.0, abs=1e-8)
    pt = DimensionlessPoint(rho=2.0, nu=-far, snr=10.0, n_intermediate=1)
    r = error_rates_quadrature(1, pt)
    assert r.eps_minus == pytest.approx(1.0, abs=1e-10)
    assert r.eps_plus == pytest.approx(0.0, abs=1e-8)


def test_conditional_rates_monotone_in_nu():
    nus = np.linspace(-0.2, 1.2, 29)
    for n in (0, 2):
        plus = []
        minus = []
        for nu in nus:
            pt = DimensionlessPoint(rho=5.0, nu=float(nu), snr=10.0)
            r = error_rates_derivative(n, pt)
            plus.append(r.eps_plus)
            minus.append(r.eps_minus)
        assert np.all(np.diff(plus) >= -1e-12)
        assert np.all(np.diff(minus) <= 1e-12)


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def test_asymptotic_error_n0_value():
    assert asymptotic_error(0, 1e4) == pytest.approx(math.log(1e4) / 2e4, rel=1e-13)
    assert asymptotic_error(0, 1e4) == pytest.approx(4.60517e-4, rel=1e-5)


def test_asymptotic_error_reduces_to_minimal_form():
    for snr in [1e2, 1e3, 1e4]:
        assert asymptotic_error(0, snr) == pytest.approx(
            math.log(snr) / (2 * snr), rel=1e-12)


def test_asymptotic_error_evaluation_order_invariance():
    # same expression with the nested logarithm expanded differently
    n, snr = 1, 100.0
    direct = asymptotic_error(n, snr)
    log_arg = math.log(2.0**n * math.factorial(n)) + (n + 1) * (math.log(snr) - math.log(n + 1))
    rearranged = ((n + 1) / snr * log_arg) ** (n + 1) / (2 * math.factorial(n + 1))
    assert direct == pytest.approx(rearranged, rel=1e-12)


def test_asymptotic_error_domain():
    with pytest.raises(DomainError):
        asymptotic_error(3, 3.5)


def test_heuristic_error_scale_values():
    assert heuristic_error_scale(0, 10.0) == pytest.approx(0.1, rel=1e-14)
    assert heuristic_error_scale(1, 10.0) == pytest.approx(0.02, rel=1e-14)


def test_heuristic_ratio_shrinks_when_snr_sufficient():
    # successive-N ratio < 1 whenever S > e (N + 2), checked on a grid
    for n in range(5):
        for snr in np.linspace(math.e * (n + 2) + 0.1, 120.0, 12):
            ratio = heuristic_error_scale(n + 1, snr) / heuristic_error_scale(n, snr)
            assert ratio < 1.0
