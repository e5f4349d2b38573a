"""Truncated Taylor (jet) arithmetic for exact high-order derivatives.

A jet of order ``n`` stores the Taylor coefficients ``c[k] = f^(k)(x0)/k!``
for ``k = 0..n`` of a function expanded around an evaluation point ``x0``.
Arithmetic on jets propagates these coefficients exactly (to roundoff),
which is what makes N-th derivatives of the closed-form error rates
reliable where high-order finite differences would not be.

Coefficients are stored as a numpy array of shape ``(order + 1, *batch)``
so a whole grid of expansion points can be processed in one pass.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sp


class Jet:
    """Truncated Taylor series with elementwise batch support."""

    __slots__ = ("coef",)

    def __init__(self, coef: np.ndarray):
        self.coef = np.asarray(coef, dtype=float)

    @property
    def order(self) -> int:
        return self.coef.shape[0] - 1

    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    def derivative(self, k: int) -> np.ndarray:
        """k-th derivative at the expansion point, i.e. k! * c[k]."""
        return self.coef[k] * math.factorial(k)

    # -- construction -----------------------------------------------------

    @staticmethod
    def variable(x0, order: int) -> "Jet":
        x0 = np.asarray(x0, dtype=float)
        coef = np.zeros((order + 1,) + x0.shape)
        coef[0] = x0
        if order >= 1:
            coef[1] = 1.0
        return Jet(coef)

    @staticmethod
    def constant(x, order: int, batch_shape: tuple = ()) -> "Jet":
        x = np.asarray(x, dtype=float)
        coef = np.zeros((order + 1,) + np.broadcast_shapes(x.shape, batch_shape))
        coef[0] = x
        return Jet(coef)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.coef + other.coef)
        out = self.coef.copy()
        out[0] = out[0] + other
        return Jet(out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.coef - other.coef)
        out = self.coef.copy()
        out[0] = out[0] - other
        return Jet(out)

    def __rsub__(self, other):
        out = -self.coef
        out[0] = out[0] + other
        return Jet(out)

    def __neg__(self):
        return Jet(-self.coef)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef * other)
        a, b = self.coef, other.coef
        n = a.shape[0]
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(n):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coef / other)
        a, b = self.coef, other.coef
        n = a.shape[0]
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        out[0] = a[0] / b[0]
        for k in range(1, n):
            acc = a[k].astype(float, copy=True) * np.ones_like(out[0])
            for j in range(1, k + 1):
                acc = acc - b[j] * out[k - j]
            out[k] = acc / b[0]
        return Jet(out)

    def _dot_shifted(self) -> np.ndarray:
        """Series of the derivative du/dx, one order shorter (padded with 0)."""
        n = self.coef.shape[0]
        out = np.zeros_like(self.coef)
        for j in range(1, n):
            out[j - 1] = j * self.coef[j]
        return out


# -- transcendental propagation rules --------------------------------------

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def jet_exp(u: Jet) -> Jet:
    """exp(u) via the standard recursion e_k = (1/k) sum_j j u_j e_{k-j}."""
    a = u.coef
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, n):
        for j in range(1, k + 1):
            out[k] += j * a[j] * out[k - j]
        out[k] /= k
    return Jet(out)


def _integrate_derivative(u: Jet, w: np.ndarray, f0: np.ndarray) -> Jet:
    """Rebuild v from v' = w (a coefficient array) and v(x0) = f0."""
    out = np.zeros_like(u.coef)
    out[0] = f0
    for k in range(1, u.coef.shape[0]):
        out[k] = w[k - 1] / k
    return Jet(out)


def jet_erf(u: Jet) -> Jet:
    """erf(u) via v' = (2/sqrt(pi)) exp(-u^2) u'."""
    g = jet_exp(-(u * u))
    w = (g * Jet(u._dot_shifted())).coef * _TWO_OVER_SQRT_PI
    return _integrate_derivative(u, w, sp.erf(u.coef[0]))


def jet_erfc(u: Jet) -> Jet:
    g = jet_exp(-(u * u))
    w = (g * Jet(u._dot_shifted())).coef * (-_TWO_OVER_SQRT_PI)
    return _integrate_derivative(u, w, sp.erfc(u.coef[0]))


def jet_erfcx(u: Jet) -> Jet:
    """Scaled complementary error function erfcx(u) = exp(u^2) erfc(u).

    Uses the ODE v' = (2 u v - 2/sqrt(pi)) u', solved coefficient by
    coefficient; stays finite where exp(u^2) alone would overflow.
    """
    a = u.coef
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = sp.erfcx(a[0])
    up = u._dot_shifted()
    for k in range(1, n):
        # w = (2 u v - 2/sqrt(pi)) * u'; need its coefficient k-1, which
        # only involves v_0..v_{k-1}, all already known.
        acc = np.zeros_like(out[0])
        for j in range(k):  # index into u' series
            # coefficient j of (2 u v - 2/sqrt(pi))
            uv_j = np.zeros_like(out[0])
            for m in range(j + 1):
                uv_j += a[m] * out[j - m]
            term = 2.0 * uv_j
            if j == 0:
                term = term - _TWO_OVER_SQRT_PI
            acc += term * up[k - 1 - j]
        out[k] = acc / k
    return Jet(out)
