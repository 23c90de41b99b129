"""Elliptic integrals, nome/modulus conversion and the Jacobi ``dn`` function.

These are the scalar kernels behind the Sabino singular value bound and
the Wachspress ADI shifts.  Everything works with real moduli in [0, 1).
Where a caller already knows the complementary modulus exactly (e.g.
``k' = b/a`` for a spectral interval) the ``*_kprime`` entry points should
be used; recomputing ``k' = sqrt(1 - k**2)`` from a modulus close to one
throws away most of the significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError

_AGM_MAXITER = 64
_LANDEN_MAXDEPTH = 40
_SMALL_MODULUS = 1e-8
_SERIES_TOL = 1e-16


def agm(a, b):
    """Arithmetic-geometric mean of two positive numbers."""
    a = float(a)
    b = float(b)
    if not (a > 0 and b > 0):
        raise DomainError(f"agm requires positive arguments, got ({a}, {b})")
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= 1e-15 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def _check_modulus(k, name="k"):
    k = float(k)
    if not (0.0 <= k < 1.0):
        raise DomainError(f"{name} must lie in [0, 1), got {k}")
    return k


def complete_K_kprime(k_prime):
    """Complete integral K as a function of the complementary modulus."""
    k_prime = float(k_prime)
    if not (0.0 < k_prime <= 1.0):
        raise DomainError(f"complementary modulus must lie in (0, 1], got {k_prime}")
    return math.pi / (2.0 * agm(1.0, k_prime))


def complete_K(k):
    """Complete elliptic integral of the first kind, ``K(k) = s_k(1)``.

    Evaluated as ``pi / (2 agm(1, k'))``.
    """
    k = _check_modulus(k)
    return complete_K_kprime(math.sqrt((1.0 - k) * (1.0 + k)))


def incomplete_s(x, k):
    """Incomplete integral ``s_k(x) = int_0^x dt / sqrt((1-t^2)(1-k^2 t^2))``.

    Computed by adaptive quadrature after the substitution ``t = sin(theta)``,
    which removes the endpoint singularity at ``t = 1``.
    """
    x = float(x)
    k = _check_modulus(k)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    k2 = k * k
    val, _ = integrate.quad(
        lambda th: 1.0 / math.sqrt(1.0 - k2 * math.sin(th) ** 2),
        0.0, math.asin(x), epsabs=1e-12, epsrel=1e-13, limit=200,
    )
    return val


def nome_from_K(K, K_prime):
    """Nome ``q = exp(-pi K'/K)``."""
    K = float(K)
    K_prime = float(K_prime)
    if not (K > 0 and K_prime > 0):
        raise DomainError(f"K and K' must be positive, got ({K}, {K_prime})")
    return math.exp(-math.pi * K_prime / K)


def modulus_from_nome(q):
    """Complementary modulus ``k'`` belonging to the nome ``q``.

    Uses the theta-series ratio

        sqrt(k') = (1 - 2q + 2q^4 - 2q^9 + ...) / (1 + 2q + 2q^4 + 2q^9 + ...)

    truncated once the next term ``2 q^(m^2)`` drops below 1e-16.
    """
    q = float(q)
    if not (0.0 <= q < 1.0):
        raise DomainError(f"nome must lie in [0, 1), got {q}")
    num = 1.0
    den = 1.0
    m = 1
    while True:
        term = 2.0 * q ** (m * m)
        if term < _SERIES_TOL:
            break
        num += term if m % 2 == 0 else -term
        den += term
        m += 1
    return (num / den) ** 2


def _dn(u, k, k_prime):
    """``dn(u, k)`` via the descending Landen (AGM) scheme.

    ``k_prime`` is passed separately so that moduli near one keep full
    precision in the first AGM stage.
    """
    u = np.asarray(u, dtype=float)
    if k < _SMALL_MODULUS:
        return np.ones_like(u)
    a = [1.0]
    c = [k]
    b = k_prime
    while abs(c[-1]) > 1e-16 * a[-1] and len(a) <= _LANDEN_MAXDEPTH:
        an, cn = 0.5 * (a[-1] + b), 0.5 * (a[-1] - b)
        b = math.sqrt(a[-1] * b)
        a.append(an)
        c.append(cn)
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * u
    for m in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[m] / a[m] * np.sin(phi)))
    # dn^2 = k'^2 + k^2 cn^2; the usual cos(phi0)/cos(phi1 - phi0) is 0/0 at u = K
    return np.hypot(k_prime, k * np.cos(phi))


def jacobi_dn(u, k):
    """Jacobi elliptic function ``dn(u, k)`` for real ``u`` and ``0 <= k < 1``.

    Accepts scalars or arrays for ``u``.
    """
    k = _check_modulus(k)
    out = _dn(u, k, math.sqrt((1.0 - k) * (1.0 + k)))
    return float(out) if out.ndim == 0 else out


def jacobi_dn_kprime(u, k_prime):
    """``dn`` parametrised by the complementary modulus ``k'`` in (0, 1]."""
    k_prime = float(k_prime)
    if not (0.0 < k_prime <= 1.0):
        raise DomainError(f"complementary modulus must lie in (0, 1], got {k_prime}")
    k = math.sqrt((1.0 - k_prime) * (1.0 + k_prime))
    out = _dn(u, k, k_prime)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EllipticData:
    """Modulus, complementary modulus, complete integrals and nome."""

    k: float
    k_prime: float
    K: float
    K_prime: float
    q: float

    @classmethod
    def from_kprime(cls, k_prime):
        """Build from the complementary modulus (e.g. ``b/a`` of an interval).

        ``k_prime = 1`` is the degenerate point ``k = 0`` where ``K'`` is
        infinite and the nome is 0.
        """
        k_prime = float(k_prime)
        if not (0.0 < k_prime <= 1.0):
            raise DomainError(f"complementary modulus must lie in (0, 1], got {k_prime}")
        k = math.sqrt((1.0 - k_prime) * (1.0 + k_prime))
        K = complete_K_kprime(k_prime)
        if k == 0.0:
            return cls(0.0, 1.0, K, math.inf, 0.0)
        K_prime = complete_K_kprime(k)
        return cls(k, k_prime, K, K_prime, nome_from_K(K, K_prime))

    @classmethod
    def from_modulus(cls, k):
        k = _check_modulus(k)
        return cls.from_kprime(math.sqrt((1.0 - k) * (1.0 + k)))

    def k_prime_power(self, r):
        """Complementary modulus belonging to the nome ``q**r``."""
        return modulus_from_nome(self.q ** r)
