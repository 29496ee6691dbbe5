"""One-dimensional natural exponential families in canonical form.

A family has density b(y) exp(a*y - psi(a)) with natural parameter ``a``.
All derived maps used elsewhere in the package live here:

* ``psi``, ``psi_prime``, ``psi_double_prime`` (log-partition and its
  derivatives, i.e. cumulant, mean and variance maps),
* ``natural_from_mean`` (the inverse mean map, in closed form),
* ``log_density``, ``kl``, ``sample``.

Three families are provided: Bernoulli, Poisson, and Gaussian with unit
variance (kept one-parameter on purpose).  Each carries a closed clamp
interval strictly inside its natural domain; estimators clip fitted
natural parameters into it so that variances stay bounded away from 0
and infinity and ``psi`` never overflows.

All maps accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, gammaln

from .errors import DomainError, RangeError, SupportError

__all__ = [
    "Family",
    "Bernoulli",
    "Poisson",
    "GaussianUnitVar",
    "FAMILIES",
    "get_family",
]


class Family:
    """Base class: shared formulas on top of per-family primitives.

    Subclasses define ``psi``/``psi_prime``/``psi_double_prime``,
    ``_natural_from_mean``, ``_log_base``, ``_in_support``,
    ``_in_mean_range`` and ``sample``.
    """

    name: str = ""
    clamp_interval: tuple[float, float] = (-np.inf, np.inf)
    # Empirical means are pulled this far off the support boundary before
    # inversion, so fitted natural parameters stay finite.
    mean_eps: float = 1e-8

    # -- domain / support checks ------------------------------------------

    def check_natural(self, a) -> None:
        """Raise DomainError unless every entry of ``a`` is a usable natural parameter."""
        if not np.all(np.isfinite(a)):
            raise DomainError(f"{self.name}: natural parameter must be finite")

    def check_support(self, y) -> None:
        if not np.all(self._in_support(np.asarray(y))):
            raise SupportError(f"{self.name}: value outside support")

    # -- derived maps -------------------------------------------------------

    def log_density(self, y, a):
        """log b(y) + a*y - psi(a), broadcasting ``y`` against ``a``."""
        self.check_natural(a)
        self.check_support(y)
        y = np.asarray(y, dtype=float)
        return self._log_base(y) + a * y - self.psi(a)

    def mean(self, a):
        self.check_natural(a)
        return self.psi_prime(a)

    def variance(self, a):
        self.check_natural(a)
        return self.psi_double_prime(a)

    def natural_from_mean(self, m):
        """Closed-form inverse of the mean map.

        Raises RangeError if ``m`` is outside the open mean range,
        boundary included: callers must pre-clamp empirical means
        (see ``clamp_mean``).
        """
        m_arr = np.asarray(m, dtype=float)
        if not np.all(np.isfinite(m_arr)) or not np.all(self._in_mean_range(m_arr)):
            raise RangeError(f"{self.name}: mean outside the open mean range")
        out = self._natural_from_mean(m_arr)
        return float(out) if np.isscalar(m) or m_arr.ndim == 0 else out

    def clamp_mean(self, m):
        """Pull ``m`` into the open mean range by at least ``mean_eps``."""
        return self._clamp_mean(np.asarray(m, dtype=float))

    def clamp_natural(self, a):
        """Clip ``a`` into the family's clamp interval."""
        lo, hi = self.clamp_interval
        return np.clip(a, lo, hi)

    def kl(self, a, a_prime):
        """Kullback-Leibler divergence between parameters ``a`` and ``a_prime``.

        psi'(a)(a - a') + psi(a') - psi(a); nonnegative, zero iff a = a'.
        Tiny negative floating-point results are clamped to 0.
        """
        self.check_natural(a)
        self.check_natural(a_prime)
        val = self.psi_prime(a) * (np.asarray(a) - np.asarray(a_prime)) + self.psi(
            a_prime
        ) - self.psi(a)
        return np.maximum(val, 0.0)

    # -- per-family primitives (overridden) ----------------------------------

    def psi(self, a):
        raise NotImplementedError

    def psi_prime(self, a):
        raise NotImplementedError

    def psi_double_prime(self, a):
        raise NotImplementedError

    def _natural_from_mean(self, m):
        raise NotImplementedError

    def _log_base(self, y):
        raise NotImplementedError

    def _in_support(self, y):
        raise NotImplementedError

    def _in_mean_range(self, m):
        raise NotImplementedError

    def _clamp_mean(self, m):
        raise NotImplementedError

    def sample(self, a, rng, size=None):
        raise NotImplementedError

    def __repr__(self):
        return f"<family {self.name}>"


class Bernoulli(Family):
    """Binary dyads; natural parameter is the log-odds."""

    name = "bernoulli"
    clamp_interval = (-15.0, 15.0)

    def psi(self, a):
        return np.logaddexp(0.0, a)

    def psi_prime(self, a):
        return expit(a)

    def psi_double_prime(self, a):
        p = expit(a)
        return p * (1.0 - p)

    def _natural_from_mean(self, m):
        return np.log(m) - np.log1p(-m)

    def _log_base(self, y):
        return np.zeros_like(y)

    def _in_support(self, y):
        return (y == 0.0) | (y == 1.0)

    def _in_mean_range(self, m):
        return (m > 0.0) & (m < 1.0)

    def _clamp_mean(self, m):
        return np.clip(m, self.mean_eps, 1.0 - self.mean_eps)

    def sample(self, a, rng, size=None):
        self.check_natural(a)
        return (rng.random(size) < expit(a)).astype(float)


class Poisson(Family):
    """Count dyads; natural parameter is the log-rate."""

    name = "poisson"
    clamp_interval = (-15.0, 8.0)

    def psi(self, a):
        return np.exp(a)

    def psi_prime(self, a):
        return np.exp(a)

    def psi_double_prime(self, a):
        return np.exp(a)

    def _natural_from_mean(self, m):
        return np.log(m)

    def _log_base(self, y):
        return -gammaln(y + 1.0)

    def _in_support(self, y):
        return (y >= 0.0) & (y == np.floor(y))

    def _in_mean_range(self, m):
        return m > 0.0

    def _clamp_mean(self, m):
        return np.maximum(m, self.mean_eps)

    def sample(self, a, rng, size=None):
        self.check_natural(a)
        return rng.poisson(np.exp(a), size).astype(float)


class GaussianUnitVar(Family):
    """Real dyads with unit variance; natural parameter is the mean."""

    name = "gaussian"
    clamp_interval = (-100.0, 100.0)

    _LOG_NORM = -0.5 * math.log(2.0 * math.pi)

    def psi(self, a):
        return 0.5 * np.square(a)

    def psi_prime(self, a):
        return np.asarray(a, dtype=float) + 0.0

    def psi_double_prime(self, a):
        return np.ones_like(np.asarray(a, dtype=float))

    def _natural_from_mean(self, m):
        return m

    def _log_base(self, y):
        return self._LOG_NORM - 0.5 * np.square(y)

    def _in_support(self, y):
        return np.isfinite(y)

    def _in_mean_range(self, m):
        return np.isfinite(m)

    def _clamp_mean(self, m):
        return m

    def sample(self, a, rng, size=None):
        self.check_natural(a)
        return rng.normal(a, 1.0, size)


FAMILIES: dict[str, Family] = {
    "bernoulli": Bernoulli(),
    "poisson": Poisson(),
    "gaussian": GaussianUnitVar(),
}


def get_family(family_id) -> Family:
    """Resolve a family from its string id or pass an instance through."""
    if isinstance(family_id, Family):
        return family_id
    try:
        return FAMILIES[family_id]
    except KeyError:
        raise ValueError(
            f"unknown family {family_id!r}; expected one of {sorted(FAMILIES)}"
        ) from None
