"""Closed-form sample-complexity bounds.

Everything is evaluated in log space; the returned :class:`BoundValue` is a
float carrying ``.ln`` and ``.log10`` so values beyond the float range (or
ratios of them) stay exact to working precision.
"""

import math

from .errors import Inapplicable, RejectedInput
from .measurement import noise_factor

__all__ = [
    "BoundValue",
    "hoeffding_upper",
    "classical_lower",
    "sigma_condition",
    "equivalent_classical_N",
    "classical_success_bound",
    "classical_success_excess",
    "acquisition_time",
    "format_duration",
    "SECONDS_PER_YEAR",
]

SECONDS_PER_YEAR = 365.25 * 86400.0


class BoundValue(float):
    """Float with its natural log attached and an applicability flag."""

    def __new__(cls, ln, applicable=True):
        try:
            value = math.exp(ln)
        except OverflowError:
            value = math.inf
        obj = super().__new__(cls, value)
        obj.ln = float(ln)
        obj.applicable = bool(applicable)
        return obj

    @property
    def log10(self):
        return self.ln / math.log(10.0)

    def as_dict(self):
        return {"value": float(self), "log10": self.log10, "applicable": self.applicable}


def _check_unit(name, x):
    if not 0.0 < x < 1.0:
        raise RejectedInput(f"{name} must lie in (0, 1)")


def hoeffding_upper(r_eff, beta_sq, epsilon, delta):
    """Samples sufficient for an eps-accurate estimate with confidence 1 - delta.

    ``8 exp(2 exp(-2 r_eff) |beta|^2) eps^-2 ln(4 / delta)``.
    """
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    if beta_sq < 0:
        raise RejectedInput("beta_sq must be >= 0")
    ln = (
        math.log(8.0)
        + 2.0 * noise_factor(r_eff) * beta_sq
        - 2.0 * math.log(epsilon)
        + math.log(math.log(4.0 / delta))
    )
    return BoundValue(ln)


def sigma_condition(kappa, sigma):
    """Hypothesis of the finite-width lower bound on ``2 sigma^2``."""
    a = 1.0 - 1.98 * kappa
    if kappa > 0:
        c = 0.99 * kappa
        b = c * (math.sqrt(1.0 + c**-2) - 1.0)
    else:
        b = 1.0
    return 2.0 * sigma**2 <= max(a, b)


def _gain(kappa, sigma):
    return math.log1p(1.98 * kappa / (1.0 + 2.0 * sigma**2))


def classical_lower(m, n, kappa, epsilon, sigma=0.0):
    """Entanglement-free lower bound ``0.01 eps^-2 (1 + 1.98 kappa/(1 + 2 sigma^2))^(mn)``.

    ``sigma = 0`` gives the narrow-peak variant.  For ``sigma > 0`` the
    value is returned with ``applicable=False`` if the width condition fails.

    Raises
    ------
    Inapplicable
        If ``m n < 8`` or ``epsilon > 0.24``.
    """
    mn = m * n
    if mn < 8:
        raise Inapplicable("lower bound needs m*n >= 8")
    if not 0.0 < epsilon <= 0.24:
        raise Inapplicable("lower bound needs 0 < epsilon <= 0.24")
    if kappa < 0 or sigma < 0:
        raise RejectedInput("kappa and sigma must be >= 0")
    ln = math.log(0.01) - 2.0 * math.log(epsilon) + mn * _gain(kappa, sigma)
    applicable = sigma == 0 or sigma_condition(kappa, sigma)
    return BoundValue(ln, applicable)


def equivalent_classical_N(P_suc, epsilon0, kappa, sigma, n):
    """Classical samples needed to reach success probability ``P_suc``."""
    if not 0.5 <= P_suc <= 1.0:
        raise RejectedInput("P_suc must lie in [0.5, 1]")
    if P_suc == 0.5:
        return BoundValue(-math.inf)
    ln = math.log(2.0 * P_suc - 1.0) - math.log(16.0 * epsilon0**2) + n * _gain(kappa, sigma)
    return BoundValue(ln)


def classical_success_excess(N, epsilon0, kappa, sigma, n):
    """``P_c - 1/2`` before capping, as a BoundValue."""
    if N < 0:
        raise RejectedInput("N must be >= 0")
    if N == 0:
        return BoundValue(-math.inf)
    ln = math.log(N) + math.log(8.0 * epsilon0**2) - n * _gain(kappa, sigma)
    return BoundValue(ln)


def classical_success_bound(N, epsilon0, kappa, sigma, n):
    """Best success probability of an entanglement-free strategy with N samples."""
    return min(0.5 + float(classical_success_excess(N, epsilon0, kappa, sigma, n)), 1.0)


def acquisition_time(N, n, mode_rate_hz=1e6):
    """Seconds needed to acquire ``N`` samples of ``n`` modes at ``mode_rate_hz``."""
    if N < 0 or n <= 0 or mode_rate_hz <= 0:
        raise RejectedInput("N >= 0, n > 0 and mode_rate_hz > 0 required")
    return N * n / mode_rate_hz


def format_duration(seconds):
    if seconds < 60:
        return f"{seconds:.3g} s"
    if seconds < 86400:
        return f"{seconds / 3600:.3g} h"
    if seconds < SECONDS_PER_YEAR:
        return f"{seconds / 86400:.3g} days"
    return f"{seconds / SECONDS_PER_YEAR:.3g} years"
