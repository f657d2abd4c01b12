"""Random displacement processes.

A process is represented classically by the pair (p, lambda): the density of
the n-mode complex displacement ``alpha`` and its characteristic function

    lambda(beta) = E[exp(alpha^dag beta - beta^dag alpha)] = E[exp(2i Im(alpha^dag beta))]

with the physics inner product ``a^dag b = sum(conj(a_j) * b_j)``.

Three families are supported:

* :class:`ThreePeakSpec` -- Gaussian central peak plus two imaginary side
  peaks at +/- gamma.
* :class:`GaussianSpec` -- the central peak alone.
* :class:`FixedSpec` -- a deterministic displacement (calibration grids,
  pilot modes).
"""

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import RejectedInput, UnsupportedVariant

__all__ = [
    "ThreePeakSpec",
    "GaussianSpec",
    "FixedSpec",
    "ProcessSpec",
    "as_complex_vec",
    "mode_count",
    "char_fn",
    "pdf_weight",
    "sample_displacement",
    "sample_displacements",
    "draw_gamma",
    "empirical_char_fn",
    "spec_to_dict",
    "spec_from_dict",
    "spec_to_json",
    "spec_from_json",
]


def as_complex_vec(values, n=None, name="vector"):
    """Validate and convert to a 1-D complex128 array of length >= 1."""
    arr = np.asarray(values)
    if arr.ndim == 2 and arr.shape[-1] == 2 and not np.iscomplexobj(arr):
        # [[re, im], ...] pairs
        arr = arr[:, 0] + 1j * arr[:, 1]
    arr = np.atleast_1d(arr).astype(np.complex128)
    if arr.ndim != 1 or arr.size < 1:
        raise RejectedInput(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise RejectedInput(f"{name} has non-finite components")
    if n is not None and arr.size != n:
        raise RejectedInput(f"{name} has {arr.size} modes, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class ThreePeakSpec:
    gamma: np.ndarray
    sigma: float
    epsilon0: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_complex_vec(self.gamma, name="gamma"))
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise RejectedInput("sigma must be positive")
        # Above 1/4 the density 1 + 4 eps0 sin(.) goes negative.
        if not 0.0 <= self.epsilon0 <= 0.25:
            raise RejectedInput("epsilon0 must lie in [0, 0.25]")

    @property
    def n(self):
        return self.gamma.size


@dataclass(frozen=True)
class GaussianSpec:
    n: int
    sigma: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise RejectedInput("n must be a positive integer")
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise RejectedInput("sigma must be positive")


@dataclass(frozen=True, eq=False)
class FixedSpec:
    alpha0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha0", as_complex_vec(self.alpha0, name="alpha0"))

    @property
    def n(self):
        return self.alpha0.size


ProcessSpec = Union[ThreePeakSpec, GaussianSpec, FixedSpec]


def mode_count(spec):
    if isinstance(spec, (ThreePeakSpec, GaussianSpec, FixedSpec)):
        return int(spec.n)
    raise UnsupportedVariant(f"not a process spec: {type(spec).__name__}")


def _dual_points(spec, beta):
    n = mode_count(spec)
    beta = np.asarray(beta, dtype=np.complex128)
    if beta.shape[-1:] != (n,):
        raise RejectedInput(f"beta has shape {beta.shape}, expected (..., {n})")
    return beta


def _gauss(sq_norm, sigma):
    return np.exp(-sq_norm / (2.0 * sigma**2))


def char_fn(spec, beta):
    """Closed-form characteristic function.

    ``beta`` may carry leading batch axes; the last axis indexes modes.
    Returns a Python complex for a single point, else a complex array.
    """
    beta = _dual_points(spec, beta)
    if isinstance(spec, GaussianSpec):
        out = _gauss(np.sum(np.abs(beta) ** 2, axis=-1), spec.sigma).astype(np.complex128)
    elif isinstance(spec, ThreePeakSpec):
        g = spec.gamma
        centre = _gauss(np.sum(np.abs(beta) ** 2, axis=-1), spec.sigma)
        plus = _gauss(np.sum(np.abs(beta - g) ** 2, axis=-1), spec.sigma)
        minus = _gauss(np.sum(np.abs(beta + g) ** 2, axis=-1), spec.sigma)
        out = centre + 2j * spec.epsilon0 * (plus - minus)
    elif isinstance(spec, FixedSpec):
        out = np.exp(2j * np.imag(beta @ np.conj(spec.alpha0)))
    else:
        raise UnsupportedVariant(type(spec).__name__)
    return complex(out) if np.ndim(out) == 0 else out


def _side_phase(alpha, gamma):
    # 2 (gamma_i . alpha_r - gamma_r . alpha_i) = 2 Im(alpha^dag gamma)
    return 2.0 * np.imag(np.conj(alpha) @ gamma)


def pdf_weight(spec, alpha):
    """Unnormalised density of the displacement at ``alpha``."""
    if isinstance(spec, FixedSpec):
        raise UnsupportedVariant("a fixed displacement has a delta density")
    n = mode_count(spec)
    alpha = np.asarray(alpha, dtype=np.complex128)
    if alpha.shape[-1:] != (n,):
        raise RejectedInput(f"alpha has shape {alpha.shape}, expected (..., {n})")
    envelope = np.exp(-2.0 * spec.sigma**2 * np.sum(np.abs(alpha) ** 2, axis=-1))
    if isinstance(spec, ThreePeakSpec):
        envelope = envelope * (1.0 + 4.0 * spec.epsilon0 * np.sin(_side_phase(alpha, spec.gamma)))
    return float(envelope) if np.ndim(envelope) == 0 else envelope


def _envelope_draws(rng, size, n, sigma):
    # Envelope exp(-2 sigma^2 |alpha|^2): each quadrature ~ N(0, 1/(4 sigma^2)).
    scale = 1.0 / (2.0 * sigma)
    re = rng.standard_normal((size, n))
    im = rng.standard_normal((size, n))
    return scale * (re + 1j * im)


def sample_displacements(spec, size, rng):
    """Draw ``size`` displacement vectors; returns a ``(size, n)`` array.

    Three-peak draws are rejection-sampled against the Gaussian envelope with
    acceptance probability ``(1 + 4 eps0 sin(2 Im(alpha^dag gamma))) / 2``;
    the long-run acceptance rate is exactly 1/2.
    """
    n = mode_count(spec)
    size = int(size)
    if isinstance(spec, FixedSpec):
        return np.broadcast_to(spec.alpha0, (size, n)).copy()
    if isinstance(spec, GaussianSpec):
        return _envelope_draws(rng, size, n, spec.sigma)
    out = np.empty((size, n), dtype=np.complex128)
    filled = 0
    while filled < size:
        batch = 2 * (size - filled) + 16
        cand = _envelope_draws(rng, batch, n, spec.sigma)
        accept_p = 0.5 * (1.0 + 4.0 * spec.epsilon0 * np.sin(_side_phase(cand, spec.gamma)))
        keep = cand[rng.random(batch) < accept_p]
        take = min(keep.shape[0], size - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out


def sample_displacement(spec, rng):
    """Draw a single displacement vector."""
    return sample_displacements(spec, 1, rng)[0]


def draw_gamma(n, sigma_gamma_sq, rng):
    """Peak location gamma ~ q: every real coordinate i.i.d. N(0, sigma_gamma_sq)."""
    if not sigma_gamma_sq > 0:
        raise RejectedInput("sigma_gamma_sq must be positive")
    s = math.sqrt(sigma_gamma_sq)
    return s * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def empirical_char_fn(samples, beta):
    """Monte Carlo characteristic function from noiseless displacement draws."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[0] == 0:
        raise RejectedInput("no samples")
    beta = as_complex_vec(beta, n=samples.shape[1], name="beta")
    return complex(np.mean(np.exp(2j * np.imag(np.conj(samples) @ beta))))


# -- serialisation -----------------------------------------------------------

_FIELDS = {
    "three_peak": {"kind", "n", "sigma", "epsilon0", "gamma"},
    "gaussian": {"kind", "n", "sigma"},
    "fixed": {"kind", "n", "alpha0"},
}


def _pairs(vec):
    return [[float(z.real), float(z.imag)] for z in vec]


def spec_to_dict(spec):
    if isinstance(spec, ThreePeakSpec):
        return {
            "kind": "three_peak",
            "n": spec.n,
            "sigma": float(spec.sigma),
            "epsilon0": float(spec.epsilon0),
            "gamma": _pairs(spec.gamma),
        }
    if isinstance(spec, GaussianSpec):
        return {"kind": "gaussian", "n": int(spec.n), "sigma": float(spec.sigma)}
    if isinstance(spec, FixedSpec):
        return {"kind": "fixed", "n": spec.n, "alpha0": _pairs(spec.alpha0)}
    raise UnsupportedVariant(type(spec).__name__)


def spec_from_dict(data):
    kind = data.get("kind")
    if kind not in _FIELDS:
        raise RejectedInput(f"unknown process kind {kind!r}")
    unknown = set(data) - _FIELDS[kind]
    if unknown:
        raise RejectedInput(f"unknown fields for {kind}: {sorted(unknown)}")
    missing = _FIELDS[kind] - set(data) - {"n"}
    if missing:
        raise RejectedInput(f"missing fields for {kind}: {sorted(missing)}")
    if kind == "three_peak":
        spec = ThreePeakSpec(as_complex_vec(data["gamma"], name="gamma"), data["sigma"], data["epsilon0"])
    elif kind == "gaussian":
        if "n" not in data:
            raise RejectedInput("gaussian spec needs n")
        spec = GaussianSpec(int(data["n"]), data["sigma"])
    else:
        spec = FixedSpec(as_complex_vec(data["alpha0"], name="alpha0"))
    if "n" in data and int(data["n"]) != mode_count(spec):
        raise RejectedInput("n disagrees with vector length")
    return spec


def spec_to_json(spec):
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text):
    return spec_from_dict(json.loads(text))
