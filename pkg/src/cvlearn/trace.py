"""Time-domain layer: temporal modes, quadrature extraction and calibration.

Mode ``k`` occupies the window ``|t - k tau - delay| < tau / 2`` and has the
shape ``cos(2 pi f_sb u) exp(-kappa^2 u^2 / 2)`` with ``u = t - k tau - delay``.
Windows are disjoint, so different modes are exactly orthogonal on any
sample grid.

Extraction is a rectangle-rule projection onto the sampled mode function,
normalised by the mode energy, so a trace ``d f_k(t)`` yields exactly ``d``.
``vacuum_scale`` then maps raw units to vacuum units (variance 1/2).
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .errors import RejectedInput

__all__ = [
    "ModeFunctionSpec",
    "TimeTrace",
    "DEFAULT_SAMPLE_RATE",
    "mode_function",
    "mode_assignment",
    "extract_quadratures",
    "vacuum_noise_std",
    "calibrate_vacuum_scale",
    "synth_trace",
    "estimate_delay",
    "calibrate_crosstalk",
    "crosstalk_correction",
    "precompensate",
    "write_trace",
    "read_trace",
    "write_trace_csv",
    "read_trace_csv",
]

DEFAULT_SAMPLE_RATE = 100e6


@dataclass(frozen=True)
class ModeFunctionSpec:
    sideband_hz: float = 3.8e6
    envelope_kappa_rad_s: float = 2 * math.pi * 1e6
    mode_duration_s: float = 1e-6

    def __post_init__(self):
        if not (self.sideband_hz > 0 and self.envelope_kappa_rad_s > 0 and self.mode_duration_s > 0):
            raise RejectedInput("mode function parameters must be positive")
        if self.envelope_fwhm_s >= self.mode_duration_s:
            raise RejectedInput("envelope FWHM must be shorter than the mode duration")

    @property
    def envelope_fwhm_s(self):
        # amplitude envelope exp(-kappa^2 t^2 / 2)
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) / self.envelope_kappa_rad_s


@dataclass(frozen=True, eq=False)
class TimeTrace:
    sample_rate_hz: float
    samples: np.ndarray
    t0_offset_s: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise RejectedInput("samples must be 1-D")
        if not self.sample_rate_hz > 0:
            raise RejectedInput("sample_rate_hz must be positive")
        if not np.all(np.isfinite(s)):
            raise RejectedInput("samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    @property
    def times(self):
        return self.t0_offset_s + np.arange(self.samples.size) / self.sample_rate_hz


def _check_rate(rate, spec):
    if rate < 10 * spec.sideband_hz:
        raise RejectedInput("sample rate must be at least 10x the sideband frequency")


def _shape(spec, u):
    return np.cos(2 * np.pi * spec.sideband_hz * u) * np.exp(-0.5 * (spec.envelope_kappa_rad_s * u) ** 2)


def _window_value(spec, s):
    # s is the offset from the mode centre in units of tau; the tolerance keeps
    # samples that land on the boundary up to rounding outside the window
    inside = np.abs(s) < 0.5 - 1e-9
    return np.where(inside, _shape(spec, s * spec.mode_duration_s), 0.0)


def mode_function(spec, k, t):
    """``f_k(t)``; exactly zero outside ``|t - k tau| < tau / 2``."""
    out = _window_value(spec, np.asarray(t, dtype=float) / spec.mode_duration_s - k)
    return float(out) if out.ndim == 0 else out


def mode_assignment(spec, t, delay_s=0.0):
    """Mode index and mode-function value for every time point.

    Each sample belongs to at most one window; ``value`` is 0 on the
    excluded boundary.
    """
    s = (np.asarray(t, dtype=float) - delay_s) / spec.mode_duration_s
    k = np.floor(s + 0.5).astype(np.int64)
    return k, _window_value(spec, s - k)


def _complete_modes(trace, spec, delay_s):
    tau = spec.mode_duration_s
    dt = 1.0 / trace.sample_rate_hz
    t_first = trace.t0_offset_s
    t_last = t_first + (len(trace) - 1) * dt
    tol = 1e-6 * dt
    k_lo = math.ceil((t_first - delay_s + tau / 2 - tol) / tau)
    k_hi = math.floor((t_last - delay_s - tau / 2 + dt + tol) / tau)
    return k_lo, k_hi


def extract_quadratures(trace, spec, delay_s=0.0, vacuum_scale=1.0):
    """One quadrature per complete mode window, in window order.

    Returns
    -------
    ndarray
        ``vacuum_scale * sum(f_k q) / sum(f_k^2)`` for each complete mode.
    """
    _check_rate(trace.sample_rate_hz, spec)
    k_lo, k_hi = _complete_modes(trace, spec, delay_s)
    if k_hi < k_lo:
        warnings.warn("trace shorter than one mode window", RuntimeWarning, stacklevel=2)
        return np.empty(0)
    k, f = mode_assignment(spec, trace.times, delay_s)
    keep = (k >= k_lo) & (k <= k_hi)
    pos = k[keep] - k_lo
    count = k_hi - k_lo + 1
    num = np.bincount(pos, weights=f[keep] * trace.samples[keep], minlength=count)
    den = np.bincount(pos, weights=f[keep] ** 2, minlength=count)
    return vacuum_scale * num / den


def _mode_energy(spec, sample_rate_hz):
    # sum of f_0^2 over one window on a grid aligned with the mode centre
    dt = 1.0 / sample_rate_hz
    half = spec.mode_duration_s / 2
    j = np.arange(-math.ceil(half / dt), math.ceil(half / dt) + 1)
    return float(np.sum(mode_function(spec, 0, j * dt) ** 2))


def vacuum_noise_std(spec, sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """White-noise std per sample that yields quadrature variance 1/2 at unit scale."""
    return math.sqrt(0.5 * _mode_energy(spec, sample_rate_hz))


def calibrate_vacuum_scale(vacuum_trace, spec, delay_s=0.0):
    """Scale making the extracted quadratures of a vacuum segment have variance 1/2."""
    q = extract_quadratures(vacuum_trace, spec, delay_s)
    if q.size < 2:
        raise RejectedInput("vacuum segment needs at least two modes")
    return math.sqrt(0.5 / np.var(q))


def synth_trace(displacements, which_quadrature, spec, noise_std, delay_s, crosstalk, rng,
                sample_rate_hz=DEFAULT_SAMPLE_RATE, t0_offset_s=None, n_samples=None):
    """Homodyne trace for a train of commanded displacements.

    The commanded ``(x, p)`` of every mode is mixed by ``crosstalk`` before
    synthesis; the trace is ``sum_k a_k f_k(t - delay)`` plus white noise,
    where ``a_k`` is the requested quadrature of the mixed pair.  By
    default the trace starts half a mode before mode 0 and covers every mode.
    """
    _check_rate(sample_rate_hz, spec)
    d = np.atleast_1d(np.asarray(displacements, dtype=np.complex128))
    c = np.asarray(crosstalk, dtype=float)
    if c.shape != (2, 2):
        raise RejectedInput("crosstalk must be 2x2")
    if which_quadrature not in ("x", "p"):
        raise RejectedInput("which_quadrature must be 'x' or 'p'")
    row = 0 if which_quadrature == "x" else 1
    amp = c[row, 0] * d.real + c[row, 1] * d.imag
    tau = spec.mode_duration_s
    t0 = -tau / 2 if t0_offset_s is None else t0_offset_s
    if n_samples is None:
        end = d.size * tau - tau / 2 + max(delay_s, 0.0)
        n_samples = int(math.ceil((end - t0) * sample_rate_hz))
    t = t0 + np.arange(n_samples) / sample_rate_hz
    k, f = mode_assignment(spec, t, delay_s)
    inside = (k >= 0) & (k < d.size)
    samples = np.zeros(n_samples)
    samples[inside] = amp[k[inside]] * f[inside]
    if noise_std > 0:
        samples = samples + noise_std * rng.standard_normal(n_samples)
    return TimeTrace(sample_rate_hz, samples, t0)


def estimate_delay(trace, spec):
    """Delay of mode 0 from the peak of ``|trace * f_0|`` cross-correlation.

    Returned on the sample grid, relative to ``t = 0``.
    """
    _check_rate(trace.sample_rate_hz, spec)
    if len(trace) == 0 or np.ptp(trace.samples) == 0.0:
        raise RejectedInput("flat trace: no correlation peak")
    dt = 1.0 / trace.sample_rate_hz
    half = math.ceil(spec.mode_duration_s / 2 / dt)
    template = mode_function(spec, 0, np.arange(-half, half + 1) * dt)
    c = correlate(trace.samples, template, mode="full")
    centre = int(np.argmax(np.abs(c))) - 2 * half + half
    shift = centre + trace.t0_offset_s * trace.sample_rate_hz
    if abs(shift - round(shift)) < 1e-6:
        shift = round(shift)
    return shift / trace.sample_rate_hz


def _slopes(sweep, name):
    sweep = np.asarray(sweep, dtype=float)
    if sweep.ndim != 2 or sweep.shape[1] != 3:
        raise RejectedInput(f"{name} sweep rows must be (amplitude, x, p)")
    if np.unique(sweep[:, 0]).size < 2:
        raise RejectedInput(f"{name} sweep needs at least two distinct amplitudes")
    sx = np.polyfit(sweep[:, 0], sweep[:, 1], 1)[0]
    sp = np.polyfit(sweep[:, 0], sweep[:, 2], 1)[0]
    return np.array([sx, sp])


def calibrate_crosstalk(im_sweep, pm_sweep=None):
    """Crosstalk matrix from amplitude sweeps of the two modulators.

    Column 0 holds the (x, p) response per unit IM (x) command, column 1 the
    response per unit PM (p) command.  Without a PM sweep the PM column is
    taken as ideal.
    """
    c = np.eye(2)
    c[:, 0] = _slopes(im_sweep, "IM")
    if pm_sweep is not None:
        c[:, 1] = _slopes(pm_sweep, "PM")
    return c


def crosstalk_correction(crosstalk):
    """Operator applied to commanded displacements to undo the crosstalk."""
    c = np.asarray(crosstalk, dtype=float)
    if abs(np.linalg.det(c)) < 1e-12:
        raise RejectedInput("crosstalk matrix is singular")
    return np.linalg.inv(c)


def precompensate(crosstalk, displacements):
    """Commands that produce ``displacements`` after the crosstalk."""
    m = crosstalk_correction(crosstalk)
    d = np.asarray(displacements, dtype=np.complex128)
    return (m[0, 0] * d.real + m[0, 1] * d.imag) + 1j * (m[1, 0] * d.real + m[1, 1] * d.imag)


# -- files ----------------------------------------------------------------------


def write_trace(path, trace):
    """JSON header line followed by little-endian float64 samples."""
    header = {"sample_rate_hz": trace.sample_rate_hz, "t0_offset_s": trace.t0_offset_s, "length": len(trace)}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(trace.samples.astype("<f8").tobytes())


def read_trace(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != header["length"]:
        raise RejectedInput("trace file length does not match its header")
    return TimeTrace(header["sample_rate_hz"], data.astype(np.float64), header["t0_offset_s"])


def write_trace_csv(path, trace):
    with open(path, "w") as fh:
        fh.write(f"# sample_rate_hz={trace.sample_rate_hz!r} t0_offset_s={trace.t0_offset_s!r}\n")
        fh.write("value\n")
        for v in trace.samples:
            fh.write(f"{float(v)!r}\n")


def read_trace_csv(path):
    with open(path) as fh:
        meta = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
        if fh.readline().strip() != "value":
            raise RejectedInput("trace CSV needs a 'value' column")
        values = [float(line) for line in fh if line.strip()]
    return TimeTrace(float(meta["sample_rate_hz"]), np.array(values), float(meta["t0_offset_s"]))
