"""Bell-measurement record simulation.

Outcome law for one sample of an n-mode process::

    alpha ~ process
    zeta_j = A (Re alpha_j, Im alpha_j) + nu_j,   nu_j quadratures i.i.d. N(0, v)
    v = exp(-2 r_eff) / 2 * noise_scale

The per-quadrature variance ``exp(-2 r_eff)/2`` is the unique additive
Gaussian law that makes ``exp(exp(-2 r_eff)|beta|^2) exp(zeta^dag beta - beta^dag zeta)``
unbiased for lambda(beta).  ``r_eff = 0`` is the heterodyne (no entanglement)
case, ``r_eff -> inf`` the noiseless limit.

Simulation is chunked: chunk ``c`` of a batch draws from the stream
``(seed, SIMULATE, c)`` so output is independent of thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import streams
from .errors import RejectedInput
from .process import mode_count, sample_displacements

__all__ = [
    "SqueezingSpec",
    "DriftModel",
    "PilotTag",
    "BellRecord",
    "RecordSet",
    "effective_squeezing",
    "noise_factor",
    "db_for_noise_factor",
    "rotation",
    "apply_affine",
    "simulate_bell_batch",
    "iter_bell_chunks",
    "inject_pilots",
    "CHUNK",
]

CHUNK = 1 << 14


@dataclass(frozen=True)
class SqueezingSpec:
    squeezing_db: float
    transmissivity: float = 1.0

    def __post_init__(self):
        if not self.squeezing_db >= 0:
            raise RejectedInput("squeezing_db must be >= 0")
        if not 0.0 < self.transmissivity <= 1.0:
            raise RejectedInput("transmissivity must lie in (0, 1]")

    @property
    def exp_minus_2r(self):
        return 10.0 ** (-self.squeezing_db / 10.0)

    @classmethod
    def from_r_eff(cls, r_eff):
        """Lossless spec with the given effective squeezing."""
        return cls(db_for_noise_factor(noise_factor(r_eff)))


def effective_squeezing(squeezing):
    """r_eff = -1/2 log(exp(-2r) + (1 - T)/T)."""
    t = squeezing.transmissivity
    if not t > 0:
        raise RejectedInput("transmissivity must be positive")
    inner = squeezing.exp_minus_2r + (1.0 - t) / t
    return math.inf if inner == 0.0 else -0.5 * math.log(inner)


def noise_factor(r_eff):
    """exp(-2 r_eff), with r_eff = inf mapping to 0."""
    return 0.0 if math.isinf(r_eff) and r_eff > 0 else math.exp(-2.0 * r_eff)


def db_for_noise_factor(factor):
    return math.inf if factor == 0.0 else -10.0 * math.log10(factor)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class DriftModel:
    affine: np.ndarray = field(default_factory=lambda: np.eye(2))
    noise_scale: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.affine, dtype=float)
        if a.shape != (2, 2) or not np.all(np.isfinite(a)):
            raise RejectedInput("affine must be a finite 2x2 matrix")
        if abs(np.linalg.det(a)) == 0.0:
            raise RejectedInput("affine must be invertible")
        if not self.noise_scale >= 0:
            raise RejectedInput("noise_scale must be >= 0")
        object.__setattr__(self, "affine", a)

    @property
    def is_identity(self):
        return bool(np.array_equal(self.affine, np.eye(2)))


def apply_affine(affine, z):
    """Apply a 2x2 real matrix to the (Re, Im) pair of every complex entry."""
    if np.array_equal(affine, np.eye(2)):
        return z
    x, p = z.real, z.imag
    return (affine[0, 0] * x + affine[0, 1] * p) + 1j * (affine[1, 0] * x + affine[1, 1] * p)


class PilotTag(IntEnum):
    NONE = 0
    PILOT_X = 1
    PILOT_P = 2

    @property
    def label(self):
        return {0: "none", 1: "pilot_x", 2: "pilot_p"}[int(self)]

    @classmethod
    def parse(cls, text):
        return {"none": cls.NONE, "": cls.NONE, "pilot_x": cls.PILOT_X, "pilot_p": cls.PILOT_P}[text]


@dataclass(frozen=True, eq=False)
class BellRecord:
    zeta: np.ndarray
    sample_index: int
    pilot_tag: PilotTag = PilotTag.NONE


@dataclass(frozen=True, eq=False)
class RecordSet:
    """Columnar store of Bell records: ``zeta`` has shape (N, n)."""

    zeta: np.ndarray
    sample_index: np.ndarray = None
    pilot_tag: np.ndarray = None

    def __post_init__(self):
        zeta = np.asarray(self.zeta, dtype=np.complex128)
        if zeta.ndim != 2:
            raise RejectedInput("zeta must have shape (N, n)")
        count = zeta.shape[0]
        idx = np.arange(count) if self.sample_index is None else np.asarray(self.sample_index, dtype=np.int64)
        tags = np.zeros(count, np.int8) if self.pilot_tag is None else np.asarray(self.pilot_tag, dtype=np.int8)
        if idx.shape != (count,) or tags.shape != (count,):
            raise RejectedInput("sample_index / pilot_tag length mismatch")
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "sample_index", idx)
        object.__setattr__(self, "pilot_tag", tags)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            raise RejectedInput("no records")
        return cls(
            np.stack([np.asarray(r.zeta, dtype=np.complex128) for r in records]),
            np.array([r.sample_index for r in records]),
            np.array([int(r.pilot_tag) for r in records]),
        )

    @property
    def n(self):
        return self.zeta.shape[1]

    def __len__(self):
        return self.zeta.shape[0]

    def __iter__(self):
        for z, i, t in zip(self.zeta, self.sample_index, self.pilot_tag):
            yield BellRecord(z, int(i), PilotTag(int(t)))

    def __getitem__(self, i):
        return BellRecord(self.zeta[i], int(self.sample_index[i]), PilotTag(int(self.pilot_tag[i])))

    def data(self):
        """Outcomes of the ordinary (non-pilot) records."""
        mask = self.pilot_tag == PilotTag.NONE
        return self.zeta if mask.all() else self.zeta[mask]

    def pilots(self, tag):
        return self.zeta[self.pilot_tag == int(tag)]


def as_outcomes(records):
    """Return the (N, n) outcome array of the non-pilot records."""
    if isinstance(records, RecordSet):
        return records.data()
    if isinstance(records, np.ndarray):
        return records if records.ndim == 2 else records[None, :]
    return RecordSet.from_records(records).data()


def _noise_std(r_eff, drift):
    return math.sqrt(noise_factor(r_eff) / 2.0 * drift.noise_scale)


def _simulate_chunk(spec, r_eff, drift, size, rng):
    n = mode_count(spec)
    alpha = sample_displacements(spec, size, rng)
    zeta = apply_affine(drift.affine, alpha)
    std = _noise_std(r_eff, drift)
    if std > 0:
        zeta = zeta + std * (rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n)))
    return zeta


def _resolve_r_eff(squeezing):
    if isinstance(squeezing, SqueezingSpec):
        return effective_squeezing(squeezing)
    return float(squeezing)


def iter_bell_chunks(spec, squeezing, drift, N, seed, chunk=CHUNK, threads=1):
    """Yield ``(start, zeta_chunk)`` pairs covering ``N`` simulated samples.

    ``squeezing`` is a :class:`SqueezingSpec` or an effective squeezing value.
    """
    r_eff = _resolve_r_eff(squeezing)
    drift = drift if drift is not None else DriftModel()
    starts = list(range(0, int(N), chunk))

    def job(c):
        size = min(chunk, int(N) - starts[c])
        return _simulate_chunk(spec, r_eff, drift, size, streams.child_rng(seed, streams.SIMULATE, c))

    if threads <= 1:
        for c, start in enumerate(starts):
            yield start, job(c)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves chunk order; window keeps memory bounded
        for lo in range(0, len(starts), 4 * threads):
            ids = range(lo, min(lo + 4 * threads, len(starts)))
            for c, z in zip(ids, pool.map(job, ids)):
                yield starts[c], z


def simulate_bell_batch(spec, squeezing, drift, N, seed, threads=1, chunk=CHUNK):
    """Simulate ``N`` Bell records.

    Parameters
    ----------
    spec : ProcessSpec
    squeezing : SqueezingSpec or float
        Either the source description or ``r_eff`` directly.
    drift : DriftModel or None
    N : int
    seed : int, SeedSequence or Generator
        Master seed; the output depends only on it (and ``chunk``).

    Returns
    -------
    RecordSet
    """
    if N < 1:
        raise RejectedInput("N must be >= 1")
    out = np.empty((int(N), mode_count(spec)), dtype=np.complex128)
    for start, z in iter_bell_chunks(spec, squeezing, drift, N, seed, chunk=chunk, threads=threads):
        out[start : start + z.shape[0]] = z
    return RecordSet(out)


def inject_pilots(records, period, amplitude, seed, squeezing, drift):
    """Interleave known-displacement pilot records.

    Every ``period``-th slot of the output stream is a pilot, alternating
    x (``amplitude + 0i`` on every mode) and p (``0 + amplitude i``).  Pilots go
    through the same drift and noise law as the data.  Data records keep their
    outcomes; ``sample_index`` is renumbered to the output slot.
    """
    if period < 2:
        raise RejectedInput("period must be >= 2")
    records = records if isinstance(records, RecordSet) else RecordSet.from_records(records)
    n_data = len(records)
    n_pilot = n_data // (period - 1)
    total = n_data + n_pilot
    slots = np.arange(total)
    is_pilot = (slots + 1) % period == 0
    r_eff = _resolve_r_eff(squeezing)
    drift = drift if drift is not None else DriftModel()
    rng = streams.child_rng(seed, streams.PILOTS)
    n = records.n
    tags = np.where(np.arange(n_pilot) % 2 == 0, PilotTag.PILOT_X, PilotTag.PILOT_P).astype(np.int8)
    known = np.where(tags == PilotTag.PILOT_X, amplitude + 0j, 1j * amplitude)
    pilot_zeta = apply_affine(drift.affine, np.repeat(known[:, None], n, axis=1))
    std = _noise_std(r_eff, drift)
    if std > 0 and n_pilot:
        pilot_zeta = pilot_zeta + std * (
            rng.standard_normal((n_pilot, n)) + 1j * rng.standard_normal((n_pilot, n))
        )
    zeta = np.empty((total, n), dtype=np.complex128)
    tag_col = np.zeros(total, dtype=np.int8)
    zeta[~is_pilot] = records.zeta
    zeta[is_pilot] = pilot_zeta
    tag_col[is_pilot] = tags
    # any pilot tags already present in the input are preserved
    tag_col[~is_pilot] = records.pilot_tag
    return RecordSet(zeta, slots, tag_col)
