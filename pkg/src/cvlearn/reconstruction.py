"""(eps, delta)-close reconstruction and its Monte Carlo sample complexity.

Along a slice ``beta = b * d`` the estimator only needs the scalar projection
``Im(zeta^dag d)`` of every record, so pools store those projections
(:class:`SlicePool`) instead of full outcome vectors.  A 100-mode pool of
10^7 samples then fits in memory.

The complexity search follows the resampling scheme: start from the
Hoeffding bound, and per round draw K resamples (with replacement) of size
N, score the fraction whose slice stays within eps of the truth on the whole
grid, then shrink N by e/3 if that fraction reaches 1 - delta and grow it by
e/2 otherwise.  Values after round 10 form the trail.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import streams
from ._kernels import grid_phase_sums
from .bounds import hoeffding_upper
from .errors import RejectedInput
from .estimator import phase_projection
from .measurement import CHUNK, as_outcomes, iter_bell_chunks, noise_factor
from .process import as_complex_vec, char_fn, mode_count

__all__ = [
    "ReconSpec",
    "ComplexityEstimate",
    "SlicePool",
    "PoolExhaustionWarning",
    "peak_direction",
    "slice_grid",
    "slice_truth",
    "eps_close_check",
    "slice_deviation",
    "success_fraction",
    "sample_complexity_recon",
    "complexity_uncertainty",
    "sweep_directions",
    "direction_sweep",
]

SHRINK = math.e / 3
GROW = math.e / 2


class PoolExhaustionWarning(UserWarning):
    """The resample size exceeded the pool size."""


@dataclass(frozen=True)
class ReconSpec:
    epsilon: float = 0.24
    delta: float = 1 / 3
    b_max: float = 0.3
    grid_step: float = 0.01
    repeats: int = 25
    max_rounds: int = 35
    keep_last: int = 25
    # Coarse x2 / /2 bracketing of the Hoeffding start before the rounds;
    # 0 disables it.
    warm_start_steps: int = 40

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise RejectedInput("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise RejectedInput("delta must lie in (0, 1)")
        if self.keep_last > self.max_rounds - 10:
            raise RejectedInput("keep_last must be <= max_rounds - 10")
        if self.repeats < 1 or self.grid_step <= 0 or self.b_max < 0:
            raise RejectedInput("invalid repeats / grid")


@dataclass
class ComplexityEstimate:
    mean_N: float
    std_N: float
    trail: list
    N_max: int = None
    initial_N: float = None
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "mean_N": self.mean_N,
            "std_N": self.std_N,
            "trail": list(self.trail),
            "N_max": self.N_max,
            "initial_N": self.initial_N,
            "warnings": list(self.warnings),
        }


def peak_direction(n):
    """Slice direction (1 + i)(1, ..., 1): b = 0.3 lands on gamma = 0.3(1 + i)."""
    return np.full(n, 1.0 + 1.0j)


def slice_grid(b_max, step):
    count = int(round(b_max / step)) + 1
    return np.arange(count) * step


def slice_truth(spec, direction, b_grid):
    direction = as_complex_vec(direction, n=mode_count(spec), name="direction")
    b_grid = np.asarray(b_grid, dtype=float)
    return np.asarray(char_fn(spec, b_grid[:, None] * direction[None, :]), dtype=np.complex128)


def eps_close_check(curve, truth, epsilon):
    """True iff ``max |curve - truth| < epsilon`` (strict) over the grid.

    ``curve`` may be a list of ``(b, value)`` pairs or plain values.
    """
    vals = [v[1] if isinstance(v, tuple) else v for v in curve]
    if len(vals) != len(truth):
        raise RejectedInput("curve and truth are not on the same grid")
    dev = np.abs(np.asarray(vals, dtype=np.complex128) - np.asarray(truth, dtype=np.complex128))
    return bool(np.max(dev) < epsilon)


class SlicePool:
    """Record pool reduced to phase projections on a fixed set of directions.

    Parameters
    ----------
    proj : ndarray, shape (N_max, m)
        ``Im(zeta_i^dag d_j)``.
    directions : dict
        Label -> direction vector, in column order.
    """

    def __init__(self, proj, directions):
        proj = np.asarray(proj, dtype=np.float64)
        if proj.ndim == 1:
            proj = proj[:, None]
        if proj.shape[1] != len(directions):
            raise RejectedInput("one projection column per direction")
        self.proj = proj
        self.labels = list(directions)
        self.directions = [np.asarray(directions[k], dtype=np.complex128) for k in self.labels]
        self.norm_sq = np.array([float(np.vdot(d, d).real) for d in self.directions])

    @property
    def size(self):
        return self.proj.shape[0]

    def column(self, label):
        return self.labels.index(label)

    @classmethod
    def from_records(cls, records, directions):
        zeta = as_outcomes(records)
        directions = _as_direction_dict(directions, zeta.shape[1])
        mat = np.stack(list(directions.values()), axis=1)
        return cls(phase_projection(zeta, mat), directions)

    @classmethod
    def simulate(cls, spec, squeezing, drift, N, seed, directions, threads=1, chunk=CHUNK):
        """Simulate ``N`` records and keep only their projections."""
        directions = _as_direction_dict(directions, mode_count(spec))
        mat = np.stack(list(directions.values()), axis=1)
        proj = np.empty((int(N), mat.shape[1]))
        for start, z in iter_bell_chunks(spec, squeezing, drift, N, seed, chunk=chunk, threads=threads):
            proj[start : start + z.shape[0]] = phase_projection(z, mat)
        return cls(proj, directions)


def _as_direction_dict(directions, n):
    if isinstance(directions, dict):
        items = directions.items()
    else:
        items = enumerate(directions)
    out = {}
    for k, d in items:
        d = as_complex_vec(d, n=n, name="direction")
        if not np.any(d):
            raise RejectedInput("direction must be nonzero")
        out[k] = d
    return out


def _draw_indices(rng, pool_size, count, chunk=1 << 22):
    for lo in range(0, count, chunk):
        yield rng.integers(0, pool_size, size=min(chunk, count - lo))


def slice_deviation(pool, col, N, b_grid, r_eff, truth, rng):
    """Sup-norm error of one size-``N`` resampled slice estimate."""
    b_grid = np.asarray(b_grid, dtype=float)
    step = b_grid[1] - b_grid[0] if b_grid.size > 1 else 0.0
    uniform = b_grid.size < 3 or np.allclose(np.diff(b_grid), step, rtol=0, atol=1e-12)
    proj = pool.proj[:, col]
    sums = np.zeros(b_grid.size, dtype=np.complex128)
    for idx in _draw_indices(rng, pool.size, N):
        if uniform:
            sums += grid_phase_sums(proj, idx, b_grid[0], step, b_grid.size)
        else:
            p = proj[idx]
            sums += np.exp(2j * np.outer(b_grid, p)).sum(axis=1)
    pref = np.exp(noise_factor(r_eff) * pool.norm_sq[col] * b_grid**2)
    est = pref * sums / N
    return float(np.max(np.abs(est - truth)))


def success_fraction(pool, col, N, spec, truth, r_eff, rng):
    """Fraction of ``spec.repeats`` resamples that are eps-close on the grid."""
    b_grid = slice_grid(spec.b_max, spec.grid_step)
    hits = 0
    for _ in range(spec.repeats):
        if slice_deviation(pool, col, N, b_grid, r_eff, truth, rng) < spec.epsilon:
            hits += 1
    return hits / spec.repeats


def complexity_uncertainty(trail, N_max):
    """Finite-pool corrected spread ``sqrt(N_max / (N_max - mean)) * std(trail)``."""
    trail = np.asarray(trail, dtype=float)
    mean = float(trail.mean())
    spread = float(trail.std())
    if math.isinf(N_max):
        return spread
    if mean >= N_max:
        raise RejectedInput("mean sample size reaches the pool size; correction undefined")
    return math.sqrt(N_max / (N_max - mean)) * spread


def _as_size(N):
    return max(1, int(round(N)))


def _warm_start(N, score, target, steps, max_N=None):
    # Move by factors of two until the success fraction changes side;
    # upward moves stop at max_N.
    if steps <= 0:
        return N
    above = score(N) >= target
    for _ in range(steps):
        nxt = N / 2 if above else N * 2
        if max_N is not None and nxt > max_N:
            return N
        nxt_above = score(nxt) >= target
        if nxt_above != above:
            return nxt if not nxt_above else N
        if _as_size(nxt) == 1 and above:
            return nxt
        N = nxt
    return N


def adaptive_complexity(score, initial_N, target, max_rounds, keep_last, warm_start_steps, max_N=None):
    """Multiplicative search shared by the reconstruction and game algorithms.

    ``score(N)`` returns a success fraction; returns the recorded trail.
    ``max_N`` caps the upward bracketing of the warm start (not the rounds).
    """
    N = _warm_start(float(initial_N), score, target, warm_start_steps, max_N)
    trail = []
    for j in range(1, max_rounds + 1):
        N = N * SHRINK if score(N) >= target else N * GROW
        if j > max_rounds - keep_last:
            trail.append(N)
    return trail


def sample_complexity_recon(pool, spec, truth_spec, r_eff, seed, column=0, N_max=None):
    """Sample complexity of (eps, delta)-close reconstruction along a slice.

    Parameters
    ----------
    pool : SlicePool or RecordSet
        Records to resample.  A RecordSet is projected on the peak direction.
    spec : ReconSpec
    truth_spec : ProcessSpec
        Ground truth; the reference curve is its closed-form lambda.
    r_eff : float
    seed : int
    column : label of the pool direction to use.

    Returns
    -------
    ComplexityEstimate
    """
    if not isinstance(pool, SlicePool):
        pool = SlicePool.from_records(pool, {0: peak_direction(mode_count(truth_spec))})
    col = pool.column(column) if column in pool.labels else int(column)
    direction = pool.directions[col]
    b_grid = slice_grid(spec.b_max, spec.grid_step)
    truth = slice_truth(truth_spec, direction, b_grid)
    beta0_sq = pool.norm_sq[col] * spec.b_max**2
    initial = float(hoeffding_upper(r_eff, beta0_sq, spec.epsilon, spec.delta))
    rng = streams.child_rng(seed, streams.RESAMPLE)
    peak = [0]

    def score(N):
        size = _as_size(N)
        peak[0] = max(peak[0], size)
        return success_fraction(pool, col, size, spec, truth, r_eff, rng)

    # the bound is a provable upper value, so the warm start never climbs past it
    trail = adaptive_complexity(
        score, initial, 1 - spec.delta, spec.max_rounds, spec.keep_last, spec.warm_start_steps, initial
    )
    N_max = pool.size if N_max is None else N_max
    notes = []
    if peak[0] > N_max:
        msg = f"resample size reached {peak[0]} > pool size {N_max}"
        notes.append(msg)
        warnings.warn(msg, PoolExhaustionWarning, stacklevel=2)
    mean = float(np.mean(trail))
    try:
        std = complexity_uncertainty(trail, N_max)
    except RejectedInput:
        std = float(np.std(trail))
        notes.append("mean_N >= N_max: finite-pool correction skipped")
    return ComplexityEstimate(mean, std, trail, int(N_max), initial, notes)


def sweep_directions(reference, overlaps, rng, per_overlap=1):
    """Directions with prescribed overlap to ``reference``.

    For overlap ``o`` a direction is ``o u + sqrt(1 - o^2) v`` with ``u`` the unit
    reference and ``v`` a random unit vector orthogonal to it; overlap 0 draws a
    uniformly random direction instead.  All are scaled to ``|reference|``.
    Returns ``{(o, k): direction}``.
    """
    reference = as_complex_vec(reference, name="reference")
    n = reference.size
    norm = math.sqrt(float(np.vdot(reference, reference).real))
    u = reference / norm
    out = {}
    for o in overlaps:
        if not 0.0 <= o <= 1.0:
            raise RejectedInput("overlap must lie in [0, 1]")
        for k in range(per_overlap):
            g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            if o == 0.0:
                d = g / np.linalg.norm(g)
            else:
                v = g - np.vdot(u, g) * u
                v /= np.linalg.norm(v)
                d = o * u + math.sqrt(max(0.0, 1.0 - o * o)) * v
            out[(float(o), k)] = norm * d
    return out


def direction_sweep(pool, overlaps, N, spec, truth_spec, r_eff, seed, per_overlap=1, repeats=None):
    """Success probability of eps-close reconstruction along other directions.

    ``pool`` is either a RecordSet (directions are drawn here from ``seed``) or
    a SlicePool built over :func:`sweep_directions` labels ``(overlap, k)``.
    Resample ``r`` uses direction ``k = r mod per_overlap``.

    Returns a list of ``(overlap, success, stderr)``.
    """
    if not isinstance(pool, SlicePool):
        n = as_outcomes(pool).shape[1]
        dirs = sweep_directions(peak_direction(n), overlaps, streams.child_rng(seed, streams.SWEEP), per_overlap)
        pool = SlicePool.from_records(pool, dirs)
    repeats = spec.repeats if repeats is None else repeats
    b_grid = slice_grid(spec.b_max, spec.grid_step)
    size = _as_size(N)
    results = []
    for i, o in enumerate(overlaps):
        rng = streams.child_rng(seed, streams.RESAMPLE, i)
        cols = [pool.column((float(o), k)) for k in range(per_overlap)]
        truths = [slice_truth(truth_spec, pool.directions[c], b_grid) for c in cols]
        hits = 0
        for r in range(repeats):
            k = r % per_overlap
            if slice_deviation(pool, cols[k], size, b_grid, r_eff, truths[k], rng) < spec.epsilon:
                hits += 1
        p = hits / repeats
        results.append((float(o), p, math.sqrt(p * (1 - p) / repeats)))
    return results
