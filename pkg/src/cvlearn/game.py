"""Dealer / challenger hypothesis-testing game.

The dealer prepares K processes, each either three-peak with peaks at
``+/- gamma_k`` or Gaussian with a fictional ``gamma_k``, and lets the
challenger use each process N times.  After ``gamma_k`` is revealed the
challenger evaluates ``lambda~(gamma_k)`` and calls three-peak iff the
statistic exceeds the threshold.

Blindness is structural: the challenger side only ever sees record pools
(:class:`GamePools`, projections on the revealed ``gamma_k``) and the gamma
list.  The hidden types live on :class:`GameInstance` and are read only by
the scoring functions.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from . import streams
from ._kernels import point_phase_sum
from .bounds import hoeffding_upper
from .errors import RejectedInput
from .estimator import estimate_char_fn, phase_projection
from .measurement import CHUNK, as_outcomes, iter_bell_chunks, noise_factor
from .process import GaussianSpec, ThreePeakSpec, as_complex_vec, draw_gamma, spec_to_dict
from .reconstruction import ComplexityEstimate, adaptive_complexity, complexity_uncertainty

__all__ = [
    "THREE_PEAK",
    "GAUSSIAN",
    "GameSpec",
    "GameInstance",
    "GamePools",
    "SuccessEstimate",
    "deal",
    "statistic_value",
    "classify",
    "classify_pools",
    "score",
    "process_success",
    "success_probability",
    "sample_complexity_hypo",
    "transcript",
]

THREE_PEAK = "three_peak"
GAUSSIAN = "gaussian"
STATISTICS = ("im", "abs")


@dataclass(frozen=True)
class GameSpec:
    n: int
    K: int = 16
    kappa: float = 0.2
    sigma: float = 0.3
    epsilon0: float = 0.25
    threshold: float = 0.25
    N: int = None
    balanced: bool = True
    statistic: str = "im"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1 or int(self.K) != self.K or self.K < 1:
            raise RejectedInput("n and K must be positive integers")
        if not self.kappa > 0 or not self.sigma > 0:
            raise RejectedInput("kappa and sigma must be positive")
        if not 0.0 < self.epsilon0 <= 0.25:
            raise RejectedInput("epsilon0 must lie in (0, 0.25]")
        if not 0.0 < self.threshold < 2 * self.epsilon0:
            raise RejectedInput("threshold must lie in (0, 2 epsilon0)")
        if self.statistic not in STATISTICS:
            raise RejectedInput(f"statistic must be one of {STATISTICS}")
        if self.N is not None and self.N < 1:
            raise RejectedInput("N must be >= 1")

    @property
    def sigma_gamma_sq(self):
        # 2 sigma_gamma^2 = 0.99 kappa
        return 0.99 * self.kappa / 2.0

    @property
    def beta0_sq(self):
        return self.kappa * self.n


@dataclass(frozen=True, eq=False)
class GameInstance:
    """Dealer-side description; ``types`` is the sealed ground truth."""

    specs: tuple
    types: tuple
    gammas: tuple

    def __post_init__(self):
        if not len(self.specs) == len(self.types) == len(self.gammas):
            raise RejectedInput("specs, types and gammas must have equal length")

    @property
    def K(self):
        return len(self.specs)


def deal(spec, rng):
    """Draw types and peak locations for ``spec.K`` processes.

    ``rng`` may be a Generator or a seed; with a seed the deal uses the
    ``DEAL`` stream.
    """
    if not isinstance(rng, np.random.Generator):
        rng = streams.child_rng(rng, streams.DEAL)
    K = spec.K
    if spec.balanced:
        is_peak = np.zeros(K, dtype=bool)
        is_peak[: K // 2] = True
        is_peak = rng.permutation(is_peak)
    else:
        is_peak = rng.random(K) < 0.5
    specs, types, gammas = [], [], []
    for k in range(K):
        g = draw_gamma(spec.n, spec.sigma_gamma_sq, rng)
        gammas.append(g)
        if is_peak[k]:
            specs.append(ThreePeakSpec(g, spec.sigma, spec.epsilon0))
            types.append(THREE_PEAK)
        else:
            specs.append(GaussianSpec(spec.n, spec.sigma))
            types.append(GAUSSIAN)
    return GameInstance(tuple(specs), tuple(types), tuple(gammas))


def statistic_value(lam, statistic="im"):
    if statistic == "im":
        return float(np.imag(lam))
    if statistic == "abs":
        return float(np.abs(lam))
    raise RejectedInput(f"statistic must be one of {STATISTICS}")


def classify(records, gamma, r_eff, threshold=0.25, statistic="im"):
    """Label one process from its records once ``gamma`` is revealed."""
    lam = estimate_char_fn(records, gamma, r_eff)
    return THREE_PEAK if statistic_value(lam, statistic) > threshold else GAUSSIAN


class GamePools:
    """Per-process record pools reduced to ``Im(zeta^dag gamma_k)``.

    Parameters
    ----------
    proj : ndarray, shape (K, N_max)
    gammas : sequence of complex vectors
    """

    def __init__(self, proj, gammas):
        proj = np.asarray(proj, dtype=np.float64)
        if proj.ndim != 2 or proj.shape[0] != len(gammas):
            raise RejectedInput("proj must have one row per process")
        self.proj = proj
        self.gammas = [as_complex_vec(g) for g in gammas]
        self.gamma_sq = np.array([float(np.vdot(g, g).real) for g in self.gammas])

    @property
    def K(self):
        return self.proj.shape[0]

    @property
    def N_max(self):
        return self.proj.shape[1]

    @classmethod
    def from_records(cls, record_sets, gammas):
        rows = [phase_projection(as_outcomes(r), as_complex_vec(g)) for r, g in zip(record_sets, gammas)]
        size = min(len(r) for r in rows)
        return cls(np.stack([r[:size] for r in rows]), gammas)

    @classmethod
    def simulate(cls, instance, squeezing, drift, N_max, seed, threads=1, chunk=CHUNK):
        """Run every process ``N_max`` times; process ``k`` uses stream ``(seed, k)``."""
        proj = np.empty((instance.K, int(N_max)))

        def job(k):
            sub = streams.seed_sequence(seed, k)
            g = instance.gammas[k]
            for start, z in iter_bell_chunks(instance.specs[k], squeezing, drift, N_max, sub, chunk=chunk):
                proj[k, start : start + z.shape[0]] = phase_projection(z, g)

        if threads <= 1:
            for k in range(instance.K):
                job(k)
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                list(ex.map(job, range(instance.K)))
        return cls(proj, instance.gammas)

    def resampled_statistics(self, k, N, R, r_eff, rng, statistic="im"):
        """``R`` values of the statistic from size-``N`` resamples of pool ``k``."""
        pref = math.exp(noise_factor(r_eff) * self.gamma_sq[k])
        row = self.proj[k]
        out = np.empty(R)
        for i in range(R):
            idx = rng.integers(0, self.N_max, size=N)
            out[i] = statistic_value(pref * point_phase_sum(row, idx) / N, statistic)
        return out


def classify_pools(pools, N, R, r_eff, seed, threshold=0.25, statistic="im", tag=0):
    """Challenger side: statistics and labels for ``R`` resamples per process.

    Returns ``(stats, labels)`` with shapes (K, R).
    """
    stats = np.empty((pools.K, R))
    for k in range(pools.K):
        rng = streams.child_rng(seed, streams.RESAMPLE, tag, k)
        stats[k] = pools.resampled_statistics(k, N, R, r_eff, rng, statistic)
    labels = np.where(stats > threshold, THREE_PEAK, GAUSSIAN)
    return stats, labels


def score(instance, labels):
    """Fraction of correct labels (dealer side)."""
    labels = np.asarray(labels)
    truth = np.asarray(instance.types)[:, None] if labels.ndim == 2 else np.asarray(instance.types)
    return float(np.mean(labels == truth))


def process_success(stats, threshold, is_three_peak):
    """Central-limit success probability from repeated statistic values."""
    stats = np.asarray(stats, dtype=float)
    mean = float(stats.mean())
    var = max(float(np.mean(stats**2) - mean**2), 0.0)
    sign = 1.0 if is_three_peak else -1.0
    if var == 0.0:
        z = mean - threshold
        return 0.5 if z == 0 else (1.0 if sign * z > 0 else 0.0)
    return 0.5 + sign * 0.5 * float(erf((mean - threshold) / math.sqrt(2.0 * var)))


@dataclass
class SuccessEstimate:
    P: float
    dP: float
    per_process: list
    per_process_dP: list
    raw: float
    stat_mean: list
    stat_std: list
    N: int
    notes: list = field(default_factory=list)

    def __iter__(self):
        yield self.P
        yield self.dP

    def as_dict(self):
        return {
            "P": self.P,
            "dP": self.dP,
            "raw": self.raw,
            "N": self.N,
            "per_process": list(self.per_process),
            "per_process_dP": list(self.per_process_dP),
            "stat_mean": list(self.stat_mean),
            "stat_std": list(self.stat_std),
            "notes": list(self.notes),
        }


def success_probability(instance, pools, N, spec, r_eff, seed, repeats=25):
    """Game-level success probability and its uncertainty.

    Per process, the R resampled statistics give ``P_k = 1/2 +/- 1/2 erf(...)``
    (sign from the true type) and ``dP_k = sqrt(P_k (1 - P_k) / R)
    sqrt(N / (N_max - N))``.  ``P`` is the mean of ``P_k`` and ``dP`` the
    root-sum-square of ``dP_k`` over K.  Raw classification accuracy is
    reported alongside.
    """
    if repeats < 2:
        raise RejectedInput("repeats must be >= 2")
    N = int(N)
    stats, labels = classify_pools(pools, N, repeats, r_eff, seed, spec.threshold, spec.statistic)
    notes = []
    if N >= pools.N_max:
        notes.append("N >= N_max: uncertainty undefined")
        corr = math.nan
    else:
        corr = math.sqrt(N / (pools.N_max - N))
    P_k, dP_k = [], []
    for k in range(instance.K):
        p = process_success(stats[k], spec.threshold, instance.types[k] == THREE_PEAK)
        P_k.append(p)
        dP_k.append(math.sqrt(p * (1.0 - p) / repeats) * corr)
    P = float(np.mean(P_k))
    dP = math.sqrt(sum(d * d for d in dP_k)) / instance.K
    return SuccessEstimate(
        P,
        dP,
        P_k,
        dP_k,
        score(instance, labels),
        stats.mean(axis=1).tolist(),
        stats.std(axis=1).tolist(),
        N,
        notes,
    )


def sample_complexity_hypo(pools, instance, spec, P_target, r_eff, seed, repeats=25,
                           max_rounds=35, keep_last=25, warm_start_steps=40):
    """Samples per process needed to win the game with probability ``P_target``.

    Each evaluation classifies ``K * repeats`` resamples of size N and
    compares the raw fraction of correct calls with ``P_target``.
    """
    if not 0.5 < P_target < 1.0:
        raise RejectedInput("P_target must lie in (0.5, 1)")
    initial = float(hoeffding_upper(r_eff, spec.beta0_sq, spec.epsilon0, 1.0 - P_target))
    calls = [0]

    def evaluate(N):
        size = max(1, int(round(N)))
        calls[0] += 1
        _, labels = classify_pools(
            pools, size, repeats, r_eff, seed, spec.threshold, spec.statistic, tag=calls[0]
        )
        return score(instance, labels)

    trail = adaptive_complexity(evaluate, initial, P_target, max_rounds, keep_last, warm_start_steps, initial)
    mean = float(np.mean(trail))
    notes = []
    try:
        std = complexity_uncertainty(trail, pools.N_max)
    except RejectedInput:
        std = float(np.std(trail))
        notes.append("mean_N >= N_max: finite-pool correction skipped")
    return ComplexityEstimate(mean, std, trail, pools.N_max, initial, notes)


def transcript(instance, spec, result=None, blind=False):
    """JSON-ready game transcript; the sealed section is last and dropped when blind."""
    out = {
        "spec": {
            "n": spec.n,
            "K": spec.K,
            "kappa": spec.kappa,
            "sigma": spec.sigma,
            "epsilon0": spec.epsilon0,
            "threshold": spec.threshold,
            "balanced": spec.balanced,
            "statistic": spec.statistic,
        },
        "gammas": [[[float(z.real), float(z.imag)] for z in g] for g in instance.gammas],
    }
    if result is not None:
        out["N"] = result.N
        out["stat_mean"] = result.stat_mean
        out["stat_std"] = result.stat_std
        if not blind:
            out["P"] = result.P
            out["dP"] = result.dP
            out["raw"] = result.raw
            out["per_process"] = result.per_process
    if not blind:
        out["sealed"] = {
            "types": list(instance.types),
            "specs": [spec_to_dict(s) for s in instance.specs],
        }
    return out
