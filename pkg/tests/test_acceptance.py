"""Exit criteria, each at its stated tolerance.

Run with ``pytest -m acceptance`` (criterion 9 also needs the slow suite) or
as a script; a pass/fail line per criterion is printed in the terminal summary.
"""

import math

import numpy as np
import pytest

from cvlearn import streams
from cvlearn.bounds import (
    SECONDS_PER_YEAR,
    acquisition_time,
    classical_lower,
    classical_success_bound,
    equivalent_classical_N,
    hoeffding_upper,
)
from cvlearn.estimator import estimate_char_fn, estimator_summands, reconstruct_slice
from cvlearn.game import GamePools, GameSpec, deal, sample_complexity_hypo, success_probability
from cvlearn.measurement import SqueezingSpec, effective_squeezing, simulate_bell_batch
from cvlearn.process import FixedSpec, GaussianSpec, ThreePeakSpec, char_fn
from cvlearn.reconstruction import (
    ReconSpec,
    SlicePool,
    direction_sweep,
    peak_direction,
    sample_complexity_recon,
    slice_grid,
    slice_truth,
    success_fraction,
    sweep_directions,
)
from cvlearn.trace import (
    ModeFunctionSpec,
    TimeTrace,
    calibrate_crosstalk,
    calibrate_vacuum_scale,
    estimate_delay,
    extract_quadratures,
    mode_assignment,
    synth_trace,
    vacuum_noise_std,
)

pytestmark = pytest.mark.acceptance

R_478 = effective_squeezing(SqueezingSpec(4.78))


def peak_spec(n):
    return ThreePeakSpec(np.full(n, 0.3 + 0.3j), 0.3, 0.25)


@pytest.fixture(scope="module")
def n30_squeezed_pool():
    # peak direction plus 8 directions per overlap for the sweep
    n = 30
    overlaps = [0.0, 0.4, 0.6, 0.8, 0.95]
    dirs = {"peak": peak_direction(n)}
    dirs.update(sweep_directions(peak_direction(n), overlaps, streams.child_rng(3, streams.SWEEP), per_overlap=8))
    pool = SlicePool.simulate(peak_spec(n), R_478, None, 1_000_000, 1, dirs)
    return pool, overlaps


def test_criterion_01_estimator_unbiased(record_property):
    rng = np.random.default_rng(2024)
    processes = [
        peak_spec(3),
        GaussianSpec(4, 0.3),
        FixedSpec([0.4 - 0.2j, -0.1 + 0.3j, 0.25, 0.5j, -0.3]),
    ]
    settings = [SqueezingSpec(0.0), SqueezingSpec(4.78), SqueezingSpec(6.0, transmissivity=0.9)]
    hits = total = 0
    for i, spec in enumerate(processes):
        n = 3 if i == 0 else (4 if i == 1 else 5)
        for j, sq in enumerate(settings):
            r = effective_squeezing(sq)
            rs = simulate_bell_batch(spec, sq, None, 1_000_000, streams.seed_sequence(2024, i, j))
            betas = [rng.normal(scale=0.35, size=n) + 1j * rng.normal(scale=0.35, size=n) for _ in range(10)]
            if i == 0:
                betas[0], betas[1] = spec.gamma, -0.5 * spec.gamma
            for beta in betas:
                terms = estimator_summands(rs, beta, r)
                se = math.sqrt(np.mean(np.abs(terms - terms.mean()) ** 2) / terms.size)
                err = abs(estimate_char_fn(rs, beta, r) - char_fn(spec, beta))
                hits += err < 3 * se
                total += 1
    frac = hits / total
    record_property("within_3se", f"{hits}/{total}")
    assert frac >= 0.95


def test_criterion_02_divergence_n16(record_property):
    n = 16
    spec = peak_spec(n)
    d = peak_direction(n)
    # N=200: 100 independent blocks
    z = simulate_bell_batch(spec, 0.0, None, 200 * 100, 16).zeta
    wide = slice_grid(0.5, 0.01)
    exceed = 0
    for blk in range(100):
        curve = reconstruct_slice(z[blk * 200 : (blk + 1) * 200], d, wide, 0.0)
        exceed += max(abs(v) for _, v in curve) > 1.5
    # N=1e5: resampled eps-closeness on [0, 0.3]
    pool = SlicePool.simulate(spec, 0.0, None, 1_000_000, 17, {0: d})
    rspec = ReconSpec(repeats=100)
    truth = slice_truth(spec, d, slice_grid(rspec.b_max, rspec.grid_step))
    p = success_fraction(pool, 0, 100_000, rspec, truth, 0.0, streams.child_rng(16, streams.RESAMPLE))
    record_property("exceed_1.5_at_N200", f"{exceed}/100")
    record_property("success_at_N1e5", p)
    assert exceed > 90
    assert p >= 2 / 3


def test_criterion_03_squeezing_rescue_n30(record_property, n30_squeezed_pool):
    n = 30
    spec = peak_spec(n)
    rspec = ReconSpec(repeats=100)
    truth = slice_truth(spec, peak_direction(n), slice_grid(rspec.b_max, rspec.grid_step))
    vac = SlicePool.simulate(spec, 0.0, None, 1_000_000, 30, {0: peak_direction(n)})
    p_vac = success_fraction(vac, 0, 100_000, rspec, truth, 0.0, streams.child_rng(30, streams.RESAMPLE))
    sq, _ = n30_squeezed_pool
    p_sq = success_fraction(sq, sq.column("peak"), 100_000, rspec, truth, R_478, streams.child_rng(31, streams.RESAMPLE))
    record_property("failure_0dB", 1 - p_vac)
    record_property("success_4.78dB", p_sq)
    assert 1 - p_vac > 0.5
    assert p_sq >= 2 / 3


def test_criterion_04_complexity_scaling(record_property):
    ns = [4, 8, 12, 16]
    slopes = {}
    for db in (0.0, 4.78):
        r = effective_squeezing(SqueezingSpec(db))
        means = []
        for n in ns:
            pool = SlicePool.simulate(peak_spec(n), r, None, 400_000, n, {0: peak_direction(n)})
            means.append(sample_complexity_recon(pool, ReconSpec(), peak_spec(n), r, 7).mean_N)
        slopes[db] = np.polyfit(ns, np.log(means), 1)[0]
        record_property(f"mean_N_{db}dB", [round(m) for m in means])
    ratio = slopes[4.78] / slopes[0.0]
    record_property("slope_0dB", round(slopes[0.0], 4))
    record_property("slope_ratio", round(ratio, 4))
    assert abs(slopes[0.0] - 0.36) <= 0.25 * 0.36
    assert abs(ratio - 0.3327) <= 0.25 * 0.3327


def test_criterion_05_direction_sweep(record_property, n30_squeezed_pool):
    n = 30
    pool, overlaps = n30_squeezed_pool
    est = sample_complexity_recon(pool, ReconSpec(), peak_spec(n), R_478, 7, column="peak")
    res = direction_sweep(pool, overlaps, est.mean_N, ReconSpec(), peak_spec(n), R_478, 11, per_overlap=8, repeats=400)
    o = np.array([x[0] for x in res])
    p = np.array([x[1] for x in res])
    se = np.array([x[2] for x in res])
    # weighted least-squares slope of success vs overlap and its standard error
    w = 1 / se**2
    ob = np.sum(w * o) / np.sum(w)
    slope = np.sum(w * (o - ob) * p) / np.sum(w * (o - ob) ** 2)
    slope_se = 1 / math.sqrt(np.sum(w * (o - ob) ** 2))
    record_property("N", round(est.mean_N))
    record_property("success", [round(float(v), 3) for v in p])
    record_property("slope", f"{slope:.3f}+/-{slope_se:.3f}")
    assert abs(p[0] - 0.77) <= 0.10
    # non-increasing within two standard errors
    assert slope <= 2 * slope_se


def _mean_hypo_complexity(n, db, deals=4):
    r = effective_squeezing(SqueezingSpec(db))
    spec = GameSpec(n=n)
    means = []
    for s in range(1, deals + 1):
        inst = deal(spec, s)
        pools = GamePools.simulate(inst, r, None, 30_000, s)
        means.append(sample_complexity_hypo(pools, inst, spec, 2 / 3, r, 9).mean_N)
    return float(np.mean(means)), means


def test_criterion_06_hypothesis_complexity(record_property):
    m20, all20 = _mean_hypo_complexity(20, 4.9)
    m40, all40 = _mean_hypo_complexity(40, 4.87)
    record_property("n20_4.9dB", f"{m20:.1f} {np.round(all20, 1).tolist()}")
    record_property("n40_4.87dB", f"{m40:.1f} {np.round(all40, 1).tolist()}")
    assert 30 / 2 <= m20 <= 30 * 2
    assert 507 / 2 <= m40 <= 507 * 2


def test_criterion_07_provable_advantage(record_property):
    n = 60
    r = effective_squeezing(SqueezingSpec(4.95))
    spec = GameSpec(n=n)
    inst = deal(spec, 5)
    pools = GamePools.simulate(inst, r, None, 1_000_000, 5)
    res = success_probability(inst, pools, 100_000, spec, r, 3)
    bound = classical_success_bound(1e5, 0.25, 0.2, 0.3, n)
    record_property("P", round(res.P, 4))
    record_property("dP", round(res.dP, 4))
    record_property("bound", round(bound, 5))
    assert bound == pytest.approx(0.5014, abs=1e-4)
    assert res.P - bound >= 3 * res.dP


def test_criterion_08_golden_values(record_property):
    n_c = float(equivalent_classical_N(0.563, 0.25, 0.2, 0.3, 120))
    excess = classical_success_bound(1e5, 0.25, 0.2, 0.3, 120) - 0.5
    lower = float(classical_lower(1, 100, 0.18, 0.24, 0.0))
    years = acquisition_time(1.6e14, 120) / SECONDS_PER_YEAR
    record_property("N_c", f"{n_c:.3g}")
    record_property("excess", f"{excess:.3g}")
    record_property("lower", f"{lower:.3g}")
    record_property("years", f"{years:.0f}")
    assert 1.3e14 <= n_c <= 1.8e14
    assert 2.5e-11 <= excess <= 5.5e-11
    assert 2.5e12 <= lower <= 3.3e12
    assert years > 600


@pytest.mark.slow
def test_criterion_09_hundred_mode_run(record_property):
    n = 100
    pool = SlicePool.simulate(peak_spec(n), R_478, None, 10_000_000, 1, {0: peak_direction(n)})
    est = sample_complexity_recon(pool, ReconSpec(), peak_spec(n), R_478, 7)
    upper = float(hoeffding_upper(R_478, 0.18 * n, 0.24, 1 / 3))
    lower = float(classical_lower(1, n, 0.18, 0.24, 0.0))
    record_property("mean_N", f"{est.mean_N:.3g}")
    record_property("hoeffding", f"{upper:.3g}")
    record_property("lower/mean_N", f"{lower / est.mean_N:.3g}")
    assert est.mean_N <= upper
    assert lower / est.mean_N >= 1e5


def test_criterion_10_trace_pipeline(record_property):
    spec = ModeFunctionSpec()
    rate = 100e6
    eye = np.eye(2)
    rng = np.random.default_rng(10)
    # round trip with a known delay
    d = 4 * (rng.standard_normal(50) + 1j * rng.standard_normal(50))
    q = extract_quadratures(synth_trace(d, "x", spec, 0.0, 2.5e-7, eye, rng), spec, 2.5e-7) + 1j * extract_quadratures(
        synth_trace(d, "p", spec, 0.0, 2.5e-7, eye, rng), spec, 2.5e-7
    )
    rel = float(np.max(np.abs(q - d) / np.abs(d)))
    # vacuum normalisation over 1e5 modes: the per-sample std fixed by the mode energy,
    # and the empirical scale for an arbitrary noise level
    var = float(np.var(extract_quadratures(synth_trace(np.zeros(100_000), "x", spec, vacuum_noise_std(spec, rate), 0.0, eye, rng), spec)))
    scale = calibrate_vacuum_scale(synth_trace(np.zeros(100_000), "x", spec, 0.8, 0.0, eye, rng), spec)
    scale_err = abs(scale * 0.8 / vacuum_noise_std(spec, rate) - 1)
    # mode orthogonality
    t = -5e-7 + np.arange(1000) / rate
    k, f = mode_assignment(spec, t)
    modes = np.stack([np.where(k == j, f, 0.0) for j in range(10)])
    gram = modes @ modes.T
    offdiag = int(np.count_nonzero(gram - np.diag(np.diag(gram))))
    # delay: exact, noisy and shift-equivariant
    exact = estimate_delay(synth_trace([40.0, 0, 0], "x", spec, 0.0, 2.5e-7, eye, rng), spec) == 2.5e-7
    hits = sum(
        abs(estimate_delay(synth_trace([10.0, 0, 0], "x", spec, 1.0, 2.5e-7, eye, rng), spec) - 2.5e-7) <= 1.0001 / rate
        for _ in range(100)
    )
    tr = synth_trace([30.0, 0, 0, 0], "x", spec, 1.0, 1e-7, eye, rng)
    base = estimate_delay(tr, spec)
    shifts = [
        round((estimate_delay(TimeTrace(rate, np.concatenate([np.zeros(m), tr.samples[:-m]]), tr.t0_offset_s), spec) - base) * rate)
        for m in (1, 5, 40)
    ]
    # crosstalk: p response of a pure x command and noisy calibration
    c = np.array([[1.0, 0.0], [0.05, 1.0]])
    p_leak = extract_quadratures(synth_trace([10.0 + 0j], "p", spec, 0.0, 0.0, c, rng), spec)[0]
    amps = np.linspace(-10, 10, 21)

    def sweep(quad):
        rows = []
        for a in amps:
            cmd = [a + 0j] if quad == "x" else [1j * a]
            x = extract_quadratures(synth_trace(cmd, "x", spec, 0.0, 0.0, c, rng), spec)[0]
            p = extract_quadratures(synth_trace(cmd, "p", spec, 0.0, 0.0, c, rng), spec)[0]
            rows.append((a, x + 0.1 * rng.standard_normal(), p + 0.1 * rng.standard_normal()))
        return rows

    c_err = float(np.max(np.abs(calibrate_crosstalk(sweep("x"), sweep("p")) - c)))
    record_property("round_trip_rel", f"{rel:.2g}")
    record_property("vacuum_var", round(var, 4))
    record_property("scale_err", f"{scale_err:.2g}")
    record_property("delay_hits", f"{hits}/100")
    record_property("crosstalk_err", f"{c_err:.3g}")
    assert rel < 1e-6
    assert abs(var - 0.5) <= 0.005
    assert scale_err < 0.01
    assert offdiag == 0
    assert exact and hits >= 99 and shifts == [1, 5, 40]
    assert p_leak == pytest.approx(0.5, abs=1e-9)
    assert c_err <= 0.01


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-m", "acceptance", "-p", "no:cacheprovider"]))
