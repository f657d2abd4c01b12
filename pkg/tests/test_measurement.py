import math

import numpy as np
import pytest

from cvlearn.errors import RejectedInput
from cvlearn.measurement import (
    BellRecord,
    DriftModel,
    PilotTag,
    RecordSet,
    SqueezingSpec,
    db_for_noise_factor,
    effective_squeezing,
    inject_pilots,
    iter_bell_chunks,
    noise_factor,
    rotation,
    simulate_bell_batch,
)
from cvlearn.process import FixedSpec, GaussianSpec, ThreePeakSpec


def test_effective_squeezing_lossless():
    s = SqueezingSpec(4.78)
    assert noise_factor(effective_squeezing(s)) == pytest.approx(10 ** -0.478)
    assert noise_factor(effective_squeezing(SqueezingSpec(0.0))) == 1.0


def test_effective_squeezing_with_loss():
    # -1/2 log(e^{-2r} + (1-T)/T)
    s = SqueezingSpec(6.0, 0.8)
    expected = -0.5 * math.log(10 ** -0.6 + 0.25)
    assert effective_squeezing(s) == pytest.approx(expected)


def test_infinite_squeezing():
    r = effective_squeezing(SqueezingSpec(math.inf))
    assert math.isinf(r) and noise_factor(r) == 0.0
    assert db_for_noise_factor(0.0) == math.inf
    assert SqueezingSpec.from_r_eff(0.5).exp_minus_2r == pytest.approx(math.exp(-1))


@pytest.mark.parametrize("bad", [lambda: SqueezingSpec(-1), lambda: SqueezingSpec(3, 0), lambda: SqueezingSpec(3, 1.2)])
def test_squeezing_rejections(bad):
    with pytest.raises(RejectedInput):
        bad()


def test_noise_variance_matches_law():
    # fixed displacement: outcomes are alpha0 + noise, per-quadrature var e^{-2r}/2
    spec = FixedSpec([1.0 + 2.0j, -0.5j])
    r = effective_squeezing(SqueezingSpec(3.0))
    rs = simulate_bell_batch(spec, r, None, 200_000, seed=4)
    z = rs.zeta
    assert np.allclose(z.mean(axis=0), spec.alpha0, atol=0.01)
    assert np.allclose(np.var(z.real, axis=0), noise_factor(r) / 2, rtol=0.02)
    assert np.allclose(np.var(z.imag, axis=0), noise_factor(r) / 2, rtol=0.02)


def test_noiseless_limit_reproduces_displacement():
    spec = FixedSpec([0.7 - 0.2j])
    rs = simulate_bell_batch(spec, math.inf, None, 10, seed=1)
    assert np.all(rs.zeta == spec.alpha0)


def test_affine_drift_applied():
    spec = FixedSpec([1.0 + 0j])
    rs = simulate_bell_batch(spec, math.inf, DriftModel(rotation(math.pi / 2)), 3, seed=0)
    assert np.allclose(rs.zeta, 1j)


def test_determinism_and_thread_invariance():
    spec = ThreePeakSpec(np.full(3, 0.3 + 0.3j), 0.3, 0.25)
    a = simulate_bell_batch(spec, SqueezingSpec(2.0), None, 50_000, seed=11)
    b = simulate_bell_batch(spec, SqueezingSpec(2.0), None, 50_000, seed=11, threads=3)
    c = simulate_bell_batch(spec, SqueezingSpec(2.0), None, 50_000, seed=12)
    assert np.array_equal(a.zeta, b.zeta)
    assert not np.array_equal(a.zeta, c.zeta)


def test_chunks_cover_batch():
    spec = GaussianSpec(2, 0.3)
    starts = [s for s, z in iter_bell_chunks(spec, 0.0, None, 40_000, 3, chunk=16_384)]
    assert starts == [0, 16_384, 32_768]


def test_pilot_injection_ratio_and_tags():
    spec = GaussianSpec(2, 0.3)
    rs = simulate_bell_batch(spec, 0.5, None, 49_900, seed=2)
    out = inject_pilots(rs, 500, 10.0, 2, 0.5, None)
    tags = out.pilot_tag
    ratio = np.mean(tags != PilotTag.NONE)
    assert ratio == pytest.approx(0.002, abs=1e-6)
    assert len(out) == 50_000
    assert np.array_equal(out.sample_index, np.arange(50_000))
    assert np.array_equal(out.data(), rs.zeta)
    assert np.sum(tags == PilotTag.PILOT_X) == np.sum(tags == PilotTag.PILOT_P) == 50
    assert np.allclose(out.pilots(PilotTag.PILOT_X).mean(), 10.0, atol=0.2)


def test_record_set_views():
    z = np.arange(6).reshape(3, 2).astype(complex)
    rs = RecordSet.from_records([BellRecord(z[i], i, PilotTag(i % 2)) for i in range(3)])
    assert len(rs) == 3 and rs.n == 2
    assert rs[1].pilot_tag == PilotTag.PILOT_X
    assert np.array_equal(rs.data(), z[[0, 2]])
    assert [r.sample_index for r in rs] == [0, 1, 2]
    assert PilotTag.parse(PilotTag.PILOT_P.label) is PilotTag.PILOT_P


def test_record_set_rejections():
    with pytest.raises(RejectedInput):
        RecordSet(np.zeros(3))
    with pytest.raises(RejectedInput):
        RecordSet(np.zeros((3, 1)), sample_index=[0, 1])
    with pytest.raises(RejectedInput):
        DriftModel(np.zeros((2, 2)))
    with pytest.raises(RejectedInput):
        simulate_bell_batch(GaussianSpec(1, 0.3), 0.0, None, 0, seed=1)
