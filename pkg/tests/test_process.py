import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cvlearn.errors import RejectedInput, UnsupportedVariant
from cvlearn.process import (
    FixedSpec,
    GaussianSpec,
    ThreePeakSpec,
    as_complex_vec,
    char_fn,
    draw_gamma,
    empirical_char_fn,
    pdf_weight,
    sample_displacement,
    sample_displacements,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
)

finite = st.floats(-2, 2, allow_nan=False)


def test_gaussian_char_fn_at_origin_and_decay():
    spec = GaussianSpec(3, 0.3)
    assert char_fn(spec, np.zeros(3)) == 1.0
    beta = np.array([0.1, 0.2j, 0.0])
    assert char_fn(spec, beta) == pytest.approx(math.exp(-0.05 / 0.18))


def test_three_peak_char_fn_at_gamma():
    g = np.full(4, 0.3 + 0.3j)
    spec = ThreePeakSpec(g, 0.3, 0.25)
    gg = float(np.vdot(g, g).real)
    expected = math.exp(-gg / 0.18) + 0.5j * (1 - math.exp(-4 * gg / 0.18))
    assert char_fn(spec, g) == pytest.approx(expected, abs=1e-15)


def test_char_fn_batched_shape():
    spec = ThreePeakSpec([0.3 + 0.3j, 0.1], 0.3, 0.2)
    out = char_fn(spec, np.zeros((5, 7, 2)))
    assert out.shape == (5, 7)
    assert np.allclose(out, 1.0)


def test_fixed_char_fn_is_pure_phase():
    spec = FixedSpec([1.0 + 2.0j])
    beta = np.array([0.3 - 0.1j])
    assert char_fn(spec, beta) == pytest.approx(np.exp(2j * np.imag(np.conj(1 + 2j) * beta[0])))


def test_density_fourier_transform_matches_char_fn_n1():
    # Independent oracle: 2-D quadrature of the normalised density.
    spec = ThreePeakSpec([0.4 + 0.25j], 0.3, 0.25)
    lim = 8.0 / (2 * spec.sigma)
    norm = integrate.dblquad(lambda y, x: pdf_weight(spec, np.array([x + 1j * y])), -lim, lim, -lim, lim)[0]
    for beta in (0.2 + 0.1j, 0.4 + 0.25j, -0.3j):

        def part(fn):
            def f(y, x):
                a = x + 1j * y
                return pdf_weight(spec, np.array([a])) * fn(2 * np.imag(np.conj(a) * beta))

            return integrate.dblquad(f, -lim, lim, -lim, lim, epsabs=1e-11)[0] / norm

        val = part(np.cos) + 1j * part(np.sin)
        assert val == pytest.approx(char_fn(spec, np.array([beta])), abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=4), st.floats(0.05, 2), st.floats(0, 0.25))
def test_char_fn_hermitian_and_bounded(pairs, sigma, eps0):
    beta = np.array([complex(a, b) for a, b in pairs])
    spec = ThreePeakSpec(np.roll(beta, 1) * 0.7 + 0.1, sigma, eps0)
    lam = char_fn(spec, beta)
    assert char_fn(spec, -beta) == pytest.approx(np.conj(lam), abs=1e-12)
    assert abs(lam) <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=5), st.floats(0, 0.25))
def test_density_nonnegative(pairs, eps0):
    alpha = np.array([complex(a, b) for a, b in pairs])
    spec = ThreePeakSpec(np.full(alpha.size, 0.5 - 0.2j), 0.3, eps0)
    assert pdf_weight(spec, alpha) >= 0


def test_sampler_matches_char_fn():
    rng = np.random.default_rng(0)
    spec = ThreePeakSpec(np.full(3, 0.3 + 0.3j), 0.3, 0.25)
    x = sample_displacements(spec, 400_000, rng)
    assert x.shape == (400_000, 3)
    for beta in (spec.gamma, 0.5 * spec.gamma, np.array([0.2, -0.1j, 0.3])):
        est = empirical_char_fn(x, beta)
        assert abs(est - char_fn(spec, beta)) < 4 * math.sqrt(1 / 400_000) * 1.5


def test_gaussian_sampler_variance():
    rng = np.random.default_rng(1)
    x = sample_displacements(GaussianSpec(2, 0.5), 200_000, rng)
    # each quadrature ~ N(0, 1/(4 sigma^2))
    assert np.var(x.real) == pytest.approx(1.0, rel=0.02)
    assert np.var(x.imag) == pytest.approx(1.0, rel=0.02)


def test_fixed_sampler_and_single_draw():
    spec = FixedSpec([1 + 1j, 2])
    rng = np.random.default_rng(2)
    assert np.array_equal(sample_displacement(spec, rng), spec.alpha0)
    with pytest.raises(UnsupportedVariant):
        pdf_weight(spec, spec.alpha0)


def test_sampler_seeded():
    spec = ThreePeakSpec([0.3 + 0.3j] * 2, 0.3, 0.25)
    a = sample_displacements(spec, 100, np.random.default_rng(5))
    b = sample_displacements(spec, 100, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_draw_gamma_variance():
    rng = np.random.default_rng(3)
    g = np.array([draw_gamma(10, 0.099, rng) for _ in range(5000)])
    assert np.mean(np.sum(np.abs(g) ** 2, axis=1)) == pytest.approx(0.198 * 10, rel=0.02)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: ThreePeakSpec([1.0], 0.3, 0.3),
        lambda: ThreePeakSpec([1.0], 0.0, 0.1),
        lambda: ThreePeakSpec([], 0.3, 0.1),
        lambda: GaussianSpec(0, 0.3),
        lambda: FixedSpec([np.nan]),
        lambda: char_fn(GaussianSpec(2, 0.3), np.zeros(3)),
    ],
)
def test_rejections(bad):
    with pytest.raises(RejectedInput):
        bad()


def test_pairs_input():
    assert np.array_equal(as_complex_vec([[1, 2], [3, -4]]), np.array([1 + 2j, 3 - 4j]))


@pytest.mark.parametrize(
    "spec",
    [ThreePeakSpec([0.3 + 0.3j, -0.1j], 0.3, 0.25), GaussianSpec(4, 0.2), FixedSpec([1.5 - 2j])],
)
def test_json_round_trip(spec):
    back = spec_from_json(spec_to_json(spec))
    assert spec_to_dict(back) == spec_to_dict(spec)
    assert json.loads(spec_to_json(spec))["kind"] in ("three_peak", "gaussian", "fixed")


def test_json_rejects_unknown_and_mismatch():
    d = spec_to_dict(GaussianSpec(2, 0.3))
    with pytest.raises(RejectedInput):
        spec_from_dict(dict(d, colour="red"))
    d = spec_to_dict(ThreePeakSpec([1j, 1], 0.3, 0.1))
    with pytest.raises(RejectedInput):
        spec_from_dict(dict(d, n=3))
    with pytest.raises(RejectedInput):
        spec_from_dict({"kind": "banana"})
