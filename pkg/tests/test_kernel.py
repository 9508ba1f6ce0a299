import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bld import oracle
from bld.kernel import (
    EPS,
    bayes_posterior_params,
    flip_to_z0_probs,
    forward_one_step_params,
    marginal_params,
    reverse_closed_form,
    reverse_mixture_params,
    sample_bits,
)
from bld.schedule import NoiseSchedule, build_schedule

LIN4 = build_schedule("linear", 4)
ONE, ZERO = np.array([1]), np.array([0])


def test_one_step_examples():
    s = NoiseSchedule.from_k([1.0, 0.999999999, 0.0])
    assert forward_one_step_params(ONE, 1, s)[0] == pytest.approx(1.0, abs=1e-6)
    assert forward_one_step_params(ZERO, 2, s)[0] == 0.5
    assert forward_one_step_params(ONE, 2, LIN4)[0] == pytest.approx(5 / 6, abs=1e-15)
    with pytest.raises(ValueError):
        forward_one_step_params(ONE, 0, LIN4)
    with pytest.raises(ValueError):
        forward_one_step_params(ONE, 5, LIN4)


def test_marginal_examples():
    assert marginal_params(ONE, 2, LIN4)[0] == pytest.approx(0.75, abs=1e-15)
    assert marginal_params(ZERO, 4, LIN4)[0] == 0.5
    assert marginal_params(ONE, 0, LIN4)[0] == 1.0
    M = oracle.compose_marginal(LIN4, 2)
    assert M[1, 1] == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("kind", ["linear", "cosine"])
def test_composition_matches_marginal_matrix(kind):
    s = build_schedule(kind, 8)
    for t in range(9):
        M = oracle.compose_marginal(s, t)
        expected = np.array([[1 - s.b[t], s.b[t]], [1 - s.k[t] - s.b[t], s.k[t] + s.b[t]]])
        np.testing.assert_allclose(M, expected, atol=1e-10)


def test_bayes_example():
    p = bayes_posterior_params(ONE, ONE, 2, LIN4)[0]
    assert p == pytest.approx((5 / 6 * 0.875) / 0.75, abs=1e-12)
    assert p == pytest.approx(35 / 36, abs=1e-12)


def test_bayes_uninformative_step():
    # beta_4 = 1: z_4 says nothing, so the posterior is the t-1 marginal
    for z0 in (0, 1):
        for zt in (0, 1):
            p = bayes_posterior_params(np.array([zt]), np.array([z0]), 4, LIN4)[0]
            assert p == pytest.approx(LIN4.k[3] * z0 + LIN4.b[3], abs=1e-15)


@pytest.mark.parametrize("kind", ["linear", "cosine"])
@pytest.mark.parametrize("T", [2, 4, 16])
def test_bayes_enumeration_and_sign(kind, T):
    s = build_schedule(kind, T)
    for t in range(2, T + 1):
        for zt in (0, 1):
            for z0 in (0, 1):
                fast = bayes_posterior_params(np.array([zt]), np.array([z0]), t, s)[0]
                assert fast == pytest.approx(np.clip(oracle.posterior(zt, z0, t, s), EPS, 1 - EPS), abs=1e-12)
        assert bayes_posterior_params(ZERO, ZERO, t, s)[0] < 0.5


def test_bayes_rejects_t1():
    with pytest.raises(ValueError):
        bayes_posterior_params(ONE, ONE, 1, LIN4)


def test_mixture_endpoints():
    for zt in (0, 1):
        z = np.array([zt])
        assert reverse_mixture_params(z, np.array([1.0]), 3, LIN4)[0] == bayes_posterior_params(z, ONE, 3, LIN4)[0]
        assert reverse_mixture_params(z, np.array([0.0]), 3, LIN4)[0] == bayes_posterior_params(z, ZERO, 3, LIN4)[0]


def test_mixture_half():
    # posteriors 5/12 (z0=0) and 35/36 (z0=1), averaged
    p = reverse_mixture_params(ONE, np.array([0.5]), 2, LIN4)[0]
    assert p == pytest.approx(25 / 36, abs=1e-12)
    assert oracle.exact_reverse(1, 0.5, 2, LIN4) == pytest.approx(25 / 36, abs=1e-12)


def test_mixture_rejects_bad_probability():
    with pytest.raises(ValueError):
        reverse_mixture_params(ONE, np.array([1.5]), 2, LIN4)
    with pytest.raises(ValueError):
        reverse_mixture_params(ONE, np.array([np.nan]), 2, LIN4)
    with pytest.raises(ValueError):
        reverse_mixture_params(ONE, np.array([0.5]), 1, LIN4)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1), st.floats(0, 1), st.integers(2, 16), st.sampled_from(["linear", "cosine"]))
def test_mixture_matches_oracle(zt, p, t, kind):
    s = build_schedule(kind, 16)
    fast = reverse_mixture_params(np.array([zt]), np.array([p]), t, s)[0]
    assert fast == pytest.approx(oracle.exact_reverse(zt, p, t, s), abs=1e-10)
    # the two outcome probabilities sum to one
    assert fast + (1 - fast) == 1.0


def test_closed_form_shifted_agrees_at_endpoints_only():
    s = build_schedule("linear", 16)
    z = np.array([0, 1, 0, 1])
    for p in (0.0, 1.0):
        pz = np.full(4, p)
        np.testing.assert_allclose(reverse_closed_form(z, pz, 5, s, "shifted"),
                                   reverse_mixture_params(z, pz, 5, s), atol=1e-12)
    half = np.full(4, 0.5)
    assert np.max(np.abs(reverse_closed_form(z, half, 5, s, "shifted") - reverse_mixture_params(z, half, 5, s))) > 1e-3
    printed = reverse_closed_form(z, np.ones(4), 5, s, "printed")
    assert np.max(np.abs(printed - reverse_mixture_params(z, np.ones(4), 5, s))) > 1e-3


def test_per_bit_independence():
    rng = np.random.default_rng(3)
    s = build_schedule("cosine", 16)
    zt = rng.integers(0, 2, 10)
    z0 = rng.integers(0, 2, 10)
    p = rng.random(10)
    vec = reverse_mixture_params(zt, p, 7, s)
    post = bayes_posterior_params(zt, z0, 7, s)
    marg = marginal_params(z0, 7, s)
    for i in range(10):
        assert vec[i] == reverse_mixture_params(zt[i:i + 1], p[i:i + 1], 7, s)[0]
        assert post[i] == bayes_posterior_params(zt[i:i + 1], z0[i:i + 1], 7, s)[0]
        assert marg[i] == marginal_params(z0[i:i + 1], 7, s)[0]


def test_batched_steps_align_with_rows():
    s = build_schedule("linear", 16)
    z0 = np.array([[1, 0], [1, 0], [0, 1]])
    t = np.array([1, 8, 16])
    p = marginal_params(z0, t, s)
    for r in range(3):
        np.testing.assert_array_equal(p[r], marginal_params(z0[r], int(t[r]), s))


def test_flip_examples():
    assert flip_to_z0_probs(ONE, 0.0)[0] == 1.0
    assert flip_to_z0_probs(ZERO, 1 - EPS)[0] == 1 - EPS
    assert flip_to_z0_probs(ZERO, 0.3)[0] == 0.3


def test_sample_bits_saturation_and_determinism():
    rng = np.random.default_rng(0)
    assert np.all(sample_bits(np.full(8, 1 - EPS), rng) == 1)
    assert np.all(sample_bits(np.full(8, EPS), rng) == 0)
    a = sample_bits(np.full(50, 0.5), np.random.default_rng(11))
    b = sample_bits(np.full(50, 0.5), np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0, 1}


def test_sample_bits_mean():
    draws = sample_bits(np.full(100_000, 0.5), np.random.default_rng(1))
    assert 0.49 <= draws.mean() <= 0.51
