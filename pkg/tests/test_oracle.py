import numpy as np
import pytest

from bld import oracle
from bld.kernel import EPS
from bld.model import kl_bernoulli
from bld.schedule import build_schedule


def test_compose_examples():
    s = build_schedule("linear", 4)
    assert oracle.compose_marginal(s, 2)[1, 1] == pytest.approx(0.75, abs=1e-15)
    np.testing.assert_array_equal(oracle.compose_marginal(s, 0), np.eye(2))
    for kind in ("linear", "cosine"):
        for T in (1, 4, 16):
            M = oracle.compose_marginal(build_schedule(kind, T), T)
            np.testing.assert_allclose(M, 0.5, atol=1e-6)
            np.testing.assert_allclose(M.sum(1), 1.0, atol=1e-14)


def test_exact_reverse_properties():
    s = build_schedule("linear", 4)
    for zt in (0, 1):
        assert oracle.exact_reverse(zt, 1.0, 3, s) == oracle.posterior(zt, 1, 3, s)
        assert oracle.exact_reverse(zt, 0.0, 3, s) == oracle.posterior(zt, 0, 3, s)
    # beta_4 = 1
    assert oracle.exact_reverse(0, 0.3, 4, s) == pytest.approx(oracle.exact_reverse(1, 0.3, 4, s), abs=1e-15)


def test_numeric_kl_examples():
    assert oracle.numeric_kl(0.5, 0.5) == 0.0
    assert oracle.numeric_kl(0.75, 0.5) == pytest.approx(0.75 * np.log(1.5) + 0.25 * np.log(0.5), abs=1e-15)
    assert oracle.numeric_kl(0.75, 0.5) == pytest.approx(0.130812, abs=1e-6)
    big = oracle.numeric_kl(EPS, 1 - EPS)
    assert np.isfinite(big) and big > 10


def test_numeric_kl_matches_closed_form():
    rng = np.random.default_rng(0)
    p, q = rng.uniform(EPS, 1 - EPS, (2, 2000))
    fast = kl_bernoulli(p, q)
    for i in range(2000):
        assert abs(fast[i] - oracle.numeric_kl(p[i], q[i])) < 1e-14


def test_tv_examples():
    rng = np.random.default_rng(0)
    words = np.array([[0] * 8, [1] * 8, [1, 0] * 4, [0, 1] * 4])
    target = np.zeros(256)
    target[oracle.encode_rows(words)] = 0.25
    samples = words[rng.integers(0, 4, 10_000)]
    assert oracle.tv_distance(samples, target) < 0.05
    other = np.zeros(256)
    other[3] = 1.0
    assert oracle.tv_distance(samples, other) == 1.0
    emp = np.bincount(oracle.encode_rows(samples), minlength=256) / len(samples)
    assert oracle.tv_distance(samples, emp) == 0.0


def test_tv_rejects_large_support():
    with pytest.raises(ValueError):
        oracle.tv_distance(np.zeros((2, 17), dtype=int), np.zeros(2 ** 17))


def test_oracle_shares_no_code_with_kernels():
    import inspect

    src = inspect.getsource(oracle)
    for name in ("from .kernel", "import kernel", "marginal_params", "s.k", "s.b["):
        assert name not in src
