"""Cross-checks of the closed-form kernels against brute-force references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .binae import BinaryAutoencoder
from .kernel import EPS, bayes_posterior_params, marginal_params, reverse_mixture_params
from .model import _vlb_terms, kl_bernoulli, loss_and_grad
from .nn import DenoiserNet
from .schedule import beta_from_k, build_schedule, validate


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tol: float

    def row(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<34} {self.value:.3e} (tol {self.tol:.0e})"


def _check(name, value, tol) -> Check:
    return Check(name, bool(value < tol), float(value), tol)


def schedule_algebra(Ts=(1, 4, 16, 64, 256)) -> float:
    worst = 0.0
    for kind in ("linear", "cosine"):
        for T in Ts:
            s = build_schedule(kind, T)
            worst = max(worst, np.max(np.abs(s.k + 2 * s.b - 1)))
            worst = max(worst, np.max(np.abs(beta_from_k(s.k) - s.beta[1:])))
            worst = max(worst, np.max(np.abs(s.b - (1 - s.k) / 2)))
            if validate(s) or s.k[T] > 1e-6:
                return np.inf
    return float(worst)


def marginal_vs_composition(Tmax=64) -> float:
    worst = 0.0
    for kind in ("linear", "cosine"):
        for T in (1, 2, 4, 16, Tmax):
            s = build_schedule(kind, T)
            for t in range(T + 1):
                M = oracle.compose_marginal(s, t)
                for z0 in (0, 1):
                    p = marginal_params(np.array([z0]), t, s)[0]
                    worst = max(worst, abs(M[z0, 1] - p))
    return float(worst)


def posterior_vs_enumeration(Tmax=64) -> float:
    worst = 0.0
    for kind in ("linear", "cosine"):
        for T in (2, 4, 16, Tmax):
            s = build_schedule(kind, T)
            for t in range(2, T + 1):
                for zt in (0, 1):
                    for z0 in (0, 1):
                        fast = bayes_posterior_params(np.array([zt]), np.array([z0]), t, s)[0]
                        ref = np.clip(oracle.posterior(zt, z0, t, s), EPS, 1 - EPS)
                        worst = max(worst, abs(fast - ref))
    return float(worst)


def mixture_vs_enumeration(n=1000, seed=0) -> float:
    rng = np.random.default_rng(seed)
    scheds = [build_schedule(k, T) for k in ("linear", "cosine") for T in (2, 4, 16, 64)]
    worst = 0.0
    for _ in range(n):
        s = scheds[rng.integers(len(scheds))]
        t = int(rng.integers(2, s.T + 1))
        zt = int(rng.integers(2))
        p = float(rng.random())
        fast = reverse_mixture_params(np.array([zt]), np.array([p]), t, s)[0]
        worst = max(worst, abs(fast - oracle.exact_reverse(zt, p, t, s)))
    return float(worst)


def kl_vs_summation(n=10_000, seed=0) -> float:
    rng = np.random.default_rng(seed)
    p = rng.uniform(EPS, 1 - EPS, n)
    q = rng.uniform(EPS, 1 - EPS, n)
    fast = kl_bernoulli(p, q)
    return float(max(abs(fast[i] - oracle.numeric_kl(p[i], q[i])) for i in range(n)))


def vlb_vs_summation(n=50, seed=0, D=4, T=4) -> float:
    """Bound terms against per-bit oracle sums (clean-bit NLL at t=1, KL otherwise)."""
    rng = np.random.default_rng(seed)
    s = build_schedule("linear", T)
    worst = 0.0
    for _ in range(n):
        t = int(rng.integers(1, T + 1))
        z0 = rng.integers(0, 2, D)
        zt = rng.integers(0, 2, D)
        p0 = rng.uniform(0.01, 0.99, D)
        fast = _vlb_terms(z0, zt, p0, t, s)
        for i in range(D):
            if t == 1:
                ref = -np.log(p0[i] if z0[i] else 1 - p0[i])
            else:
                q = oracle.posterior(int(zt[i]), int(z0[i]), t, s)
                p = oracle.exact_reverse(int(zt[i]), p0[i], t, s)
                ref = oracle.numeric_kl(q, p)
            worst = max(worst, abs(fast[i] - ref))
    return float(worst)


def rel_err(a, b) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-6)))


def denoiser_gradcheck(seed: int, D=6, H=8, L=1, T=4, num_classes=2, h=1e-5) -> float:
    """Max relative error of the full diffusion-loss gradient against central differences."""
    rng = np.random.default_rng(seed)
    s = build_schedule("linear", T)
    net = DenoiserNet(D, T, H, L, num_classes=num_classes, rng=rng)
    B = 5
    z0 = rng.integers(0, 2, (B, D)).astype(np.uint8)
    t = rng.integers(1, T + 1, B)
    zt = (rng.random((B, D)) < marginal_params(z0, t, s)).astype(np.uint8)
    cond = rng.integers(-1, num_classes, B)

    def f():
        logits, _ = net.forward(zt, t, cond)
        return loss_and_grad(logits, z0, zt, t, s, lam=0.1)[2]

    logits, cache = net.forward(zt, t, cond)
    grads = net.backward(cache, loss_and_grad(logits, z0, zt, t, s, lam=0.1)[3])
    worst = 0.0
    for k, v in net.params.items():
        num = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            old = v[idx]
            v[idx] = old + h
            fp = f()
            v[idx] = old - h
            fm = f()
            v[idx] = old
            num[idx] = (fp - fm) / (2 * h)
        worst = max(worst, rel_err(num, grads[k]))
    return worst


def autoencoder_gradcheck(seed: int, N=12, D_lat=6, hidden=(10,), h=1e-5) -> float:
    """Straight-through gradient against differences of the frozen-draw surrogate."""
    rng = np.random.default_rng(seed)
    ae = BinaryAutoencoder(N, D_lat, hidden, rng=rng)
    x = (rng.random((4, N)) < 0.5).astype(np.float64)
    u = rng.random((4, D_lat))
    y0 = ae.encode(x, rng)[0]
    _, grads = ae.loss_and_grad(x, u, y_stop=y0)
    params = ae.params
    worst = 0.0
    for k, v in params.items():
        num = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            old = v[idx]
            v[idx] = old + h
            ae.params = params
            fp = ae.loss_and_grad(x, u, y_stop=y0)[0]
            v[idx] = old - h
            ae.params = params
            fm = ae.loss_and_grad(x, u, y_stop=y0)[0]
            v[idx] = old
            num[idx] = (fp - fm) / (2 * h)
        ae.params = params
        worst = max(worst, rel_err(num, grads[k]))
    return worst


def run_checks(seeds: int = 3) -> list[Check]:
    return [
        _check("schedule algebra", schedule_algebra(), 1e-12),
        _check("marginal vs composition", marginal_vs_composition(), 1e-10),
        _check("posterior vs enumeration", posterior_vs_enumeration(), 1e-12),
        _check("reverse mixture vs enumeration", mixture_vs_enumeration(), 1e-10),
        _check("KL closed form vs summation", kl_vs_summation(), 1e-14),
        _check("VLB terms vs summation", vlb_vs_summation(), 1e-10),
        _check("denoiser gradient", max(denoiser_gradcheck(i) for i in range(seeds)), 1e-4),
        _check("autoencoder gradient", max(autoencoder_gradcheck(i) for i in range(seeds)), 1e-3),
    ]
