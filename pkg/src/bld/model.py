"""Training objective for binary latent diffusion.

The denoiser's logits are read according to a prediction target:

``residual``
    flipping probability, fit to ``z_t XOR z_0`` (the default).
``z0``
    probability that the clean bit is 1, fit to ``z_0``.
``zprev``
    the reverse parameter P(z_{t-1} = 1 | z_t) directly, trained on the
    variational bound alone.

For the first two the reverse step is the posterior mixture over the
predicted clean bits; the combined loss is ``simple + lam * vlb``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kernel import (
    _mixture,
    _posterior,
    clamp,
    flip_to_z0_probs,
    marginal_params,
    sample_bits,
    sigmoid,
)
from .nn import AdamState, DenoiserNet, adam_step, all_finite
from .schedule import NoiseSchedule

TARGETS = ("residual", "z0", "zprev")


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class DiffusionLossReport:
    loss_total: float
    loss_residual: float
    loss_vlb: float
    t: tuple[int, ...]
    lam: float

    @property
    def t_mean(self) -> float:
        return float(np.mean(self.t))

    def record(self, step: int, lr: float) -> dict:
        return {
            "step": step,
            "t_mean": self.t_mean,
            "loss_total": self.loss_total,
            "loss_residual": self.loss_residual,
            "loss_vlb": self.loss_vlb,
            "lr": lr,
        }


def residual_target(z_t, z0) -> np.ndarray:
    z_t, z0 = np.asarray(z_t), np.asarray(z0)
    if z_t.shape != z0.shape:
        raise ValueError(f"shape mismatch {z_t.shape} vs {z0.shape}")
    return np.bitwise_xor(z_t.astype(np.uint8), z0.astype(np.uint8))


def bce(p, target) -> np.ndarray:
    """Elementwise binary cross-entropy on clamped probabilities."""
    p = clamp(p)
    y = np.asarray(target, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def loss_residual(flip_pred, target) -> float:
    return float(np.mean(bce(flip_pred, target)))


def kl_bernoulli(p, q):
    """KL(B(p) || B(q)) in nats, elementwise."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    out = p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))
    return out if out.ndim else float(out)


def _vlb_terms(z0, z_t, p_z0, t, s: NoiseSchedule) -> np.ndarray:
    """Per-bit bound terms: KL for rows with t >= 2, clean-bit NLL for t = 1."""
    z0 = np.asarray(z0, dtype=np.float64)
    z_t = np.asarray(z_t, dtype=np.float64)
    tt = np.broadcast_to(np.asarray(t, dtype=np.int64), z0.shape[:1] if z0.ndim > 1 else ())
    tcol = tt[..., None] if z0.ndim > 1 else tt
    t2 = np.maximum(tcol, 2) if s.T >= 2 else tcol
    if s.T >= 2:
        q = _posterior(z_t, z0, t2, s)
        p = _mixture(z_t, p_z0, t2, s)[0]
        kl = kl_bernoulli(q, p)
    else:
        kl = np.zeros_like(z0)
    return np.where(tcol == 1, bce(p_z0, z0), kl)


def loss_vlb(z0, z_t, flip_pred, t, s: NoiseSchedule) -> float:
    """Mean per-bit bound term for a residual-parameterised prediction."""
    tt = np.asarray(t)
    if np.any(tt < 1) or np.any(tt > s.T):
        raise ValueError(f"step outside [1, {s.T}]")
    p_z0 = clamp(flip_to_z0_probs(z_t, clamp(flip_pred)))
    return float(np.mean(_vlb_terms(z0, z_t, p_z0, t, s)))


def loss_prior(z0, s: NoiseSchedule) -> float:
    """Mean per-bit KL(q(z_T | z_0) || B(0.5)); independent of the network."""
    q = marginal_params(z0, s.T, s)
    return float(np.mean(kl_bernoulli(q, 0.5)))


def loss_and_grad(logits, z0, z_t, t, s: NoiseSchedule, lam: float = 0.1,
                  target: str = "residual"):
    """Objective value and its gradient with respect to the logits.

    Returns ``(simple, vlb, total, dlogits)``.  Gradients are taken in logit
    space (``sigmoid(l) - y`` for cross-entropy), which matches the clamped
    value wherever the clamp is inactive and keeps saturated units trainable.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown prediction target {target!r}")
    logits = np.asarray(logits, dtype=np.float64)
    z0 = np.asarray(z0, dtype=np.float64)
    z_t = np.asarray(z_t, dtype=np.float64)
    B, D = z0.shape
    n = B * D
    tcol = np.asarray(t, dtype=np.int64).reshape(B, 1)
    first = tcol == 1
    t2 = np.maximum(tcol, 2)
    f = sigmoid(logits)
    fc = clamp(f)

    if target == "zprev":
        q = _posterior(z_t, z0, t2, s) if s.T >= 2 else np.zeros_like(z0)
        terms = np.where(first, bce(fc, z0), kl_bernoulli(q, fc))
        vlb = float(terms.sum() / n)
        grad = np.where(first, f - z0, f - q) / n
        return 0.0, vlb, vlb, grad

    if target == "residual":
        y = residual_target(z_t.astype(np.uint8), z0.astype(np.uint8)).astype(np.float64)
        p0 = flip_to_z0_probs(z_t, fc)
        dp0_dl = (1.0 - 2.0 * z_t) * f * (1.0 - f)
    else:
        y = z0
        p0 = fc
        dp0_dl = f * (1.0 - f)
    simple = float(bce(fc, y).sum() / n)
    g_simple = f - y

    if s.T >= 2:
        q = _posterior(z_t, z0, t2, s)
        p, a0, a1 = _mixture(z_t, p0, t2, s)
        kl = kl_bernoulli(q, p)
        dkl_dp = (p - q) / (p * (1.0 - p))
        g_kl = dkl_dp * (a1 - a0) * dp0_dl
    else:
        kl = g_kl = np.zeros_like(z0)
    # at t = 1 the bound term is the clean-bit NLL, identical to the simple loss
    # for both residual and z0 targets
    terms = np.where(first, bce(p0, z0), kl)
    g_vlb = np.where(first, g_simple, g_kl)
    vlb = float(terms.sum() / n)
    total = simple + lam * vlb
    return simple, vlb, total, (g_simple + lam * g_vlb) / n


def predicted_z0(net: DenoiserNet, z_t, t, cond=None, target: str = "residual", temperature: float = 1.0):
    logits, _ = net.forward(z_t, t, cond)
    f = sigmoid(logits / temperature)
    if target == "residual":
        return flip_to_z0_probs(z_t, f)
    if target == "z0":
        return f
    raise ValueError("zprev target has no clean-bit prediction")


def diffuse(z0, t, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    z0 = np.asarray(z0)
    return sample_bits(marginal_params(z0, t, s), rng)


def train_step(net: DenoiserNet, opt: AdamState, z0, s: NoiseSchedule, rng: np.random.Generator,
               lam: float = 0.1, cond_drop_prob: float = 0.1, labels=None,
               target: str = "residual") -> DiffusionLossReport:
    """One optimisation step on a batch of clean codes.

    Draws a step per example, diffuses, evaluates the objective, backprops
    and updates ``net.params`` with Adam.  Class labels (if the net has class
    embeddings) are replaced by the null token with ``cond_drop_prob``.
    """
    z0 = np.asarray(z0, dtype=np.uint8)
    if z0.ndim != 2 or z0.shape[0] == 0:
        raise ValueError("batch must be a non-empty (B, D) bit array")
    if net.T != s.T:
        raise ValueError(f"network built for T={net.T}, schedule has T={s.T}")
    B = z0.shape[0]
    t = rng.integers(1, s.T + 1, size=B)
    z_t = diffuse(z0, t, s, rng)
    cond = None
    if net.num_classes:
        cond = np.full(B, net.null_class) if labels is None else np.asarray(labels, dtype=np.int64).copy()
        drop = rng.random(B) < cond_drop_prob
        cond[drop] = net.null_class
    logits, cache = net.forward(z_t, t, cond)
    simple, vlb, total, dlogits = loss_and_grad(logits, z0, z_t, t, s, lam=lam, target=target)
    if not np.isfinite(total):
        raise NonFiniteLossError(
            f"non-finite loss at step {opt.step + 1}: simple={simple} vlb={vlb} "
            f"t={t.tolist()} max|logit|={np.max(np.abs(logits))}"
        )
    grads = net.backward(cache, dlogits)
    net.params = adam_step(net.params, grads, opt)
    if not all_finite(net.params):
        raise NonFiniteLossError(f"non-finite parameters after step {opt.step}")
    # the zprev target optimises the bound alone, reported as weight 1
    return DiffusionLossReport(
        loss_total=total,
        loss_residual=simple,
        loss_vlb=vlb,
        t=tuple(int(x) for x in t),
        lam=1.0 if target == "zprev" else lam,
    )


def fit(net: DenoiserNet, data, s: NoiseSchedule, steps: int, rng: np.random.Generator,
        opt: AdamState | None = None, batch_size: int = 64, lam: float = 0.1,
        cond_drop_prob: float = 0.1, labels=None, target: str = "residual",
        log=None) -> list[DiffusionLossReport]:
    """Train for ``steps`` minibatches drawn uniformly from ``data``.

    ``log``, if given, is called with each step's JSON-ready record.
    """
    data = np.asarray(data, dtype=np.uint8)
    labels = None if labels is None else np.asarray(labels, dtype=np.int64)
    opt = AdamState() if opt is None else opt
    reports = []
    for _ in range(steps):
        idx = rng.integers(0, data.shape[0], size=batch_size)
        lr = opt.current_lr()
        rep = train_step(net, opt, data[idx], s, rng, lam=lam, cond_drop_prob=cond_drop_prob,
                         labels=None if labels is None else labels[idx], target=target)
        reports.append(rep)
        if log is not None:
            log(rep.record(opt.step, lr))
    return reports


def jsonl(record: dict) -> str:
    return json.dumps(record, sort_keys=True)

