"""Reverse-process sampling with temperature, guidance and inpainting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import _bits, bits_from_uniform, flip_to_z0_probs, marginal_params, reverse_mixture_params, sigmoid
from .nn import DenoiserNet
from .schedule import NoiseSchedule

DEFAULT_TEMPERATURE = 0.9


@dataclass
class SampleRequest:
    num_samples: int
    temperature: float = DEFAULT_TEMPERATURE
    guidance: float = 0.0
    cond: int | None = None
    mask: np.ndarray | None = None
    observed: np.ndarray | None = None
    seed: int = 0
    target: str = "residual"
    trace: bool = False

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not self.guidance >= 0:
            raise ValueError("guidance must be >= 0")
        if (self.mask is None) != (self.observed is None):
            raise ValueError("mask and observed values must be given together")
        if self.mask is not None:
            self.mask = np.asarray(self.mask).astype(bool)
            self.observed = np.asarray(_bits(self.observed), dtype=np.uint8)
            if self.mask.shape != self.observed.shape:
                raise ValueError("mask and observed values must have the same length")


@dataclass
class SampleTrace:
    z: list = field(default_factory=list)
    flip: list = field(default_factory=list)


class ChainStreams:
    """One generator per chain, seeded with ``seed XOR chain_index``.

    ``aux`` streams (for re-diffusing observed bits) are separate, so using
    them never shifts the main streams.
    """

    def __init__(self, seed: int, n: int):
        self.seed, self.n = int(seed), n
        self.main = [np.random.default_rng(self.seed ^ i) for i in range(n)]
        self._aux = None

    @property
    def aux(self):
        if self._aux is None:
            self._aux = [np.random.default_rng([self.seed ^ i, 1]) for i in range(self.n)]
        return self._aux

    @staticmethod
    def uniform(gens, D: int) -> np.ndarray:
        return np.stack([g.random(D) for g in gens])


def guided_logits(net: DenoiserNet, z_t, t, guidance: float = 0.0, cond=None) -> np.ndarray:
    """Conditional logits, extrapolated away from the unconditional ones when guidance > 0."""
    if guidance > 0:
        if not net.num_classes:
            raise ValueError("guidance requires a network with class embeddings")
        if cond is None:
            raise ValueError("guidance requires a class condition")
        lc, _ = net.forward(z_t, t, cond)
        lu, _ = net.forward(z_t, t, None)
        return (1.0 + guidance) * lc - guidance * lu
    return net.forward(z_t, t, cond)[0]


def step_probs(net: DenoiserNet, z_t, t: int, s: NoiseSchedule, temperature: float = 1.0,
               guidance: float = 0.0, cond=None, target: str = "residual"):
    """Return ``(P(z_{t-1}=1), flip_or_pred)`` for one reverse step at ``t`` (t >= 2)."""
    logits = guided_logits(net, z_t, t, guidance, cond)
    f = sigmoid(logits / temperature)
    if target == "zprev":
        return f, f
    p0 = flip_to_z0_probs(z_t, f) if target == "residual" else f
    return reverse_mixture_params(z_t, p0, t, s), f


def final_probs(net: DenoiserNet, z1, temperature: float = 1.0, guidance: float = 0.0,
                cond=None, target: str = "residual") -> np.ndarray:
    """Clean-bit probabilities read off at t = 1."""
    logits = guided_logits(net, z1, 1, guidance, cond)
    f = sigmoid(logits / temperature)
    return flip_to_z0_probs(z1, f) if target == "residual" else f


def denoise_step(net: DenoiserNet, z_t, t: int, s: NoiseSchedule, temperature: float = 1.0,
                 guidance: float = 0.0, cond=None, rng: np.random.Generator | None = None,
                 target: str = "residual", uniforms=None) -> np.ndarray:
    """Draw z_{t-1} given z_t for 2 <= t <= T.

    Randomness comes from ``uniforms`` when supplied (one per bit), else ``rng``.
    """
    if not 2 <= t <= s.T:
        raise ValueError(f"denoise_step needs 2 <= t <= {s.T}, got {t}")
    p, _ = step_probs(net, z_t, t, s, temperature, guidance, cond, target)
    if uniforms is None:
        uniforms = rng.random(p.shape)
    return bits_from_uniform(p, uniforms)


def _check(net: DenoiserNet, s: NoiseSchedule):
    if net.T != s.T:
        raise ValueError(f"network trained with T={net.T} but schedule has T={s.T}")


def _run_chain(net, req: SampleRequest, s: NoiseSchedule, inpaint: bool):
    _check(net, s)
    n, D = req.num_samples, net.D
    streams = ChainStreams(req.seed, n)
    trace = SampleTrace() if req.trace else None
    cond = None if req.cond is None else np.full(n, req.cond)
    kw = dict(temperature=req.temperature, guidance=req.guidance, cond=cond)
    mask = req.mask if inpaint else None
    if mask is not None and mask.shape != (D,):
        raise ValueError(f"mask length {mask.shape} does not match latent size {D}")
    use_mask = mask is not None and mask.any()

    def clamp_observed(z, t):
        if not use_mask:
            return z
        fresh = bits_from_uniform(marginal_params(req.observed, t, s), ChainStreams.uniform(streams.aux, D))
        return np.where(mask, fresh, z).astype(np.uint8)

    z = bits_from_uniform(np.full((n, D), 0.5), ChainStreams.uniform(streams.main, D))
    z = clamp_observed(z, s.T)
    if trace is not None:
        trace.z.append(z.copy())
    for t in range(s.T, 1, -1):
        p, f = step_probs(net, z, t, s, target=req.target, **kw)
        z = bits_from_uniform(p, ChainStreams.uniform(streams.main, D))
        z = clamp_observed(z, t - 1)
        if trace is not None:
            trace.z.append(z.copy())
            trace.flip.append(f)
    p0 = final_probs(net, z, target=req.target, **kw)
    z = bits_from_uniform(p0, ChainStreams.uniform(streams.main, D))
    z = clamp_observed(z, 0)
    if trace is not None:
        trace.z.append(z.copy())
    return z, trace


def sample_chain(net: DenoiserNet, req: SampleRequest, s: NoiseSchedule):
    """Run the reverse chain from B(0.5) noise down to clean bits.

    Returns ``(bits, trace)``; ``trace`` is None unless ``req.trace`` is set.
    Chain ``i`` draws from a generator seeded with ``req.seed ^ i``.
    """
    return _run_chain(net, req, s, inpaint=False)


def inpaint_chain(net: DenoiserNet, req: SampleRequest, s: NoiseSchedule):
    """Sample with some bits observed.

    After every step the observed positions are replaced by a fresh draw
    from their forward marginal at the new noise level, so at the end they
    hold the observed values exactly.
    """
    if req.mask is None:
        raise ValueError("inpainting needs a mask and observed values")
    return _run_chain(net, req, s, inpaint=True)


def mean_entropy(p) -> float:
    """Mean per-bit Bernoulli entropy in nats."""
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-300, 1.0)
    q = np.clip(1.0 - np.asarray(p, dtype=np.float64), 1e-300, 1.0)
    return float(np.mean(-(p * np.log(p) + q * np.log(q))))
