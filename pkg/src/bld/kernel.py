"""Closed-form Bernoulli diffusion kernels.

Every function works per bit and broadcasts over leading batch axes.  Steps
``t`` may be a Python int or an integer array with one entry per row of the
batch; arrays are aligned to the leading axis.
"""

from __future__ import annotations

import numpy as np

from .schedule import NoiseSchedule

EPS = 1e-7


def clamp(p) -> np.ndarray:
    return np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _bits(z) -> np.ndarray:
    z = np.asarray(z)
    if z.dtype == np.bool_:
        return z.astype(np.float64)
    zf = z.astype(np.float64)
    if np.any((zf != 0.0) & (zf != 1.0)):
        raise ValueError("bit arrays must contain only 0 and 1")
    return zf


def _steps(t, lo: int, hi: int, ndim: int):
    """Validate t in [lo, hi] and shape it to broadcast against (B, ..., D)."""
    ta = np.asarray(t)
    if not np.issubdtype(ta.dtype, np.integer):
        if np.any(ta != np.round(ta)):
            raise ValueError(f"step must be an integer, got {t!r}")
        ta = ta.astype(np.int64)
    if np.any(ta < lo) or np.any(ta > hi):
        raise ValueError(f"step {t!r} outside [{lo}, {hi}]")
    if ta.ndim == 0:
        return int(ta)
    return ta.reshape(ta.shape + (1,) * max(ndim - ta.ndim, 0))


def forward_one_step_params(z_prev, t, s: NoiseSchedule) -> np.ndarray:
    """P(z_t = 1 | z_{t-1}) = z_{t-1} (1 - beta_t) + beta_t / 2."""
    z = _bits(z_prev)
    t = _steps(t, 1, s.T, z.ndim)
    beta = s.beta[t]
    return clamp(z * (1.0 - beta) + 0.5 * beta)


def marginal_params(z0, t, s: NoiseSchedule) -> np.ndarray:
    """P(z_t = 1 | z_0) = k_t z_0 + b_t.  At t = 0 the bits come back unclamped."""
    z = _bits(z0)
    t = _steps(t, 0, s.T, z.ndim)
    p = s.k[t] * z + s.b[t]
    if np.ndim(t) == 0 and t == 0:
        return p
    return np.where(np.asarray(t) == 0, p, clamp(p))


def _posterior(z_t, z0, t, s: NoiseSchedule) -> np.ndarray:
    # unchecked core of bayes_posterior_params; z_t, z0 float arrays, t shaped
    beta = s.beta[t]
    # likelihood of the observed z_t under z_{t-1} = 1 and z_{t-1} = 0
    like1 = z_t * (1.0 - 0.5 * beta) + (1.0 - z_t) * (0.5 * beta)
    like0 = z_t * (0.5 * beta) + (1.0 - z_t) * (1.0 - 0.5 * beta)
    prior1 = s.k[t - 1] * z0 + s.b[t - 1]
    num1 = like1 * prior1
    num0 = like0 * (1.0 - prior1)
    return clamp(num1 / (num1 + num0))


def bayes_posterior_params(z_t, z0, t, s: NoiseSchedule) -> np.ndarray:
    """P(z_{t-1} = 1 | z_t, z_0) for 2 <= t <= T."""
    zt, z0 = np.broadcast_arrays(_bits(z_t), _bits(z0))
    t = _steps(t, 2, s.T, zt.ndim)
    return _posterior(zt, z0, t, s)


def _mixture(z_t, p_z0, t, s: NoiseSchedule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a0 = _posterior(z_t, np.zeros_like(z_t), t, s)
    a1 = _posterior(z_t, np.ones_like(z_t), t, s)
    return a0 + (a1 - a0) * p_z0, a0, a1


def reverse_mixture_params(z_t, p_z0, t, s: NoiseSchedule) -> np.ndarray:
    """P(z_{t-1} = 1 | z_t) after marginalising the posterior over a predicted z_0.

    ``p_z0`` is the per-bit probability that z_0 = 1; the endpoints 0 and 1
    are accepted and reproduce the corresponding posterior exactly.
    """
    p = np.asarray(p_z0, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p_z0 must lie in [0, 1]")
    zt, p = np.broadcast_arrays(_bits(z_t), p)
    t = _steps(t, 2, s.T, zt.ndim)
    return _mixture(zt, p, t, s)[0]


def reverse_closed_form(z_t, p_z0, t, s: NoiseSchedule, indexing: str = "printed") -> np.ndarray:
    """Single-fraction reverse parameter with a normaliser over z_{t-1}.

    ``indexing="printed"`` weights the z_0 prediction with ``k_t p + b_t/2``;
    ``indexing="shifted"`` uses the z_{t-1} marginal ``k_{t-1} p + b_{t-1}``.
    Neither equals :func:`reverse_mixture_params` for fractional ``p_z0``;
    the shifted form agrees at ``p_z0 in {0, 1}``.  Kept as a diagnostic.
    """
    zt, p = np.broadcast_arrays(_bits(z_t), np.asarray(p_z0, dtype=np.float64))
    t = _steps(t, 2, s.T, zt.ndim)
    beta = s.beta[t]
    if indexing == "printed":
        kk, bb = s.k[t], 0.5 * s.b[t]
    elif indexing == "shifted":
        kk, bb = s.k[t - 1], s.b[t - 1]
    else:
        raise ValueError(f"unknown indexing {indexing!r}")
    num = ((1.0 - beta) * zt + 0.5 * beta) * (kk * p + bb)
    other = ((1.0 - beta) * (1.0 - zt) + 0.5 * beta) * (kk * (1.0 - p) + bb)
    return clamp(num / (num + other))


def flip_to_z0_probs(z_t, flip) -> np.ndarray:
    """P(z_0 = 1) given the current bits and a predicted flipping probability."""
    zt = _bits(z_t)
    f = np.asarray(flip, dtype=np.float64)
    return (1.0 - zt) * f + zt * (1.0 - f)


def sample_bits(p, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, returned as uint8 bits."""
    p = np.asarray(p, dtype=np.float64)
    return (rng.random(p.shape) < p).astype(np.uint8)


def bits_from_uniform(p, u) -> np.ndarray:
    return (np.asarray(u) < np.asarray(p)).astype(np.uint8)
