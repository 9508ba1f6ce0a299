"""Brute-force reference computations.

Everything here is derived from the one-step transition matrices alone
(no accumulated k/b factors) and written in plain Python loops over
outcomes, so it shares nothing with the closed-form kernels it checks.
"""

from __future__ import annotations

import math

import numpy as np


def one_step_matrix(beta: float) -> np.ndarray:
    """Row z_{t-1}, column z_t."""
    stay = 1.0 - 0.5 * beta
    return np.array([[stay, 1.0 - stay], [1.0 - stay, stay]])


def compose_marginal(s, t: int) -> np.ndarray:
    """P(z_t | z_0) as a 2x2 matrix (row z_0), by multiplying one-step matrices."""
    if not 0 <= t <= s.T:
        raise ValueError(f"t={t} outside [0, {s.T}]")
    M = np.eye(2)
    for i in range(1, t + 1):
        M = M @ one_step_matrix(float(s.beta[i]))
    return M


def posterior(z_t: int, z0: int, t: int, s) -> float:
    """P(z_{t-1} = 1 | z_t, z_0) by Bayes over the enumerated z_{t-1}."""
    prior = compose_marginal(s, t - 1)[z0]
    step = one_step_matrix(float(s.beta[t]))
    joint = [prior[v] * step[v, z_t] for v in (0, 1)]
    evidence = compose_marginal(s, t)[z0, z_t]
    return joint[1] / evidence


def exact_reverse(z_t: int, p_z0: float, t: int, s) -> float:
    """P(z_{t-1} = 1 | z_t) for a predicted clean-bit probability, by enumeration."""
    total = 0.0
    for z0, w in ((0, 1.0 - p_z0), (1, p_z0)):
        if w == 0.0:
            continue
        total += w * posterior(z_t, z0, t, s)
    return total


def numeric_kl(p: float, q: float) -> float:
    """KL(B(p) || B(q)) summed over the two outcomes."""
    P = {0: 1.0 - p, 1: p}
    Q = {0: 1.0 - q, 1: q}
    total = 0.0
    for x in (0, 1):
        if P[x] > 0.0:
            total += P[x] * math.log(P[x] / Q[x])
    return total


def encode_rows(bits) -> np.ndarray:
    """Integer code of each row, first bit most significant."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def tv_distance(samples, target) -> float:
    """Total variation between the empirical law of ``samples`` and ``target``.

    ``target`` is a length-2**d probability table indexed by row code.
    """
    samples = np.asarray(samples)
    d = samples.shape[1]
    if d > 16:
        raise ValueError("support too large to enumerate (d > 16)")
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (2 ** d,):
        raise ValueError(f"target must have {2 ** d} entries")
    counts = np.bincount(encode_rows(samples), minlength=2 ** d)
    emp = counts / counts.sum()
    return 0.5 * float(np.abs(emp - target).sum())
