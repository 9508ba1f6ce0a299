"""Noise schedules for the forward Bernoulli diffusion.

A schedule stores, for t = 0..T, the accumulated retain factor ``k[t]`` and
drift ``b[t]`` such that ``q(z_t = 1 | z_0) = k[t] * z_0 + b[t]``, plus the
per-step noise scale ``beta[t]`` for t = 1..T.  Index 0 of ``beta`` is unused
(stored as NaN) so that every array is indexed directly by the step number.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TOL = 1e-12
TERMINAL_K_MAX = 1e-6


class ScheduleError(ValueError):
    """Invalid schedule configuration or an inconsistent k/beta sequence."""


class ScheduleKind(str, enum.Enum):
    LINEAR = "linear"
    COSINE = "cosine"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, kind: "ScheduleKind | str") -> "ScheduleKind":
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).lower())
        except ValueError:
            raise ScheduleError(f"unknown schedule kind {kind!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    kind: ScheduleKind
    beta: np.ndarray  # length T+1, beta[0] unused
    k: np.ndarray  # length T+1, k[0] = 1
    b: np.ndarray  # length T+1, b[0] = 0

    @classmethod
    def from_k(cls, k, kind: ScheduleKind | str = ScheduleKind.CUSTOM) -> "NoiseSchedule":
        """Assemble a schedule from a k array without checking invariants.

        beta is recovered as ``1 - k[t]/k[t-1]`` and b follows its own
        recurrence, so the stored arrays are mutually consistent only as far
        as ``k`` itself is well formed.  Use :func:`validate` to check.
        """
        k = np.asarray(k, dtype=np.float64)
        if k.ndim != 1 or k.size < 2:
            raise ScheduleError("k must be a 1-d array with at least two entries")
        T = k.size - 1
        beta = np.full(T + 1, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            beta[1:] = 1.0 - k[1:] / k[:-1]
        b = _b_recurrence(beta)
        return cls(T=T, kind=ScheduleKind.parse(kind), beta=_frozen(beta), k=_frozen(k), b=_frozen(b))

    def as_rows(self) -> list[tuple[int, float, float, float]]:
        return [(t, float(self.beta[t]), float(self.k[t]), float(self.b[t])) for t in range(1, self.T + 1)]

    def to_csv(self) -> str:
        lines = ["t,beta,k,b"]
        lines += [f"{t},{beta!r},{k!r},{b!r}" for t, beta, k, b in self.as_rows()]
        return "\n".join(lines) + "\n"


def _b_recurrence(beta: np.ndarray) -> np.ndarray:
    b = np.zeros_like(beta)
    for t in range(1, beta.size):
        b[t] = (1.0 - beta[t]) * b[t - 1] + 0.5 * beta[t]
    return b


def beta_from_k(k) -> np.ndarray:
    """Per-step noise scales implied by an accumulated retain factor.

    Returns an array of length T (entry i is the scale of step i + 1).

    >>> beta_from_k([1.0, 0.75, 0.5, 0.25, 0.0]).round(6).tolist()
    [0.25, 0.333333, 0.5, 1.0]
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 1 or k.size < 2:
        raise ScheduleError("k must be a 1-d array with at least two entries")
    if k[0] != 1.0:
        raise ScheduleError(f"k[0] must be 1, got {k[0]!r}")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ScheduleError("k must be finite and non-negative")
    steps = np.diff(k)
    if np.any(steps >= 0):
        t = int(np.argmax(steps >= 0)) + 1
        raise ScheduleError(f"k must be strictly decreasing (zero-noise or increasing step at t={t})")
    return 1.0 - k[1:] / k[:-1]


def _linear_k(T: int) -> np.ndarray:
    return 1.0 - np.arange(T + 1, dtype=np.float64) / T


def _cosine_k(T: int) -> np.ndarray:
    k = np.cos(0.5 * np.pi * np.arange(T + 1, dtype=np.float64) / T) ** 2
    k[0] = 1.0
    return k


def build_schedule(kind: ScheduleKind | str, T: int, k=None) -> NoiseSchedule:
    """Build and validate a schedule.

    ``kind`` is ``linear`` (k[t] = 1 - t/T), ``cosine``
    (k[t] = cos^2(pi t / 2T)) or ``custom`` (explicit ``k`` of length T+1).
    Raises :class:`ScheduleError` if the result violates any invariant.
    """
    kind = ScheduleKind.parse(kind)
    if isinstance(T, bool) or int(T) != T or T < 1:
        raise ScheduleError(f"T must be a positive integer, got {T!r}")
    T = int(T)
    if kind is ScheduleKind.LINEAR:
        k_arr = _linear_k(T)
    elif kind is ScheduleKind.COSINE:
        k_arr = _cosine_k(T)
    else:
        if k is None:
            raise ScheduleError("custom schedule requires an explicit k array")
        k_arr = np.asarray(k, dtype=np.float64)
        if k_arr.shape != (T + 1,):
            raise ScheduleError(f"custom k must have length T+1={T + 1}, got {k_arr.shape}")
    beta_from_k(k_arr)  # raises on non-monotone input
    s = NoiseSchedule.from_k(k_arr, kind)
    problems = validate(s)
    if problems:
        raise ScheduleError("; ".join(problems))
    return s


def validate(s: NoiseSchedule, tol: float = TOL) -> list[str]:
    """Check every schedule invariant; an empty list means the schedule is valid."""
    out: list[str] = []
    T, beta, k, b = s.T, s.beta, s.k, s.b
    if not (len(beta) == len(k) == len(b) == T + 1):
        return [f"array lengths must all be T+1={T + 1}"]
    if k[0] != 1.0:
        out.append("k^0 must be 1")
    if b[0] != 0.0:
        out.append("b^0 must be 0")
    for t in range(1, T + 1):
        if not (0.0 < beta[t] <= 1.0):
            out.append(f"beta outside (0,1] at t={t}")
        if abs(k[t] - k[t - 1] * (1.0 - beta[t])) > tol:
            out.append(f"k recurrence broken at t={t}")
        if abs(b[t] - ((1.0 - beta[t]) * b[t - 1] + 0.5 * beta[t])) > tol:
            out.append(f"b recurrence broken at t={t}")
        if k[t] >= k[t - 1]:
            out.append(f"k not strictly decreasing at t={t}")
    for t in range(T + 1):
        if abs(k[t] + 2.0 * b[t] - 1.0) > tol:
            out.append(f"k+2b≠1 at t={t}")
        if not (0.0 <= k[t] <= 1.0):
            out.append(f"k outside [0,1] at t={t}")
        if not (0.0 <= b[t] <= 0.5):
            out.append(f"b outside [0,0.5] at t={t}")
    if k[T] > TERMINAL_K_MAX:
        out.append(f"terminal k too large: k^T={k[T]!r} > {TERMINAL_K_MAX}")
    return out
