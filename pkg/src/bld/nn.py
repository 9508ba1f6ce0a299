"""Small numpy networks with hand-written backprop, and Adam.

Parameters live in plain ``dict[str, np.ndarray]`` so the optimizer,
checkpointing and gradient checks can treat every network the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import sigmoid


class StaleCacheError(RuntimeError):
    """Backward was called with a cache from different parameters."""


def silu(x):
    s = sigmoid(x)
    return x * s, s


def silu_grad(x, s):
    return s * (1.0 + x * (1.0 - s))


def he_normal(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


@dataclass
class Cache:
    params: dict
    tensors: list = field(default_factory=list)


def param_count(D: int, H: int, L: int, T: int, num_classes: int = 0) -> int:
    n = D * H + H + L * (H * H + H) + H * D + D + T * H
    if num_classes:
        n += (num_classes + 1) * H
    return n


class DenoiserNet:
    """Residual MLP mapping (z_t, t, class) to per-bit logits.

    The input projection of ``2 z - 1`` is summed with a learned embedding of
    the step and, when ``num_classes > 0``, of the class (index
    ``num_classes`` is the null token).  Each hidden block adds
    ``silu(h W + b)`` to its input; the head reads ``silu(h)``.
    """

    def __init__(self, D: int, T: int, H: int = 128, L: int = 2, num_classes: int = 0,
                 rng: np.random.Generator | None = None, zero: bool = False):
        self.D, self.T, self.H, self.L, self.num_classes = D, T, H, L, num_classes
        rng = np.random.default_rng(0) if rng is None else rng
        p = {}
        p["w_in"] = he_normal(rng, D, H)
        p["b_in"] = np.zeros(H)
        for i in range(L):
            p[f"w_{i}"] = he_normal(rng, H, H)
            p[f"b_{i}"] = np.zeros(H)
        p["w_out"] = he_normal(rng, H, D)
        p["b_out"] = np.zeros(D)
        p["t_emb"] = rng.normal(0.0, 0.02, size=(T, H))
        if num_classes:
            p["c_emb"] = rng.normal(0.0, 0.02, size=(num_classes + 1, H))
        if zero:
            p = {k: np.zeros_like(v) for k, v in p.items()}
        self.params = p

    @property
    def null_class(self) -> int:
        return self.num_classes

    def config(self) -> dict:
        return {"D": self.D, "T": self.T, "H": self.H, "L": self.L, "num_classes": self.num_classes}

    def describe(self) -> dict:
        shapes = {k: list(v.shape) for k, v in self.params.items()}
        total = sum(v.size for v in self.params.values())
        assert total == param_count(self.D, self.H, self.L, self.T, self.num_classes)
        return {"config": self.config(), "shapes": shapes, "total": total}

    def _class_index(self, cond, B: int):
        if not self.num_classes:
            if cond is not None and np.any(np.asarray(cond) >= 0):
                raise ValueError("network has no class embeddings")
            return None
        if cond is None:
            return np.full(B, self.null_class)
        c = np.broadcast_to(np.asarray(cond, dtype=np.int64), (B,)).copy()
        c[c < 0] = self.null_class
        if np.any(c > self.null_class):
            raise ValueError(f"class id out of range [0, {self.num_classes})")
        return c

    def forward(self, z_t, t, cond=None):
        """Return ``(logits, cache)``.  ``cond`` entries < 0 or None mean unconditional."""
        x = np.asarray(z_t, dtype=np.float64)
        if x.ndim == 1:
            x = x[None]
        if x.shape[-1] != self.D:
            raise ValueError(f"expected {self.D} bits, got {x.shape[-1]}")
        B = x.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (B,))
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"step outside [1, {self.T}]")
        c = self._class_index(cond, B)
        p = self.params
        xin = 2.0 * x - 1.0
        h = xin @ p["w_in"] + p["b_in"] + p["t_emb"][t - 1]
        if c is not None:
            h = h + p["c_emb"][c]
        tensors = [xin, t, c]
        for i in range(self.L):
            u = h @ p[f"w_{i}"] + p[f"b_{i}"]
            a, s = silu(u)
            tensors.append((h, u, s))
            h = h + a
        a, s = silu(h)
        tensors.append((h, a, s))
        logits = a @ p["w_out"] + p["b_out"]
        return logits, Cache(params=p, tensors=tensors)

    def backward(self, cache: Cache | None, dlogits) -> dict:
        if cache is None or not cache.tensors:
            raise StaleCacheError("missing forward cache")
        if cache.params is not self.params:
            raise StaleCacheError("cache was produced with different parameters")
        p = self.params
        g = {}
        xin, t, c = cache.tensors[:3]
        h, a, s = cache.tensors[-1]
        dlogits = np.asarray(dlogits, dtype=np.float64)
        g["w_out"] = a.T @ dlogits
        g["b_out"] = dlogits.sum(0)
        dh = (dlogits @ p["w_out"].T) * silu_grad(h, s)
        for i in reversed(range(self.L)):
            h_i, u, s_u = cache.tensors[3 + i]
            du = dh * silu_grad(u, s_u)
            g[f"w_{i}"] = h_i.T @ du
            g[f"b_{i}"] = du.sum(0)
            dh = dh + du @ p[f"w_{i}"].T
        g["w_in"] = xin.T @ dh
        g["b_in"] = dh.sum(0)
        g["t_emb"] = np.zeros_like(p["t_emb"])
        np.add.at(g["t_emb"], t - 1, dh)
        if c is not None:
            g["c_emb"] = np.zeros_like(p["c_emb"])
            np.add.at(g["c_emb"], c, dh)
        return g


class MLP:
    """Plain feed-forward net with silu hidden layers and a linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None,
                 zero: bool = False, prefix: str = ""):
        rng = np.random.default_rng(0) if rng is None else rng
        self.sizes = list(sizes)
        self.prefix = prefix
        self.params = {}
        for i, (m, n) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.params[f"{prefix}w{i}"] = np.zeros((m, n)) if zero else he_normal(rng, m, n)
            self.params[f"{prefix}b{i}"] = np.zeros(n)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x):
        p, pre = self.params, self.prefix
        h = np.asarray(x, dtype=np.float64)
        tensors = []
        for i in range(self.n_layers):
            u = h @ p[f"{pre}w{i}"] + p[f"{pre}b{i}"]
            if i < self.n_layers - 1:
                a, s = silu(u)
                tensors.append((h, u, s))
                h = a
            else:
                tensors.append((h, None, None))
                h = u
        return h, Cache(params=p, tensors=tensors)

    def backward(self, cache: Cache | None, dout):
        """Return ``(grads, d_input)``."""
        if cache is None or not cache.tensors:
            raise StaleCacheError("missing forward cache")
        if cache.params is not self.params:
            raise StaleCacheError("cache was produced with different parameters")
        p, pre = self.params, self.prefix
        g = {}
        d = np.asarray(dout, dtype=np.float64)
        for i in reversed(range(self.n_layers)):
            h, u, s = cache.tensors[i]
            if u is not None:
                d = d * silu_grad(u, s)
            g[f"{pre}w{i}"] = h.T @ d
            g[f"{pre}b{i}"] = d.sum(0)
            d = d @ p[f"{pre}w{i}"].T
        return g, d


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def current_lr(self, step: int | None = None) -> float:
        """Learning rate used at the given 1-based step (default: the next one)."""
        step = self.step + 1 if step is None else step
        if self.warmup_steps > 0 and step < self.warmup_steps:
            return self.lr * step / self.warmup_steps
        return self.lr

    def to_json(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
            "warmup_steps": self.warmup_steps, "step": self.step,
            "m": {k: v.tolist() for k, v in self.m.items()},
            "v": {k: v.tolist() for k, v in self.v.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "AdamState":
        d = dict(d)
        m = {k: np.asarray(v, dtype=np.float64) for k, v in d.pop("m").items()}
        v = {k: np.asarray(x, dtype=np.float64) for k, x in d.pop("v").items()}
        return cls(m=m, v=v, **d)


def warmup_steps_for(fraction: float, total_steps: int) -> int:
    return int(round(fraction * total_steps))


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """Apply one bias-corrected Adam update; returns a new parameter dict.

    The input arrays are not modified.  Parameters without a gradient entry
    are carried over unchanged.  ``state`` is advanced in place.
    """
    for k, g in grads.items():
        if k not in params:
            raise KeyError(f"gradient for unknown parameter {k!r}")
        if g.shape != params[k].shape:
            raise ValueError(f"shape mismatch for {k!r}: {g.shape} vs {params[k].shape}")
    lr = state.current_lr()
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    out = dict(params)
    for k, g in grads.items():
        m = state.m.get(k)
        v = state.v.get(k)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[k], state.v[k] = m, v
        out[k] = params[k] - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return out


def all_finite(params: dict) -> bool:
    return all(np.all(np.isfinite(v)) for v in params.values())
