"""Binary autoencoder trained through a straight-through Bernoulli layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import clamp, sample_bits, sigmoid
from .nn import MLP, AdamState, adam_step, all_finite
from .model import NonFiniteLossError


def straight_through(z, y, y_stop=None) -> np.ndarray:
    """Forward value of ``stop(z) + y - stop(y)``.

    With ``y_stop`` omitted the stopped copy is ``y`` itself and the result is
    exactly ``z``.  Passing the unperturbed ``y`` as ``y_stop`` while ``y``
    varies evaluates the surrogate off its base point, which is what a
    finite-difference check of the gradient needs.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"shape mismatch {z.shape} vs {y.shape}")
    if y_stop is None:
        return z.copy()
    return z + (y - np.asarray(y_stop, dtype=np.float64))


def straight_through_grad(upstream) -> np.ndarray:
    """Gradient reaching y from the surrogate: the upstream gradient, unchanged."""
    return np.asarray(upstream)


@dataclass
class AEStep:
    loss: float
    step: int
    lr: float


class BinaryAutoencoder:
    def __init__(self, input_dim: int, latent_dim: int = 32, hidden: tuple[int, ...] = (128,),
                 rng: np.random.Generator | None = None, zero: bool = False, loss: str = "bce"):
        rng = np.random.default_rng(0) if rng is None else rng
        if loss not in ("bce", "mse"):
            raise ValueError(f"unknown reconstruction loss {loss!r}")
        self.input_dim, self.latent_dim, self.hidden, self.loss = input_dim, latent_dim, tuple(hidden), loss
        self.encoder = MLP([input_dim, *hidden, latent_dim], rng, zero=zero, prefix="enc.")
        self.decoder = MLP([latent_dim, *hidden[::-1], input_dim], rng, zero=zero, prefix="dec.")

    def config(self) -> dict:
        return {"input_dim": self.input_dim, "latent_dim": self.latent_dim,
                "hidden": list(self.hidden), "loss": self.loss}

    @property
    def params(self) -> dict:
        return {**self.encoder.params, **self.decoder.params}

    @params.setter
    def params(self, p: dict):
        self.encoder.params = {k: v for k, v in p.items() if k.startswith("enc.")}
        self.decoder.params = {k: v for k, v in p.items() if k.startswith("dec.")}

    def _check(self, x, n):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None]
        if x.shape[-1] != n:
            raise ValueError(f"expected length {n}, got {x.shape[-1]}")
        return x

    def encode(self, x, rng: np.random.Generator):
        """Return ``(y, z)``: Bernoulli parameters and a sampled code."""
        x = self._check(x, self.input_dim)
        y = sigmoid(self.encoder.forward(x)[0])
        return y, sample_bits(y, rng)

    def decode(self, z) -> np.ndarray:
        z = self._check(z, self.latent_dim)
        return sigmoid(self.decoder.forward(z)[0])

    def _recon(self, xhat, x):
        if self.loss == "bce":
            xc = clamp(xhat)
            return -(x * np.log(xc) + (1 - x) * np.log1p(-xc))
        return (xhat - x) ** 2

    def loss_and_grad(self, x, u, weight: float = 1.0, y_stop=None):
        """Reconstruction loss and parameter gradients for a fixed draw.

        ``u`` holds the uniforms behind the Bernoulli sample (z = u < y), so
        the draw is reproducible; ``y_stop`` pins the stop-gradient copy of
        y (see :func:`straight_through`).
        """
        x = self._check(x, self.input_dim)
        enc_logits, enc_cache = self.encoder.forward(x)
        y = sigmoid(enc_logits)
        z = (u < (y if y_stop is None else y_stop)).astype(np.float64)
        zt = straight_through(z, y, y_stop)
        dec_logits, dec_cache = self.decoder.forward(zt)
        xhat = sigmoid(dec_logits)
        n = x.size
        loss = weight * float(self._recon(xhat, x).sum() / n)
        if self.loss == "bce":
            dlog = weight * (xhat - x) / n
        else:
            dlog = weight * 2.0 * (xhat - x) * xhat * (1.0 - xhat) / n
        g_dec, dzt = self.decoder.backward(dec_cache, dlog)
        dy = straight_through_grad(dzt)
        g_enc, _ = self.encoder.backward(enc_cache, dy * y * (1.0 - y))
        return loss, {**g_enc, **g_dec}

    def train_step(self, x, rng: np.random.Generator, opt: AdamState, weight: float = 1.0) -> AEStep:
        x = self._check(x, self.input_dim)
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        u = rng.random((x.shape[0], self.latent_dim))
        lr = opt.current_lr()
        loss, grads = self.loss_and_grad(x, u, weight)
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"non-finite autoencoder loss at step {opt.step + 1}")
        self.params = adam_step(self.params, grads, opt)
        if not all_finite(self.params):
            raise NonFiniteLossError(f"non-finite autoencoder parameters after step {opt.step}")
        return AEStep(loss=loss, step=opt.step, lr=lr)

    def reconstruct(self, x, rng: np.random.Generator) -> np.ndarray:
        _, z = self.encode(x, rng)
        return self.decode(z)


def ae_train_step(ae: BinaryAutoencoder, x, rng: np.random.Generator, opt: AdamState,
                  weight: float = 1.0) -> AEStep:
    return ae.train_step(x, rng, opt, weight)


def fit_autoencoder(ae: BinaryAutoencoder, data, steps: int, rng: np.random.Generator,
                    opt: AdamState | None = None, batch_size: int = 64, log=None) -> list[AEStep]:
    data = np.asarray(data, dtype=np.float64)
    opt = AdamState(lr=5e-4) if opt is None else opt
    out = []
    for _ in range(steps):
        idx = rng.integers(0, len(data), size=batch_size)
        rep = ae.train_step(data[idx], rng, opt)
        out.append(rep)
        if log is not None:
            log({"step": rep.step, "loss": rep.loss, "lr": rep.lr})
    return out


def pixel_accuracy(ae: BinaryAutoencoder, x, rng: np.random.Generator) -> float:
    x = np.asarray(x, dtype=np.float64)
    xhat = ae.reconstruct(x, rng)
    return float(np.mean((xhat >= 0.5) == (x >= 0.5)))


def bit_entropy(z) -> np.ndarray:
    """Empirical entropy (nats) of each latent bit over a batch of codes."""
    p = np.asarray(z, dtype=np.float64).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1 - p) * np.log(1 - p))
    return np.nan_to_num(h)
