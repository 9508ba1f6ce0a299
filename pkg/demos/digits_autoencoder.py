"""
A binary autoencoder on 8x8 digits
==================================

Pixels go in, 32 Bernoulli bits come out of the encoder, and the decoder
sees only those bits.  Gradients cross the sampling step with the
straight-through rule.  The codes are written in the packed BLDS format and
the reconstructions as a PGM grid.
"""

import numpy as np

from bld.binae import BinaryAutoencoder, bit_entropy, fit_autoencoder, pixel_accuracy
from bld.data import load_digits_bits
from bld.formats import read_blds, tile, write_blds, write_pgm
from bld.nn import AdamState

x, labels = load_digits_bits()
print("images:", x.shape, "mean ink:", round(float(x.mean()), 3))

rng = np.random.default_rng(0)
ae = BinaryAutoencoder(64, latent_dim=32, hidden=(128,), rng=rng)
steps = fit_autoencoder(ae, x, 3000, rng, opt=AdamState(lr=5e-4))
print(f"loss {steps[0].loss:.3f} -> {steps[-1].loss:.3f}")
print("round-trip pixel accuracy:", round(pixel_accuracy(ae, x, rng), 3))

_, z = ae.encode(x, rng)
print("latent bits carrying information:", int((bit_entropy(z) > 0).sum()), "of", z.shape[1])

# The codes survive bit-packing exactly.
write_blds("digits_latents.blds", z)
assert np.array_equal(read_blds("digits_latents.blds"), z)

# One row of originals over one row of reconstructions.
first = [np.flatnonzero(labels == d)[0] for d in range(10)]
grid = np.concatenate([x[first], ae.decode(z[first])]).reshape(-1, 8, 8)
write_pgm(tile(grid, ncols=10), "digits_roundtrip.pgm")
print("wrote digits_latents.blds and digits_roundtrip.pgm")
