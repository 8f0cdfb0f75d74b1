"""
Log-normal link fading
======================

How the optical link between two submerged nodes is modelled: a geometric
path loss plus a random log-normal gain whose spread comes from the water.
"""

import numpy as np

from uvlc_diffusion import channel

# attenuation of a 6 degree beam in clear ocean water
for d in (1.0, 5.0, 10.0, 20.0):
    g = channel.path_loss(channel.LinkGeometry.from_degrees(d), channel.CLEAR_OCEAN)
    print(f"path loss at {d:4.0f} m: {g:.3e}")

# the embedded variance tables
channel_text = channel.distance_table_csv(channel.DEFAULT_TABLE).splitlines()
print("\n".join(channel_text[:6]), "\n...")

# draw gains at three turbulence levels; unit-mean links keep E[I] = 1
rng = np.random.default_rng(0)
for d in (1, 10, 20):
    s2 = channel.lookup_variance_by_distance(channel.DEFAULT_TABLE, d)
    model = channel.FadingModel(s2)
    I = channel.sample_fading(model, rng, size=200_000)
    print(
        f"d={d:2d} m  sigma_x^2={s2:.2e}  mean={I.mean():.4f}  "
        f"var={I.var():.4f} (exact {np.expm1(4 * s2):.4f})  scintillation={model.scintillation_index:.4f}"
    )

# the literal normalisation shifts the mean above one
lit = channel.FadingModel(1.38e-1, channel.Normalization.PAPER_LITERAL)
print("E[I] with mu_x = -sigma_x^2/2:", channel.link_moments(lit)[0])
