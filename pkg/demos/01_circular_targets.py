"""
Circular orientation targets
============================

Yaw is split into 72 bins of 5 degrees. Training targets are Gaussians over
bins measured with wrap-around distance, so 355 and 5 degrees are neighbours.
"""

import numpy as np

from parthoe.circular import (
    bin_to_deg, circ_diff, circular_gaussian, decode_orientation, deg_to_bin, orientation_metrics,
)

# %%
# Angles map to bins by rounding to the nearest 5 degrees.
for angle in (0.0, 2.4, 2.5, 357.6, 181.0):
    print(f"{angle:6.1f} deg -> bin {deg_to_bin(angle):2d} -> {bin_to_deg(deg_to_bin(angle)):5.1f} deg")

# %%
# A target near 0 deg spills over into the last bins instead of being cut off.
p = circular_gaussian(1, sigma=3.0)
print("mass on bins 66..71:", round(float(p[66:].sum()), 4))
print("sum:", p.sum(), " argmax:", np.argmax(p))

# %%
# Rotating the label rotates the target by the same number of bins.
q = circular_gaussian(25, sigma=3.0)
print("rotation exact:", np.array_equal(q, np.roll(p, 24)))

# %%
# Decoding takes the most likely bin. A blurred, bimodal guess still decodes
# to its stronger peak.
mix = 0.6 * circular_gaussian(10, 2.0) + 0.4 * circular_gaussian(46, 2.0)
print("decoded:", decode_orientation(mix), "deg")

# %%
# Errors are circular: 350 vs 10 is 20 degrees apart, not 340.
print("circ_diff(350, 10) =", circ_diff(350.0, 10.0))
rng = np.random.default_rng(0)
gt = rng.uniform(0, 360, 1000)
pred = gt + rng.normal(0, 10, 1000)
print({k: round(v, 3) for k, v in orientation_metrics(pred, gt).items()})
