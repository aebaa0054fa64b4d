"""
Scoring sharpness with the variance of the Laplacian
====================================================

A synthetic texture is blurred with growing sigma and scored after each step.
"""

import numpy as np

from blurscope.imageio import GrayImage, gaussian_blur, synth_texture
from blurscope.laplacian import LAPLACIAN_4, LAPLACIAN_8, convolve, laplacian_variance

# a 64x64 texture of random gratings plus noise, fixed by its seed
texture = synth_texture(seed=3)
print("texture", texture.width, "x", texture.height)

# the response map has the image's shape; the score is its population variance
response = convolve(texture, LAPLACIAN_4)
print("response range", response.min(), response.max())
print("sharp score", laplacian_variance(texture))

# blur removes edges, so the score drops
for sigma in (0.5, 1, 2, 4):
    print(f"sigma {sigma:>3}: {laplacian_variance(gaussian_blur(texture, sigma)):.6f}")

# the 8-neighbour mask also responds to diagonal edges
print("8-neighbour score", laplacian_variance(texture, LAPLACIAN_8))

# a flat image has no edges inside, but zero padding still produces a rim response
flat = GrayImage(np.full((16, 16), 0.5))
print("flat grey score", laplacian_variance(flat))
