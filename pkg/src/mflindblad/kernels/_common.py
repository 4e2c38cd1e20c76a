import numpy as np

# diffusion variants of the normalized pure-state stepper
ALGORITHM1 = 0  # (L - <L>) psi dW, drift -1/2 (L^dag L - <L^dag L>) psi
HALVED = 1  # (L - <L>/2) psi dW, same drift
CONSISTENT = 2  # pure-state image of the density-operator trajectory equation

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
U53 = 2.0**-53
TWO_PI = 2.0 * np.pi
