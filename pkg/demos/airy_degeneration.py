"""At tau = 0 the Lax-pair kernel is the shifted Airy kernel.

Run: python3 demos/airy_degeneration.py
"""
import numpy as np

from pgue import psi as Q

grid = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)

for s in (-1.0, 0.0, 1.0, 4.0):
    K = Q.kernel_matrix(Q.LaxCoefficients.airy(s), grid)
    ref = np.array([[Q.airy_kernel(u + s, v + s) for v in grid] for u in grid])
    print(f"s = {s:5.1f}   K(0.5, 0.5) = {K[3, 3]:.12f}   max |K_Psi - K_Ai| = "
          f"{np.max(np.abs(K - ref)):.1e}")
