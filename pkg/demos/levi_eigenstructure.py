"""Levi and gradient forms of the square-root product model.

Samples points off the tube around both planes and checks, pointwise, that
the Levi form of sqrt(rho1 rho2) and the gradient form of rho1 rho2 act on
the predicted two-dimensional subspace with the predicted eigenvalues, and
that sqrt(rho1 rho2) is psh while rho1 rho2 degenerates exactly on V.

    python demos/levi_eigenstructure.py
"""

import numpy as np

from psh_lab import levi

rng = np.random.default_rng(0)
for n, k in [(1, 0), (2, 0), (2, 1), (3, 1)]:
    pts = levi.random_points(n, k, 2000, rng)
    m0 = levi.verify_lemma_M0(pts, n, k)
    m1 = levi.verify_lemma_M1(pts, n, k)
    prod = levi.verify_ddcf2(pts, n, k)
    rep = levi.verify_strict_psh_prod(
        n, k, pts, levi.sample_variety_V(n, k, 100, rng), levi.sample_off_V(n, k, 100, 0.1, rng)
    )
    print(f"n={n} k={k}")
    print(f"  Levi(sqrt(rho1 rho2)) subspace residual  {m0.max_residual:.1e}")
    print(f"  gradient form residual                   {m1.max_residual:.1e}")
    print(f"  product identity residual                {prod.max():.1e}")
    print(f"  min eigenvalue of Levi(sqrt(rho1 rho2))  {rep.min_eig_sqrt:.1e}")
    print(f"  smallest Levi eigenvalue of rho1 rho2 on V {rep.max_small_eig_on_V:.1e}, off V {rep.min_eig_off_V:.2e}")
