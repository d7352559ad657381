"""Searched constants of the cut-off construction.

For each (n, k): the largest D keeping beta_1 psh on the scaled model grid,
then the smallest C0 making the exhaustion psh at D = D_star / 2, and the
resulting metric constants.  C0_star does not move with r.

    python demos/constants.py
"""

from psh_lab import construction
from psh_lab.model import ModelParams

GRID = {"N": 16, "n_theta": 8}

for n, k in [(1, 0), (2, 0), (2, 1)]:
    D = construction.search_D(n, k, **GRID).D_star
    c0 = {r: construction.search_C0(r, D / 2, n, k, **GRID).C0_star for r in (0.4, 0.1)}
    est = construction.verify_duval_conditions(ModelParams(n=n, k=k, r=0.4, D=D / 2, C0=2 * c0[0.4]), **GRID)
    print(f"n={n} k={k}: D*={D:.4f}  C0*(r=0.4)={c0[0.4]:.4f}  C0*(r=0.1)={c0[0.1]:.4f}")
    print(f"    C1={est.C1:.3f} C2={est.C2:.3f} A1={est.A1:.3f}  conditions {'hold' if est.passed else 'FAIL'}")
    for name, ok in est.conditions.items():
        print(f"      {name}: {ok}")
