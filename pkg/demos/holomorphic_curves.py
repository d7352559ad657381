"""Areas of holomorphic curves with boundary on the two model planes.

Prints the reverse isoperimetric ratio K(s, u) for the default family and
the ratio (1/t) area_h for the sector inclusion, which must not decrease in
t.  The other curves of the family run the same way but take minutes each.

    python demos/holomorphic_curves.py
"""

import math

from psh_lab import construction, curves
from psh_lab.model import ModelParams

fam = curves.default_family()
tab = curves.estimate_K(fam, [0.05, 0.025, 0.0125], 0.1)
print("curve      s        length   area       K")
for row in tab.rows:
    print(f"{row.curve:9s} {row.s:7.4f}  {row.length:7.4f}  {row.area:.3e}  {row.K:.4f}")
print(f"sup K = {tab.sup:.4f}")

D = construction.search_D(1, 0, N=16, n_theta=8).D_star / 2
C0 = 2 * construction.search_C0(0.5, D, 1, 0, N=16, n_theta=8).C0_star
params = ModelParams(n=1, k=0, r=0.5, D=D, C0=C0)
sector = fam[0]
rep = curves.verify_monotonicity(sector, params, curves.default_t_grid(params, 8))
print(f"\nsector, D={D:.4f} C0={C0:.4f}")
for t, q in zip(rep.t, rep.ratios):
    print(f"  t={t:.3e}  area_h/t = {q:.5f}")
print(f"nondecreasing: {rep.passed} (worst drop {rep.worst_drop:+.2e})")
