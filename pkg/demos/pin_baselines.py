"""Regenerate the pinned regression constants in psh_lab/data/baselines.json.

The constants suite compares D_star, C0_star and the Duval constants against
these values with a 10% tolerance.  They depend on the grid, so each entry is
keyed by (n, k, N, n_theta).  Run after a deliberate change to the grids or
the model functions:

    python demos/pin_baselines.py
"""

import json
import pathlib

from psh_lab import construction
from psh_lab.model import ModelParams
from psh_lab.report import baseline_key

CASES = [(1, 0), (1, 1), (2, 0), (2, 1)]
N, T, R = 16, 8, 0.5

out = {}
for n, k in CASES:
    ds = construction.search_D(n, k, N=N, n_theta=T)
    D = ds.D_star / 2
    C0 = construction.search_C0(R, D, n, k, N=N, n_theta=T).C0_star
    est = construction.verify_duval_conditions(ModelParams(n=n, k=k, r=R, D=D, C0=2 * C0), N=N, n_theta=T)
    out[baseline_key(n, k, N, T)] = {
        "r": R,
        "D_star": ds.D_star,
        "C0_star": C0,
        "C1": est.C1,
        "C2": est.C2,
        "A1": est.A1,
    }
    print(f"n={n} k={k}: D*={ds.D_star:.4f} C0*={C0:.4f} C1={est.C1:.3f} C2={est.C2:.3f} A1={est.A1:.3f}")

path = pathlib.Path(__file__).resolve().parents[1] / "src" / "psh_lab" / "data" / "baselines.json"
path.write_text(json.dumps(out, sort_keys=True, indent=2) + "\n")
print(f"wrote {path}")
