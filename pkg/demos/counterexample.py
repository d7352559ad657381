"""The exp(-1/t) cutoff destroys plurisubharmonicity.

Scans chi(x^2) chi(|y|^2) over (0, 1) x {0.5 <= |y| <= 1.5} for the most
negative Levi eigenvalue and evaluates the one-variable deficiency
2 chi^2 + chi chi'' - 2 chi'^2 that drives it.  The polynomial blend cutoff
fails the same way on this box, which is why beta_r is only trusted on the
thin neighbourhood of the planes where the D search certifies it psh.

    python demos/counterexample.py
"""

import numpy as np

from psh_lab import levi, model

for cut in (model.ExpCutoff(), model.BlendCutoff()):
    res = levi.counterexample_scan(cut)
    print(f"{res.cutoff}:")
    print(f"  min Levi eigenvalue {res.min_eig:+.4f} at {np.round(res.witness, 3)}")
    print(f"  min deficiency      {res.deficiency_min:+.4f} at t = {res.deficiency_t:.3f}")
    print(f"  breaks psh: {res.negative_found}")

t = np.linspace(0.05, 0.95, 10)
print("deficiency of exp(-1/t):", np.round(model.deficiency(model.ExpCutoff(), t), 4))
