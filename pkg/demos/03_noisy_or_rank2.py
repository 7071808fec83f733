"""A canonical model really is low rank: the noisy-or CPT at rank 2.

Constructs the explicit two-term decomposition of a binary noisy-or CPT,
checks it is exact, confirms the solver finds rank 2 on its own, and
compares parameter counts.
"""

import numpy as np

from cptrank import (
    AnalysisConfig,
    CPModel,
    SolverConfig,
    cp_param_count,
    general_param_count,
    max_abs_diff,
    minimal_rank,
    reconstruct,
)

inhibitors = (0.1, 0.2, 0.3)
k = len(inhibitors)

# The CPT itself: P(off | parents) multiplies the inhibition probability
# of every active parent; child mode last.
cpt = np.zeros([2] * k + [2])
for idx in np.ndindex(*([2] * k)):
    q = np.prod([inhibitors[i] for i in range(k) if idx[i] == 1])
    cpt[idx + (0,)] = q
    cpt[idx + (1,)] = 1.0 - q

# Two rank-one terms reproduce it exactly: the cumulative product against
# a (1, -1) child column, and an all-ones term against (0, 1).
factors = [np.array([[1.0, 1.0], [q, 1.0]]) for q in inhibitors]
factors.append(np.array([[1.0, 0.0], [-1.0, 1.0]]))
explicit = CPModel(tuple(factors))
print(f"explicit 2-term model error: {max_abs_diff(reconstruct(explicit), cpt):.2e}")

cfg = AnalysisConfig(epsilon=1e-6, r_max=4, solver=SolverConfig(seed=5))
print(f"solver-found minimal rank:   {minimal_rank(cpt, cfg)}")

full = general_param_count([2] * (k + 1))
compact = cp_param_count(k + 1, 2)
print(f"\nparameters: general CPT {full}, rank-2 CP form {compact}")
print("with 9 parents the gap is", general_param_count([2] * 10), "vs", cp_param_count(10, 2))
