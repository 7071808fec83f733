"""Walk through the tensor primitives: a CPT as a tensor, rank-one terms,
unfoldings and the Khatri-Rao identity that powers the solvers."""

import numpy as np

from cptrank import (
    CPModel,
    frobenius_dist,
    khatri_rao,
    max_abs_diff,
    rank_one,
    reconstruct,
    tensor_from_flat,
    unfold,
)

# A CPT P(C | A, B) for binary A, B, C, laid out the way a HUGIN file
# stores it: parent configurations in C order, child state innermost.
cpt = tensor_from_flat([2, 2, 2], [0.9, 0.1, 0.4, 0.6, 0.3, 0.7, 0.05, 0.95])
print("P(C=1 | A=1, B=0) =", cpt[1, 0, 1])

# A rank-one tensor is an outer product of one vector per mode.
t1 = rank_one([[1.0, 0.5], [0.2, 0.8], [0.7, 0.3]])
print("rank-one entry (1,1,0):", t1[1, 1, 0], "= 0.5 * 0.8 * 0.7")

# A CP model is a weighted sum of rank-one terms; reconstruct() expands it.
rng = np.random.default_rng(0)
model = CPModel(tuple(rng.random((n, 2)) for n in (2, 2, 2)))
full = reconstruct(model)
print("\nrank-2 model reconstructs to dims", full.shape)

# The identity that both solvers build on: unfolding a CP tensor along
# mode m factors into A_m times the Khatri-Rao product of the others.
m = 1
others = [model.factors[j] for j in range(3) if j != m]
identity_gap = np.abs(
    unfold(full, m) - model.factors[m] @ (khatri_rao(others) * model.weights).T
).max()
print(f"unfolding identity gap at mode {m}: {identity_gap:.2e}")

# Distances between tensors: the solver minimizes the Frobenius error,
# acceptance decisions use the maximum elementwise error.
noisy = full + rng.normal(scale=1e-3, size=full.shape)
print(f"\nmax|diff| = {max_abs_diff(noisy, full):.2e}")
print(f"frobenius = {frobenius_dist(noisy, full):.2e}")
