"""Walk through the linear-algebra layer on a small matrix pair.

We take the 2x2 pair with a nilpotent A, find a shift that makes the pair
invertible, read off its index from the rank staircase, build the
eigenvector/adjoined-vector chains and their dual functionals, and assemble
every projector of the decomposition, checking the defining identities.
"""

import numpy as np

from daekit import (Pencil, analysis_report, build_chains, build_dual_chains,
                    compute_index, find_regular_point, verify_projectors)
from daekit.projectors import build_all

A = np.array([[0.0, 1.0], [0.0, 0.0]])
B = np.eye(2)

pencil = Pencil(A, B)
lam = find_regular_point(pencil)
print(f"regular point lambda* = {lam}  (lam*A + B is invertible)")
print(f"index nu = {compute_index(pencil)}  (double pole of the resolvent)")

canonical = build_chains(pencil)
print(f"\nkernel dimension n = {canonical.n}, "
      f"chain multiplicities = {canonical.multiplicities}")
for k, chain in enumerate(canonical.chains):
    print(f"chain {k}: eigenvector {chain.eigenvector}, "
          f"adjoined {[list(v) for v in chain.adjoined]}")

dual = build_dual_chains(pencil, canonical)
print("dual chain:", [list(q) for q in dual.chains[0]])

canonical, dual, ps = build_all(pencil)
print("\nP2 (root-space projector):\n", ps.p2)
print("P20 (kernel part):\n", ps.p20)
print("corrected operator and its inverse:\n", ps.a_tilde, "\n", ps.a_tilde_inv)

residuals = verify_projectors(ps, pencil)
worst = max(residuals, key=residuals.get)
print(f"\n{len(residuals)} operator identities verified; "
      f"worst residual {residuals[worst]:.2e} ({worst})")

print("\nanalysis report:")
for key, val in analysis_report(pencil, canonical, dual).items():
    print(f"  {key}: {val}")
