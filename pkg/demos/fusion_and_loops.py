"""
Conjugacy classes, fusion and their lattice lifts
=================================================

Conjugacy classes of SU(2) carry a 2-form whose derivative is minus the
pulled-back Cartan 3-form. Products of classes are again of this kind once
the fusion correction is added. Over the lattice the same data become an
ordinary Hamiltonian space, and reducing it gives back the class.
"""

import numpy as np

from diracred import qham
from diracred.liegroup import get_group

G = get_group("su2")
rng = np.random.default_rng(11)

M1 = qham.conjugacy_class(G, np.array([0.4, -0.2, 0.9]))
M2 = qham.conjugacy_class(G, np.array([0.0, 0.7, 0.2]))
F = qham.fuse(M1, M2)

for M in (M1, F):
    rep = qham.check_axioms(M, samples=16, rng=rng)
    print(f"{M.name}: failures={sorted(rep.failures)} residuals={ {k: f'{v:.1e}' for k, v in rep.residuals.items()} }")

# doubling the form breaks the moment condition, as it should
print("scaled form fails", sorted(qham.check_axioms(M1.scaled(2.0), samples=4, rng=rng).failures))

# lattice lift and reduction
for N in (8, 16):
    r = qham.round_trip_residual(F, N, rng, samples=2)
    print(f"N={N:3d} round trip", {k: f"{v:.1e}" for k, v in r.items()})

L = qham.lift(F, 9, rng=rng)
p = F.random_point(rng)
A = L.connection_at(p, rng)
xi = rng.standard_normal((10, 3))
xi[-1] = xi[0]
print("moment condition residual", L.moment_residual(p, A, xi))
