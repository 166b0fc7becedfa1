"""
Coisotropic reduction in a split-signature space
================================================

A coisotropic subspace C of a metrized space V gives a quotient C / C^perp
with a nondegenerate metric. Lagrangian subspaces of V descend to Lagrangian
subspaces of the quotient. This script draws random data and watches it happen.
"""

import numpy as np

from diracred import linalg as la

rng = np.random.default_rng(7)

# a random metric of signature (4, 4)
V, _ = la.random_split_space(4, rng)
print("ambient", V, "signature", V.signature)

# C^perp is a random isotropic plane, so the quotient has dimension 8 - 2 * 2
C = la.random_coisotropic(V, 2, rng)
red = la.reduce_space(C)
print("quotient dimension", red.space.dim, "signature", red.space.signature)

# reduce a few random Lagrangians
for _ in range(3):
    L = la.random_lagrangian(V, rng)
    LC, transverse = la.reduce_subspace(L, C, red)
    cls = la.classify(LC)
    print(f"dim L_C = {LC.dim}  kind = {cls.kind:10s}  transverse = {transverse}"
          f"  residual = {LC.distance(la.orthogonal_complement(LC)):.1e}")

# Lagrangian relations compose; the identity is a strong Dirac morphism
E = la.random_lagrangian(V, rng)
F = la.random_lagrangian_complement(E, rng)
print("E meets its complement in", (E & F).dim, "dimensions")
print("identity is", la.dirac_morphism_class(la.LinearRelation.identity(V), E, E))
