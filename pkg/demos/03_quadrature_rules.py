"""Quadrature and sampling rules on the unit hypercube [-1, 1]^M.

Shows the node economy of the different families (tensor Gauss-Legendre
and Clenshaw-Curtis versus Smolyak sparse grids versus Halton qMC), the
polynomial exactness of each, and the qMC convergence rate on a smooth
integrand.
"""

import numpy as np

from saltflow.quadrature import (
    clenshaw_curtis_1d,
    gauss_legendre_tensor,
    clenshaw_curtis_tensor,
    halton,
    smolyak_cc,
)

M = 3

print("node counts in dimension 3:")
print(f"{'rule':>28} {'nodes':>7}")
for label, rule in [
    ("Gauss-Legendre 5^3", gauss_legendre_tensor(5, M)),
    ("Clenshaw-Curtis level 2", clenshaw_curtis_tensor(2, M)),
    ("Smolyak CC level 2", smolyak_cc(2, M)),
    ("Smolyak CC level 3", smolyak_cc(3, M)),
    ("Halton 200", halton(200, M)),
]:
    print(f"{label:>28} {rule.n_nodes:>7}")

print("\npolynomial exactness check, integrating theta1^2 theta2^2 (exact 1/9):")
for label, rule in [("GL 5^3", gauss_legendre_tensor(5, M)),
                    ("CC level 2 tensor", clenshaw_curtis_tensor(2, M)),
                    ("Smolyak level 2", smolyak_cc(2, M)),
                    ("Halton 200", halton(200, M))]:
    val = rule.integrate(rule.nodes[:, 0] ** 2 * rule.nodes[:, 1] ** 2)
    print(f"  {label:>18}: {val:.10f} (error {abs(val - 1/9):.2e})")

print("\nqMC convergence on exp(-(t1^2+t2^2+t3^2)):")


def integrand(nodes):
    return np.exp(-np.sum(nodes**2, axis=1))


ref = halton(2**18, M)
truth = ref.integrate(integrand(ref.nodes))
for n in (64, 256, 1024, 4096):
    rule = halton(n, M)
    err = abs(rule.integrate(integrand(rule.nodes)) - truth)
    print(f"  n = {n:>5}: |error| = {err:.3e}")
print("(roughly O(log^M(n)/n), versus O(n^-1/2) for plain Monte Carlo)")
