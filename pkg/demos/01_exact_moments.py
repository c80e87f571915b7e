"""Exact moments of the path length, checked against brute force and against
the large-n constants."""

import math

from treemart import exact, oracle
from treemart.model import BST, PORT, RT, mary

# The depth of the n-th node is a sum of independent Bernoulli(m / alpha_i).
# For a binary search tree with three nodes that gives E[D_3] = 1 + 2/3.
print("E[D_3], BST:", exact.depth_mean(BST, 3))
print("law of D_3, BST:", exact.depth_pmf(BST, 3).as_dict())

# Enumerating every labelled growth history gives the same law of P_n.
for p in (BST, RT, PORT):
    pmf = oracle.exact_distribution(p, 6, "path_length")
    print(f"{p.tag:5s} n=6  enumeration mean {pmf.mean():.12f}  formula {exact.mean_path(p, 6):.12f}"
          f"  var {pmf.variance():.12f} / {exact.var_path(p, 6):.12f}")

# Large n: E[P_n] = theta n log n + b n + O(log n), Var(P_n) ~ sigma^2 n^2.
n = 10 ** 6
print(f"\n{'model':8s} {'b':>12s} {'finite-n b':>12s} {'sigma^2':>10s} {'Var/n^2':>10s}")
for p in (BST, RT, PORT, mary(3)):
    a, b = exact.mean_expansion(p)
    b_n = (exact.mean_path(p, n) - a * n * math.log(n)) / n
    print(f"{p.tag:8s} {b:12.6f} {b_n:12.6f} {exact.variance_constant(p):10.6f} {exact.var_path(p, n) / n**2:10.6f}")

# The quicksort constant 7 - 2 pi^2 / 3 appears for the binary search tree.
print("\n7 - 2 pi^2/3 =", 7 - 2 * math.pi ** 2 / 3)
