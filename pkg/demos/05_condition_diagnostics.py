"""Numerical look at the conditions behind the martingale limit theorem."""

from treemart import exact, limit_lab as ll
from treemart.model import BST

n, horizon = 1000, 10 ** 6
trunc, closed = exact.s_squared(BST, n, horizon)
print(f"s_n^2 truncated at N: {trunc:.6e}   theta log n / n: {closed:.6e}   ratio {trunc / closed:.3f}")

d = ll.condition_diagnostics(BST, n, horizon, replicas=20, seed=1,
                             l2_marks=[10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6],
                             s_marks=[10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
print("conditional variance ratio r_n:", round(d["r_n"], 4), " with closed-form normaliser:", round(d["r_n_closed"], 4))
print("truncated Lindeberg sums:", d["c1"])
print("partial sums of s_i^-4 E X_i^4:", [round(x, 3) for x in d["l2_partial"]])
print("E|S_k|^4 along k:", [round(x, 4) for x in d["abs_moments"]["4"]])
print("tail truncation ratio:", round(d["truncation_ratio"], 5))

for row in ll.depth_tail_check(BST, 1000, [2, 4, 8], 20_000, seed=5):
    print(f"t={row['t']:g}: P(|D - E D| >= t) = {row['frequency']:.4f} <= bound {row['bound']:.4f}")
