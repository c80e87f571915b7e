"""Grow trees node by node and watch the profile polynomial track the path length."""

import numpy as np

from treemart import profile_poly as pp
from treemart.model import BST, PORT, alpha
from treemart.tree_sim import ReplicaSeed, grow

traj = grow(PORT, 20_000, ReplicaSeed(1), track_profile=True)
print("first rows of the trajectory CSV:")
print("\n".join(traj.to_csv().splitlines()[:6]))

# W_n(1) is the total weight and W_n'(1) is (beta + m) P_n + n m, at every step.
print("identity residuals:", pp.identity_residuals(traj))

# M_n(z) = W_n(z) / E W_n(z) has mean one; M_n'(1) is the path-length martingale.
state = traj.state
bundle = pp.derivatives_at_one(state)
print(f"S_n from the trajectory {traj.S[-1]:.10f}, M_n'(1) {bundle.Mp1:.10f}")

zs = 1 + 0.1 * np.exp(2j * np.pi * np.arange(4) / 4)
print(pp.profile_csv(state, zs))

# Conditional variance of the next increment from the profile alone.
print("E[X_{n+1}^2 | F_n] =", pp.conditional_increment_variance(state))

# The binary search tree never gives a node a third child.
bst = grow(BST, 50_000, ReplicaSeed(2)).state
print("BST max outdegree:", bst.outdegree.max(), " total weight:", bst.total_weight, "=", alpha(BST, 50_000))
