"""Normal fluctuations of S_n - S, with S replaced by S_N at a large horizon.

Run with a smaller replica count for a quick look; the acceptance suite uses
1000 to 2000 replicas.
"""

import sys

import numpy as np

from treemart import exact, limit_lab as ll
from treemart.model import BST, PORT, RT

replicas = int(sys.argv[1]) if len(sys.argv) > 1 else 200

for p in (BST, RT, PORT):
    config = ll.ExperimentConfig(p, 2000, 400_000, replicas, master_seed=7)
    report = ll.run_clt(config)
    s = report.summary
    var_s = exact.martingale_var_array(p, config.horizon)
    expected_m2 = ll.clt_prefactor(p, config.n) ** 2 * (var_s[config.horizon] - var_s[config.n])
    print(f"{p.tag:5s} KS {s['ks_distance']:.4f} (p = {s['p_value']:.3f})  "
          f"E Z^2 {s['moment_estimates']['2']:.3f} (exact {expected_m2:.3f})  "
          f"E Z^4 {s['moment_estimates']['4']:.3f}  proxy ratio {s['proxy_ratio']:.4f}")

# Running extremes of the iterated-logarithm scaling.
cps = tuple(range(20, 10_001))
res = ll.lil_trajectory(ll.ExperimentConfig(BST, 20, 10 ** 6, 20, 3, cps))
print("\nrunning max per replica:", np.round(res.final_max, 2))
print("pooled max / min:", round(res.pooled_max, 3), round(res.pooled_min, 3))
