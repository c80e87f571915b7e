"""The continuous-time walk: individuals die at rate one and leave offspring one
level down.  Sampled at its death times it reproduces the external profile."""

from treemart import ctbrw
from treemart.model import BST, RT

st = ctbrw.simulate(BST, 6, seed=3)
print("occupancy after 6 deaths:", dict(st.occupancy), " death times:", [round(t, 3) for t in st.death_times])

print("exact law of (U_2(5), U_3(5), ...), RT:")
for profile, prob in sorted(ctbrw.exact_occupancy_law(RT, 4).items(), key=lambda kv: -kv[1])[:5]:
    print(f"  {profile}  {prob:.4f}")

for p in (RT, BST):
    print(p.tag, "chi-square p-value:", round(ctbrw.coupling_statistic(p, 4, 20_000, seed=1), 4))

w = ctbrw.scaled_waiting_times(BST, 5, 5000, seed=2)
print("scaled waiting times: mean", round(w.mean(), 3), "var", round(w.var(), 3))
