"""
Deterministic versus Bernoulli consumption of the same mean
===========================================================

Two arms with rewards Bern(0.5) and Bern(0.4). Every pull costs d, either
exactly or as Bern(d). The budget is 2.
"""

from baiwrc.experiments import sweep

rows = sweep({
    "generator": "figure1",
    "grid": {"inv_d": [2, 4, 8, 16, 32]},
    "policies": ["shrr"],
    "trials": 20000,
    "seed": 1,
})

# one line per 1/d, deterministic next to stochastic
by_x = {}
for row in rows:
    by_x.setdefault(row["x"], {})[row["instance_label"]] = row
print(" 1/d    p_det    p_sto")
for x, pair in by_x.items():
    print(f"{x:4}  {pair['det']['p_hat']:.4f}  {pair['sto']['p_hat']:.4f}")

# with a budget of 2 the deterministic instance gets exactly 1/d + 1 pulls,
# while Bern(d) consumption stops at the second unit cost: about 2/d pulls
