"""Exact counting behind the decay bound: box animals, partitions, packing.

The number of diagonally-connected box sets through a fixed box grows like
mu^n; the number of partitions of n grows like r^sqrt(n); a parity-class
argument packs any n-box set into at least n/2^d pairwise-disjoint boxes.
Together they bound the per-size count of separating-component collections,
and the composite bound decays exactly when M * c^(1/k) < 1.
"""

import numpy as np

from percolab import LatticeWindow, count_animals, disjoint_packing, exp_dec_bound, partitions
from percolab.renorm import good_probability

census = count_animals(2, "diagonal", 7)
print("diagonal box animals through the origin (d=2):")
for n, c, r in census.csv_rows():
    print(f"  n={n}: {c:9d}  ratio {r:.3f}" if n > 1 else f"  n={n}: {c:9d}")
print(f"growth estimate: last ratio {census.mu_last:.3f}, "
      f"extrapolated {census.mu_extrapolated:.3f}")

table = partitions(500)
print(f"\npartitions: p(4)={table[4]}, p(10)={table[10]}, p(100)={table[100]}")
print(f"smallest r with p(n) <= r^sqrt(n) on the table: {table.fitted_r():.3f}")

rng = np.random.Generator(np.random.Philox(key=np.array([8, 0], dtype=np.uint64)))
cells = {(0, 0)}
while len(cells) < 40:
    base = sorted(cells)[int(rng.integers(0, len(cells)))]
    cells.add((base[0] + int(rng.integers(-1, 2)), base[1] + int(rng.integers(-1, 2))))
boxes = np.array(sorted(cells))
packed = disjoint_packing(boxes)
print(f"\npacking a {boxes.shape[0]}-box connected set: "
      f"{packed.shape[0]} pairwise-disjoint boxes (lower bound {int(np.ceil(boxes.shape[0]/4))})")

# the composite bound at a scale where bad boxes are rare
w = LatticeWindow(2, 10, 3)
good = good_probability(0.85, 10, w, n_samples=2000, seed=9)
c_hat = 1 - good.estimate
M = 2 * census.mu_extrapolated
rate = M * c_hat ** 0.25
print(f"\nat p=0.85, N=10: Pr(bad) ~ {c_hat:.4f}; M*c^(1/4) = {rate:.3f} "
      f"-> bound decays: {rate < 1}")
rep = exp_dec_bound(20, max(c_hat, 1e-9), 4, M, 13.0)
print(f"bound at n=20: exp({rep.log_value:.2f}); asymptotic rate {rep.asymptotic_rate:.3f}")
