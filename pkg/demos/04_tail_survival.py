"""Tail of the touching-edge count between a finite origin cluster and the
rim-spanning cluster.

The survival function is collected over every sample with a finite origin
cluster and fitted by weighted least squares on its log; the fitted rate and
the goodness of fit quantify the exponential-tail signature.  Takes around a
minute.
"""

from percolab import LatticeWindow
from percolab.separating import tail_experiment

w = LatticeWindow(d=2, N=10, R=5)
est = tail_experiment(p=0.55, N=10, window=w, n_samples=10_000, seed=5,
                      statistic="touching")
print(f"samples: {est.n_samples}, finite origin clusters: {est.n_finite}, "
      f"margin-excluded: {est.n_excluded_margin}")
surv = est.survival()
print("survival:")
for n in range(0, min(est.counts.size, 36), 4):
    bar = "#" * int(60 * surv[n])
    print(f"  n >= {n:3d}: {surv[n]:8.4f} {bar}")
if est.fit:
    print(f"fit over n in [{est.fit.n_lo}, {est.fit.n_hi}]: "
          f"rate {est.fit.t_hat:.4f} +- {est.fit.t_se:.4f}, R^2 = {est.fit.r2:.4f}")
