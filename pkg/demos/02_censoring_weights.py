"""How censoring enters: the Kaplan-Meier curve of the censoring times and the
inverse-probability weights it produces.

Run:  python demos/02_censoring_weights.py
"""

import numpy as np

from mqrl import ClusteredDataset, QrlSpec
from mqrl.estimator import build_augmented_problem
from mqrl.survival import fit_censoring_survival, ipcw_ratio, survival_at

# five observations; the 2nd and 4th are censored
data = ClusteredDataset.from_arrays([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], [1, 0, 1, 0, 1])
G = fit_censoring_survival(data)
print("censoring survival jumps:", list(zip(G.jump_times, G.values)))
for t in (1.5, 2.0, 3.9, 4.0, 10.0):
    print(f"  G({t}) = {survival_at(G, t)}")

# an event at Y stands in for 1/G(Y) events: the censored ones that would
# have failed later. With a landmark t0 the weight is G(t0)/G(Y).
print("weights for events at 3 and 5 given t0=1:", ipcw_ratio(G, 1.0, [3.0, 5.0]))

# the estimating equation is solved as a weighted quantile regression on an
# augmented sample: one row per event (log residual time, weight G(t0)/G(Y))
# and one pseudo row per at-risk subject with a huge response A
problem, A = build_augmented_problem(data, QrlSpec(0.5, 1.0), G)
print(f"A = {A:.2f}")
print(np.column_stack([problem.responses, problem.design, problem.weights]).round(3))

# multiplier-perturbed curves rescale every subject's contribution; all-ones
# multipliers reproduce the plain curve exactly
same = fit_censoring_survival(data, np.ones(data.n))
print("unit multipliers reproduce the curve:", np.array_equal(same.values, G.values))
