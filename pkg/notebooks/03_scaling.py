# %% [markdown]
# # Where the time goes
#
# Mine synthetic instances of growing size and split the wall time into
# phase 1 (datasets, trees, extraction) and phase 2 (negation elimination,
# merging, simplification).

# %%
import time

import numpy as np

from rebac_miner.mining import PHASE1_STAGES, PHASE2_STAGES, mine_policy, phase1_fraction
from rebac_miner.synthgen import GenConfig, generate

sizes = [5, 10, 20, 30, 40, 50]
table = []
for n in sizes:
    inst = generate(GenConfig(seed=11, n=n, rules=10, resource_classes=1))
    t0 = time.perf_counter()
    res = mine_policy(inst.object_model, inst.au)
    wall = time.perf_counter() - t0
    p1 = sum(res.timings[s] for s in PHASE1_STAGES)
    p2 = sum(res.timings.get(s, 0.0) for s in PHASE2_STAGES)
    table.append((n, res.report["feature_vectors"], wall, p1, p2, phase1_fraction(res.timings)))

print(f"{'N':>4}{'vectors':>10}{'wall s':>9}{'phase1':>9}{'phase2':>9}{'share':>7}")
for n, fv, wall, p1, p2, frac in table:
    print(f"{n:>4}{fv:>10}{wall:>9.3f}{p1:>9.3f}{p2:>9.3f}{frac:>7.2f}")

# %% [markdown]
# Vector count grows with N squared. A log-log fit of wall time against it
# gives the empirical exponent.

# %%
fv = np.array([row[1] for row in table], dtype=float)
wall = np.array([row[2] for row in table])
slope = np.polyfit(np.log(fv), np.log(wall), 1)[0]
print(f"wall time ~ vectors^{slope:.2f}")
