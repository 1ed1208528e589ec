# %% [markdown]
# # Error rates of passive and active designs
#
# Passive sampling along the dyadic sequence followed by convex least squares
# versus the active sampler (also followed by least squares). On the hinge
# the passive error decays roughly like n^(-1/3) and the active one close to
# n^(-1/2). The same grid is available from the CLI:
#
#     adaptive-convex run --config rates.cfg --out runs.csv
#     adaptive-convex slopes runs.csv

# %%
from adaptive_convex import ExperimentConfig, run_experiment
from adaptive_convex.harness import median_curve, slopes

cfg = ExperimentConfig(function="hinge", sigma=0.1,
                       methods=("passive-dyadic", "active", "active-dyadic", "oracle"),
                       budgets=(100, 316, 1000, 3162, 10000), trials=10,
                       confidence="kaufmann", grid_points=4001)
records = run_experiment(cfg)

# %%
for method in cfg.methods:
    curve = median_curve(records, method)
    print(f"{method:>15}: " + "  ".join(f"{n}:{e:.4f}" for n, e in curve))
print({m: round(s, 3) for m, s in slopes(records).items()})
