# %% [markdown]
# # Noiseless and noisy samplers side by side
#
# Without noise, greedy bisection stops once every leaf's midpoint secant
# error is below eps. With noise, every point carries a confidence band and
# the sampler splits a leaf only when curvature clearly beats noise there.

# %%
import numpy as np

from adaptive_convex import build_packing, hinge, run_noiseless, run_noisy

f = hinge()
grid = np.linspace(0, 1, 10001)

# %% [markdown]
# Noiseless: queries pile up around the kink at 0.2.

# %%
run = run_noiseless(f, 1e-3)
xs = sorted(run.state.values)
print(f"{run.tau} queries, certified={run.certified}, sup error={run.model.sup_error(f):.2e}")
print("queried points:", np.round(xs, 4))

# %% [markdown]
# Noisy, sigma = 0.1. eps_t is an anytime certificate: on an event of
# probability at least 1 - delta, the projected model stays within eps_t of
# f at every round.

# %%
noisy = run_noisy(f, 0.1, budget=20000, seed=1, confidence="kaufmann")
for t, err, eps_t in noisy.checkpoints:
    print(f"t={t:6d}  error={err:.4f}  eps_t={eps_t:.4f}")
counts = noisy.state.samples()
top = sorted(counts, key=lambda s: -s[2])[:5]
print("most sampled points (x, mean, n):", [(round(x, 4), round(m, 4), n) for x, m, n in top])

# %% [markdown]
# For comparison, the packing lower-bound witness is empty for the hinge:
# no interval inside the safe region has curvature, because the only
# curvature is the kink itself.

# %%
print("hinge packing size at 1e-3:", build_packing(f, 1e-3).n_pck)
