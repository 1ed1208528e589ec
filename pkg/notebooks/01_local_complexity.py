# %% [markdown]
# # How hard is a convex function to learn?
#
# The local modulus omega(f, x, eps) is the half-width at which f stops
# looking linear around x. Averaging 1/omega over [0, 1] gives the cost of
# adaptive sampling; its maximum gives the cost of a uniform design. This
# script tabulates both for the built-in functions.

# %%
import numpy as np

from adaptive_convex import complexity_report, hinge, omega, test_functions

# %% [markdown]
# A kink is where adaptivity pays. For the hinge, omega collapses near
# x = 0.2 and is wide everywhere else.

# %%
xs = np.array([0.1, 0.15, 0.19, 0.2, 0.21, 0.3, 0.6])
for x in xs:
    r = omega(hinge(), x, 1e-3)
    print(f"x={x:4.2f}  omega={r.value:.5f}  saturated={r.saturated}")

# %% [markdown]
# Average versus worst case across the battery. The hinge's worst case grows
# like 1/eps while its average only grows like log(1/eps); for x^2 the two
# stay within a constant factor.

# %%
print(f"{'function':>13} {'eps':>7} {'avg':>9} {'max':>10} {'n_lower':>8}")
for name, f in test_functions().items():
    for eps in (1e-2, 1e-3, 1e-4):
        r = complexity_report(f, eps)
        print(f"{name:>13} {eps:7.0e} {r.lambda_avg:9.2f} {r.lambda_max:10.2f} {r.n_lower:8d}")
