# %% [markdown]
# # Realignment on Gaussian states
#
# For a symmetric two-mode Gaussian state the trace-norm bound of the
# realigned matrix has a closed form.  Here we compare it with the Simon
# PPT test, which is necessary and sufficient for two modes.

# %%
import numpy as np

from cvrealign import (
    DegenerateState,
    SymmetricCCM,
    gaussian_trace_norm_bound,
    physicality_check,
    simon_ppt_check,
    symplectic_eigenvalues,
)

# %%
for lam in (0.0, 0.2, 0.5, 0.8):
    ccm = SymmetricCCM.tmsv(lam)
    rep = gaussian_trace_norm_bound(ccm)
    nu = symplectic_eigenvalues(ccm, transpose=True)[0]
    print(f"TMSV lambda={lam:.1f}  ||R||_1 >= {rep.value:.4f}  nu_pt = {nu:.4f}  branch={rep.branch.label}")

# %% [markdown]
# The TMSV value is (1 + lambda) / (1 - lambda), which is 3 at lambda = 1/2.
# A quick scan over physical kernels counts disagreements with PPT.

# %%
rng = np.random.default_rng(0)
agree = total = 0
while total < 2000:
    ccm = SymmetricCCM(rng.uniform(0.5, 3), rng.uniform(-2, 2), rng.uniform(-1, 1))
    if not physicality_check(ccm):
        continue
    try:
        rep = gaussian_trace_norm_bound(ccm)
    except DegenerateState:
        continue
    if rep.boundary:
        continue
    total += 1
    agree += rep.entangled == (not simon_ppt_check(ccm))
print(f"{agree}/{total} kernels agree with Simon PPT")
