# %% [markdown]
# # Photon-subtracted and photon-added states
#
# Applying a -> a or a^dagger to both modes of a Gaussian state gives a
# non-Gaussian state whose realignment value is still a closed form of the
# kernel.  The verdict matches the Gaussian one for m = 1.

# %%
from cvrealign import SymmetricCCM, gaussian_trace_norm_bound, photon_pm_criterion

# %%
print(" lam   gauss    sub     add")
for lam in (0.1, 0.3, 0.5, 0.7):
    ccm = SymmetricCCM.tmsv(lam)
    g = gaussian_trace_norm_bound(ccm).value
    s = photon_pm_criterion(ccm, "subtract").value
    a = photon_pm_criterion(ccm, "add").value
    print(f"{lam:4.1f}  {g:6.3f}  {s:6.3f}  {a:6.3f}")

# %% [markdown]
# Two photons per mode use the closed-form f(2, V) moment.

# %%
ccm = SymmetricCCM(1.2, -0.8, 0.25)
for m in (1, 2):
    rep = photon_pm_criterion(ccm, "subtract", m=m)
    print(f"m={m}: value {rep.value:.5f}, entangled={rep.entangled}")
