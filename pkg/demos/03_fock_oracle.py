# %% [markdown]
# # Cross-check in a truncated Fock space
#
# The oracle builds the density matrix numerically, realigns it and takes
# the trace norm with an SVD.  This is slow but independent of the
# analytic formulas.

# %%
from cvrealign.channel import ChannelParams
from cvrealign.fock_oracle import oracle_comparison

# %%
for state in ("tmsv", "sub", "add"):
    for ch in (None, ChannelParams(0.3, 0.5)):
        r = oracle_comparison(state, 0.4, ch, cutoff=40)
        label = "static" if ch is None else f"Gamma t={ch.gamma_t}, nbar={ch.nbar}"
        print(f"{state:4s} {label:22s} analytic {r['analytic']:.8f}  oracle {r['trace_norm']:.8f}  rel {r['rel_deviation']:.1e}")
