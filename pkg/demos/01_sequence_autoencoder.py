# %% [markdown]
# # Linear autoencoder for sequences
#
# The encoder is a linear recurrence ``y_t = A x_t + B y_{t-1}``.  Its
# weights come from the SVD of the data matrix, whose rows are the
# reversed prefixes of every sequence.

# %%
import numpy as np

from lmn import data, seqae

rng = np.random.default_rng(0)
batch = [rng.normal(size=(n, 3)) for n in (6, 9, 4)]
Xi = seqae.build_data_matrix(batch)
print("data matrix", Xi.shape)

# %%
# full rank: decoding the final state gives back every input
full = seqae.fit(batch)
print("rank", full.p)
seq = batch[1]
state = seqae.encode(full, seq)[-1]
rec = seqae.reconstruct(full, state, len(seq))[::-1]
print("max error", np.abs(rec - seq).max())

# %% [markdown]
# Below full rank the recursion loses information.  The SVD tail gives
# the one-step error, while the iterative error compounds over the decode.

# %%
for p in (1, 2, 4, 8, full.p):
    params = seqae.truncate(full, p)
    la = seqae.reconstruction_error(params, batch)["total"]
    svd = seqae.truncation_error(full.singular_values, p)
    print(f"p={p:2d}  svd tail {svd:9.4f}  iterative {la:9.4f}")

# %%
# error per timestep for one compressed model
params = seqae.truncate(full, 4)
profile = seqae.reconstruction_error(params, batch)["per_timestep"][1]
print(np.round(profile, 3))

# %%
# a low-rank corpus is reproduced exactly with only `rank` units
low = data.make_synthetic("low-rank", n_sequences=12, dim=5, rank=3, seed=1)
inputs = data.inputs_of(low["train"])
small = seqae.fit(inputs)
print("rank", small.p, "error", seqae.reconstruction_error(small, inputs)["total"])
