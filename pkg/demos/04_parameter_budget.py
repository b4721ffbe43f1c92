# %% [markdown]
# # Parameter budgets
#
# Recurrent-core counts for 88 inputs (the piano-roll width), output
# layers excluded.

# %%
from lmn.model import parameter_count

for arch in ("LSTM", "GRU", "RNN"):
    print(arch, parameter_count(arch, 88, h=100))
print("LMN", parameter_count("LMN", 88, f=100, m=100))

# %% [markdown]
# With ``h = f + m`` fixed the LMN count is ``x h - x m + 2 h m - m^2``,
# a concave quadratic in ``m`` with its top at ``m = h - x/2``.  The
# balanced split is optimal only when ``x = h``.

# %%
for x in (88, 64):
    h = 64
    counts = {m: parameter_count("LMN", x, f=h - m, m=m) for m in range(1, h)}
    best = max(counts, key=counts.get)
    print(f"x={x} h={h}: best m={best} ({counts[best]}), balanced m={h // 2} ({counts[h // 2]})")
