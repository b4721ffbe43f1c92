# %% [markdown]
# # Training an LMN on a delayed copy
#
# Targets are the inputs from two steps earlier.  Getting them right
# requires memory, so comparing the LMN against a copy with its feedback
# cut shows what the linear memory contributes.

# %%
import numpy as np

from lmn import data, model, train

splits = data.make_synthetic("delayed-copy", n_sequences=60, length=30, dim=8, delay=2, seed=0)
cfg = train.TrainConfig(learning_rate=0.001, max_epochs=200, patience=20)

# %%
lmn = model.init_lmn(8, 32, 32, 8, variant="B", seed=0)
best, history = train.train_loop("lmn", lmn, splits, cfg)
print("epochs", history[-1]["epoch"])
print("test accuracy", train.evaluate_accuracy(best, splits["test"]))

# %%
# no feedback from memory and output read from h_t: a feedforward net
blind = model.init_lmn(8, 32, 32, 8, variant="A", seed=0)
blind = blind.with_arrays({"W_mh": np.zeros_like(blind.W_mh)})
frozen = train.TrainConfig(learning_rate=0.001, max_epochs=200, patience=20, frozen=("W_mh",))
best0, _ = train.train_loop("lmn", blind, splits, frozen)
print("memoryless test accuracy", train.evaluate_accuracy(best0, splits["test"]))

# %%
# learning curve, every 10th epoch
for row in history[::10]:
    print(f"{row['epoch']:4d}  loss {row['train_loss']:.4f}  val {row['val_accuracy']:.3f}")

# %%
# the RNN baseline on the same task
rnn, rnn_history = train.train_loop("rnn", model.init_rnn(8, 32, 8, seed=0), splits, cfg)
print("rnn test accuracy", train.evaluate_accuracy(rnn, splits["test"]))
