# %% [markdown]
# # Pretraining through the unfolded network
#
# 1. train a feedforward net that sees its last k hidden states;
# 2. compress those hidden-state sequences with the linear autoencoder;
# 3. map the lag weights through the decoder into an LMN.
#
# With a tanh unfolded net and a full-rank autoencoder the LMN reproduces
# the unfolded net, except for the lag-k output term which has no
# counterpart after the transfer.

# %%
from lmn import data, pretrain, seqae, train

ds = data.make_synthetic("random-binary", n_sequences=12, length=16, dim=8, seed=0)
short = train.TrainConfig(max_epochs=20, patience=20)
cfg = pretrain.PretrainConfig(hidden=10, k=4, selu_hidden=False, unfolded_train=short)
lmn, diag = pretrain.pretrain_pipeline(ds, cfg)
print("memory size", diag["ae_rank"])
print("max |dh|", diag["max_hidden_diff"], "max |dy|", diag["max_output_diff"])

# %%
# with the lag-k output left in, outputs drift apart
unfolded = diag["unfolded"]
inputs = data.inputs_of(ds["train"])
full = pretrain.fidelity_report(unfolded, lmn, inputs, zero_last_output_lag=False)
print("max |dy| with lag k", full["max_output_diff"])

# %%
# a smaller memory: the transfer becomes approximate
hidden = pretrain.collect_hidden_states(unfolded, inputs)
for p in (8, 16, 32, 64, diag["ae_rank"]):
    ae = seqae.fit(hidden, p)
    small = pretrain.transfer_weights(unfolded, ae.A, ae.B)
    rep = pretrain.fidelity_report(unfolded, small, inputs)
    print(f"p={p:3d}  max |dh| {rep['max_hidden_diff']:.2e}  "
          f"train acc {train.evaluate_accuracy(small, ds['train']):.3f}")

# %% [markdown]
# SeLU in the unfolded net trains it more easily, but the LMN keeps tanh,
# so the transferred weights are only a starting point.

# %%
selu_cfg = pretrain.PretrainConfig(hidden=10, k=4, selu_hidden=True, unfolded_train=short)
selu_lmn, selu_diag = pretrain.pretrain_pipeline(ds, selu_cfg)
print("selu: max |dh|", selu_diag["max_hidden_diff"])
print("unfolded acc", selu_diag["unfolded_train_accuracy"], "lmn acc", selu_diag["lmn_train_accuracy"])

# %%
# fine-tuning starts from the transferred weights; epoch 0 is the transfer
tuned, history = train.train_loop("lmn", selu_lmn, ds, train.TrainConfig(max_epochs=20, patience=5))
print("val accuracy at transfer", history[0]["val_accuracy"], "best", max(r["val_accuracy"] for r in history))
