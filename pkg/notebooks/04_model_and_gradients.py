# %% [markdown]
# # Encoder, classifier and the autograd underneath
#
# The model runs on a small reverse-mode tensor library.  Here we push a
# random feature matrix through the encoder and check a handful of gradients
# against central differences.

# %%
import numpy as np

from c2c.model.network import C2CModel, EtEncoderConfig
from c2c.train_eval.metrics import bce_loss

model = C2CModel(EtEncoderConfig(), seed=0)
print(sum(p.size for p in model.params.values()), "parameters in", len(model.params), "tensors")

x = {"cough": np.random.default_rng(0).normal(size=(2, 40, 30))}
print("probabilities:", model(x).data)

# %%
loss = bce_loss(model(x), [1, 0])
model.zero_grad()
loss.backward()
h = 1e-4
for name in ("encoder.conv_in.weight", "encoder.block1.res2.1.weight", "classifier.fc2.bias"):
    p = model.params[name]
    saved = p.data.flat[0]
    p.data.flat[0] = saved + h
    up = bce_loss(model(x), [1, 0]).item()
    p.data.flat[0] = saved - h
    down = bce_loss(model(x), [1, 0]).item()
    p.data.flat[0] = saved
    print(f"{name:32s} analytic {p.grad.flat[0]: .6e}  numeric {(up - down) / (2 * h): .6e}")

# %% [markdown]
# Two-modality models blend the embeddings with a learned gate.  Pushing the
# gate to one end makes the fused model behave like the cough-only one.

# %%
fused = C2CModel(EtEncoderConfig(), modalities=("cough", "breath"), seed=0)
fused.params["fusion.raw_alpha"].data = np.array(20.0)
print("alpha at raw 20:", fused.alpha)
