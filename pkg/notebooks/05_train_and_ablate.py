# %% [markdown]
# # Training on a synthetic corpus and comparing pipeline variants
#
# A deliberately small configuration keeps this under a minute or two.  The
# desk profile (see ``c2c.config``) is what the longer runs use.

# %%
import tempfile

from c2c.audio_io import load_manifest, split_dataset
from c2c.config import load_config
from c2c.synth import SynthSpec, generate_corpus
from c2c.train_eval.ablation import format_table, run_ablation_suite
from c2c.train_eval.trainer import train

workdir = tempfile.mkdtemp()
manifest, truths = generate_corpus(SynthSpec(n_clips=24, seed=0), workdir)
print(manifest, len(truths), "clips")

small = {"train.epochs": 4, "encoder.channels": 16, "encoder.embed_dim": 16, "train.val_fraction": 0.25}
cfg = load_config(profile="desk", overrides=small).with_seed(0)

# %%
split = split_dataset(load_manifest(manifest), cfg.train.val_fraction, cfg.train.seed)
result = train(split, "C2C", cfg, root=workdir)
print("epoch losses:", [round(v, 3) for v in result.epoch_losses])
print("validation ROC-AUC:", result.report.roc_auc)

# %%
reports = run_ablation_suite(manifest, cfg, ("C2C", "no_preprocess", "raw_frontend", "no_augment"))
print(format_table(reports))
