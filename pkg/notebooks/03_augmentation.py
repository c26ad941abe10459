# %% [markdown]
# # Augmentation: fixed-length crops, circular shifts, feature masks
#
# Every random choice is driven by an explicit seed, so an epoch can be
# replayed exactly.

# %%
import numpy as np

from c2c.audio_io import AudioClip
from c2c.augment import AugmentConfig, example_seed, feature_mask, fix_length, random_shift
from c2c.features import log_mel_features

clip = AudioClip(np.random.default_rng(1).normal(size=3 * 16000), 16000)
cropped = fix_length(clip, 4.0, seed=5)
print("3 s clip padded to", len(cropped) / 16000, "s")

# %%
seed = example_seed(0, epoch=2, index=7)
shifted = random_shift(cropped, AugmentConfig(), seed)
print("shift keeps the samples:", np.array_equal(np.sort(shifted.samples), np.sort(cropped.samples)))
again = random_shift(cropped, AugmentConfig(), seed)
print("same seed, same output:", np.array_equal(shifted.samples, again.samples))

# %%
feats = log_mel_features(shifted)
masked = feature_mask(feats, AugmentConfig(), seed)
zeroed = masked.data == 0
print("masked time frames:", int(np.sum(zeroed.all(axis=1))), " masked mel bins:", int(np.sum(zeroed.all(axis=0))))
