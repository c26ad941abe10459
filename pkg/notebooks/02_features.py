# %% [markdown]
# # Frontend: FFT and log-mel features

# %%
import numpy as np

from c2c.audio_io import AudioClip
from c2c.features import FrontendConfig, fft, hz_to_mel, log_mel_features, mel_filterbank, raw_frame_features

# The FFT is a plain radix-2 implementation; compare it with a direct DFT.
x = np.random.default_rng(0).normal(size=64)
k = np.arange(64)
dft = np.exp(-2j * np.pi * np.outer(k, k) / 64) @ x
print("max |fft - dft|:", np.max(np.abs(fft(x) - dft)))

# %%
cfg = FrontendConfig()
bank = mel_filterbank(cfg, 16000)
print("filterbank", bank.shape, " mel(700 Hz) =", round(float(hz_to_mel(700.0)), 2))
peaks = np.argmax(bank, axis=1)
print("first peak bins:", peaks[:8], "last:", peaks[-3:])

# %% [markdown]
# A pure tone lights up the filter nearest its frequency, and doubling the
# amplitude adds ln 4 to the log-mel values around it.

# %%
t = np.arange(16000) / 16000
tone = AudioClip(0.25 * np.sin(2 * np.pi * 1000 * t), 16000)
feats = log_mel_features(tone, cfg)
print("shape (frames, bins):", feats.shape, " loudest bin:", int(np.argmax(feats.data.mean(axis=0))))
louder = log_mel_features(AudioClip(2 * tone.samples, 16000), cfg)
# bins far from the tone sit on the log floor, so look near the peak
near = slice(10, 17)
print("shift after doubling:", float(np.mean(louder.data[:, near] - feats.data[:, near])), "vs ln 4 =", np.log(4))

# %%
raw = raw_frame_features(tone, cfg)
print("raw frame energy feature:", raw.shape)
