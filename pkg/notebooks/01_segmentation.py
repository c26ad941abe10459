# %% [markdown]
# # Finding coughs in a recording
#
# A synthetic clip has a few band-limited bursts on a quiet background with
# some short clicks.  We normalise it, compute short-time energy, and cut out
# the regions whose energy crosses the onset threshold.

# %%
import numpy as np

from c2c.audio_io import AudioClip
from c2c.preprocess import PreprocessConfig, detect_cough_regions, normalize_peak, segment, short_time_energy
from c2c.synth import SynthSpec, synth_clip

spec = SynthSpec(clip_sec=4.0, bursts_per_clip=(3, 3), seed=11)
samples, bursts = synth_clip(np.random.default_rng(11), spec, label=1)
clip = AudioClip(samples, spec.sample_rate)
print("true bursts (samples):", bursts)

# %%
cfg = PreprocessConfig()
ste = short_time_energy(normalize_peak(clip), cfg)
print(f"{len(ste)} frames, window {ste.window_len} / hop {ste.hop_len} samples")
print("frames above the onset threshold:", int(np.sum(ste.values > cfg.onset_threshold)))

# %% [markdown]
# Region starts sit on a hop boundary and ends run one window past the last
# active frame, so boundaries land within a couple of hops of the truth.

# %%
regions = detect_cough_regions(ste, cfg, len(clip))
for r, (s, e) in zip(regions, bursts):
    print(f"found [{r.start_sample:6d}, {r.end_sample:6d})  true [{s:6d}, {e:6d})  "
          f"errors {r.start_sample - s:+5d} {r.end_sample - e:+5d}")

# %%
coughs, _ = segment(clip, cfg)
print(f"kept {len(coughs)} of {len(clip)} samples ({len(coughs) / len(clip):.0%})")
