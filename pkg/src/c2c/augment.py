"""Seeded training-time augmentation: length fixing, circular shift, feature masking."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import ConfigError
from .features import FeatureMatrix


@dataclass(frozen=True)
class AugmentConfig:
    segment_sec: float = 4.0
    max_shift_sec: float = 1.0
    time_masks: int = 2
    max_time_mask: int = 20
    freq_masks: int = 2
    max_freq_mask: int = 8
    mask_value: float = 0.0

    def __post_init__(self):
        if not 0 <= self.max_shift_sec <= self.segment_sec:
            raise ConfigError("need 0 <= max_shift_sec <= segment_sec")
        if self.segment_sec <= 0:
            raise ConfigError("segment_sec must be positive")
        if min(self.time_masks, self.freq_masks, self.max_time_mask, self.max_freq_mask) < 0:
            raise ConfigError("mask counts and widths must be non-negative")


def example_seed(global_seed, epoch, index):
    """Independent per-example seed derived from (global_seed, epoch, index)."""
    return int(np.random.SeedSequence([global_seed, epoch, index]).generate_state(1)[0])


def fix_length(clip: AudioClip, segment_sec: float = 4.0, seed: int | None = None) -> AudioClip:
    """Crop or cyclically tile to exactly ``segment_sec`` seconds.

    With ``seed=None`` (evaluation) long clips are cropped from sample 0;
    otherwise the crop start is drawn uniformly from the valid range.
    """
    target = int(math.floor(segment_sec * clip.sample_rate + 0.5))
    n = len(clip)
    if n == target:
        return clip
    if n < target:
        return clip.with_samples(np.resize(clip.samples, target))
    start = 0 if seed is None else int(np.random.default_rng(seed).integers(0, n - target + 1))
    return clip.with_samples(clip.samples[start:start + target])


def draw_shift(cfg: AugmentConfig, rate: int, seed: int) -> int:
    max_shift = int(math.floor(cfg.max_shift_sec * rate + 0.5))
    return int(np.random.default_rng(seed).integers(-max_shift, max_shift + 1))


def random_shift(clip: AudioClip, cfg: AugmentConfig = AugmentConfig(), seed: int = 0) -> AudioClip:
    expected = int(math.floor(cfg.segment_sec * clip.sample_rate + 0.5))
    if len(clip) != expected:
        raise ConfigError(f"random_shift expects {expected} samples (segment length), got {len(clip)}")
    return clip.with_samples(np.roll(clip.samples, draw_shift(cfg, clip.sample_rate, seed)))


def draw_stripes(rng, count, max_width, extent):
    """(start, width) pairs; a stripe never spans the whole axis."""
    stripes = []
    cap = min(max_width, extent - 1)
    for _ in range(count):
        width = int(rng.integers(0, max(cap, 0) + 1))
        start = int(rng.integers(0, extent - width + 1))
        stripes.append((start, width))
    return stripes


def apply_masks(data, time_stripes, freq_stripes, value=0.0):
    out = np.array(data, dtype=np.float64, copy=True)
    t, f = out.shape
    for start, width in time_stripes:
        out[max(start, 0):min(start + width, t), :] = value
    for start, width in freq_stripes:
        out[:, max(start, 0):min(start + width, f)] = value
    return out


def feature_mask(features: FeatureMatrix, cfg: AugmentConfig = AugmentConfig(), seed: int = 0) -> FeatureMatrix:
    t, f = features.shape
    rng = np.random.default_rng(seed)
    time_stripes = draw_stripes(rng, cfg.time_masks, cfg.max_time_mask, t)
    freq_stripes = draw_stripes(rng, cfg.freq_masks, cfg.max_freq_mask, f)
    return features.with_data(apply_masks(features.data, time_stripes, freq_stripes, cfg.mask_value))
