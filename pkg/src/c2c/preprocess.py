"""Cough segmentation by short-time energy.

The chain is: peak-normalise, compute a rectangular-window sum-of-squares
energy per frame, open a region whenever the energy crosses the onset
threshold upward, close it at the last frame of the run of frames above
the offset threshold that starts there (never past the next onset), then
gather the region samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import AudioClip
from .errors import ConfigError, EmptySegmentError, TooShortError

SILENT = "silent"
NO_COUGH = "no_cough_detected"


@dataclass(frozen=True)
class PreprocessConfig:
    window_ms: float = 22.5
    hop_ms: float = 11.25
    onset_threshold: float = 14.5
    offset_threshold: float = 0.1

    def __post_init__(self):
        if not self.window_ms > 0:
            raise ConfigError(f"window_ms must be positive, got {self.window_ms}")
        if not 0 < self.hop_ms <= self.window_ms:
            raise ConfigError(f"hop_ms must be in (0, window_ms], got {self.hop_ms}")
        if not self.onset_threshold > self.offset_threshold > 0:
            raise ConfigError("thresholds must satisfy onset > offset > 0")

    def window_samples(self, rate):
        return int(math.floor(self.window_ms * rate / 1000.0 + 0.5))

    def hop_samples(self, rate):
        return max(1, int(math.floor(self.hop_ms * rate / 1000.0 + 0.5)))


@dataclass(frozen=True)
class SteSeries:
    values: np.ndarray
    window_len: int
    hop_len: int

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, order=True)
class CoughRegion:
    start_sample: int
    end_sample: int

    def __post_init__(self):
        if not 0 <= self.start_sample < self.end_sample:
            raise ValueError(f"invalid region [{self.start_sample}, {self.end_sample})")

    def __len__(self):
        return self.end_sample - self.start_sample

    def to_dict(self, rate):
        return {
            "start_sample": self.start_sample,
            "end_sample": self.end_sample,
            "start_sec": self.start_sample / rate,
            "end_sec": self.end_sample / rate,
        }


def normalize_peak(clip: AudioClip) -> AudioClip:
    peak = np.max(np.abs(clip.samples))
    if peak == 0:
        return clip.with_samples(clip.samples, SILENT)
    return clip.with_samples(clip.samples / peak)


def short_time_energy(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> SteSeries:
    window = cfg.window_samples(clip.sample_rate)
    hop = cfg.hop_samples(clip.sample_rate)
    if len(clip) < window:
        raise TooShortError(f"clip of {len(clip)} samples is shorter than one {window}-sample window")
    frames = sliding_window_view(clip.samples, window)[::hop]
    return SteSeries(np.einsum("ij,ij->i", frames, frames), window, hop)


def detect_cough_regions(ste: SteSeries, cfg: PreprocessConfig, signal_len: int) -> list[CoughRegion]:
    v = ste.values
    if v.size == 0:
        raise ValueError("empty STE series")
    above_on = v > cfg.onset_threshold
    rising = above_on.copy()
    rising[1:] &= ~above_on[:-1]
    onsets = np.flatnonzero(rising)
    if onsets.size == 0:
        return []

    below_off = np.flatnonzero(v <= cfg.offset_threshold)
    bounds = np.append(onsets[1:], v.size)
    regions: list[CoughRegion] = []
    for onset, stop in zip(onsets, bounds):
        # the energy run above the offset threshold that starts at the onset,
        # cut at the next onset
        i = np.searchsorted(below_off, onset)
        drop = below_off[i] if i < below_off.size else v.size
        offset = min(drop, stop) - 1
        start = int(onset) * ste.hop_len
        end = min(int(offset) * ste.hop_len + ste.window_len, signal_len)
        if regions and start < regions[-1].end_sample:
            prev = regions.pop()
            start, end = prev.start_sample, max(prev.end_sample, end)
        regions.append(CoughRegion(start, end))
    return regions


def extract_cough_signal(clip: AudioClip, regions: list[CoughRegion]) -> AudioClip:
    if not regions:
        raise EmptySegmentError("no cough regions to extract")
    for r in regions:
        if r.end_sample > len(clip):
            raise ValueError(f"region {r} exceeds clip length {len(clip)}")
    spans = [clip.samples[r.start_sample:r.end_sample] for r in regions]
    return clip.with_samples(np.concatenate(spans))


def segment(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()):
    """Run the full chain and also return the regions that were found."""
    normalized = normalize_peak(clip)
    ste = short_time_energy(normalized, cfg)
    regions = detect_cough_regions(ste, cfg, len(normalized))
    if not regions:
        return normalized.with_samples(normalized.samples, NO_COUGH), []
    return extract_cough_signal(normalized, regions), regions


def preprocess_pipeline(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> AudioClip:
    return segment(clip, cfg)[0]
