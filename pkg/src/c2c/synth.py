"""Synthetic labelled corpus of cough-like bursts with exact burst boundaries.

Each clip is low-level white background noise sprinkled with a few
single-sample clicks, plus band-limited noise bursts whose band encodes
the label.  Bursts of both classes share the same level and duration
distribution, so the label is only recoverable from the burst spectrum.

The clicks give the background a realistic crest factor: after peak
normalisation a burst-free clip then stays well below the onset
threshold instead of being blown up to full scale.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import AudioClip, ManifestEntry, write_manifest, write_wav
from .features import fft_real, irfft_real
from .preprocess import PreprocessConfig, short_time_energy

BURST_RMS = 0.1
CLICK_LEVEL = 8.0          # clicks, in units of background std
CREST_CLIP = 2.8           # crest-factor target (peak / rms) inside the STE threshold window
RAMP_SEC = 0.005
MIN_GAP_SEC = 0.15
EDGE_SEC = 0.1


@dataclass(frozen=True)
class SynthSpec:
    n_clips: int = 20
    clip_sec: float = 3.0
    bursts_per_clip: tuple = (1, 3)
    burst_sec: tuple = (0.2, 0.4)
    class0_band: tuple = (300.0, 1200.0)
    class1_band: tuple = (2500.0, 5000.0)
    snr_db: float = 30.0
    seed: int = 0
    sample_rate: int = 16000
    clicks_per_clip: int = 3
    with_breath: bool = False

    def __post_init__(self):
        nyq = self.sample_rate / 2
        for band in (self.class0_band, self.class1_band):
            if not 0 < band[0] < band[1] < nyq:
                raise ValueError(f"band {band} must lie inside (0, {nyq})")
        lo, hi = self.bursts_per_clip
        if not 0 <= lo <= hi:
            raise ValueError("bursts_per_clip must be a non-decreasing pair of counts")
        if not 0 < self.burst_sec[0] <= self.burst_sec[1] < self.clip_sec:
            raise ValueError("burst durations must be positive and shorter than the clip")
        needed = hi * (self.burst_sec[1] + MIN_GAP_SEC) + 2 * EDGE_SEC
        if needed > self.clip_sec:
            raise ValueError(f"{hi} bursts of up to {self.burst_sec[1]} s do not fit in {self.clip_sec} s")


@dataclass
class SynthTruth:
    clip_path: str
    label: int
    bursts: list

    def to_dict(self):
        return {"clip_path": self.clip_path, "label": self.label,
                "bursts": [{"start_sample": s, "end_sample": e} for s, e in self.bursts]}


def band_noise(rng, n, band, rate, crest_iters=4):
    """Unit-rms noise confined to ``band`` Hz, with reduced crest factor.

    Built with random phases in the FFT domain; the crest factor is pulled
    down by alternately clipping at CREST_CLIP x rms and re-imposing the band.
    """
    size = 1 << max(1, (n - 1).bit_length())
    freqs = np.arange(size // 2 + 1) * rate / size
    mask = (freqs >= band[0]) & (freqs <= band[1])
    spec = np.where(mask, np.exp(2j * np.pi * rng.random(freqs.size)), 0.0)
    x = irfft_real(spec, size)[:n]
    for _ in range(crest_iters):
        x = x / np.sqrt(np.mean(x * x))
        x = np.clip(x, -CREST_CLIP, CREST_CLIP)
        padded = np.zeros(size)
        padded[:n] = x
        x = irfft_real(fft_real(padded, size) * mask, size)[:n]
    return x / np.sqrt(np.mean(x * x))


def _envelope(n, rate):
    ramp = min(int(RAMP_SEC * rate), n // 2)
    env = np.ones(n)
    if ramp > 0:
        r = np.sin(0.5 * np.pi * (np.arange(ramp) + 0.5) / ramp) ** 2
        env[:ramp] = r
        env[n - ramp:] = r[::-1]
    return env


def _place_bursts(rng, spec):
    rate = spec.sample_rate
    n_bursts = int(rng.integers(spec.bursts_per_clip[0], spec.bursts_per_clip[1] + 1))
    lengths = [int(rng.uniform(*spec.burst_sec) * rate) for _ in range(n_bursts)]
    total = int(round(spec.clip_sec * rate))
    edge, gap = int(EDGE_SEC * rate), int(MIN_GAP_SEC * rate)
    slack = total - 2 * edge - sum(lengths) - gap * max(n_bursts - 1, 0)
    offsets = np.sort(rng.integers(0, slack + 1, size=n_bursts))
    bursts = []
    for i, (length, off) in enumerate(zip(lengths, offsets)):
        start = edge + int(off) + sum(lengths[:i]) + gap * i
        bursts.append((start, start + length))
    return bursts


def synth_clip(rng, spec: SynthSpec, label: int, with_bursts=True):
    """Return (samples, bursts) for one clip."""
    rate = spec.sample_rate
    n = int(round(spec.clip_sec * rate))
    sigma = BURST_RMS * 10.0 ** (-spec.snr_db / 20.0)
    x = sigma * rng.standard_normal(n)
    for pos in rng.integers(0, n, size=spec.clicks_per_clip):
        x[pos] += CLICK_LEVEL * sigma * rng.choice((-1.0, 1.0))
    bursts = _place_bursts(rng, spec) if with_bursts else []
    band = spec.class1_band if label else spec.class0_band
    for start, end in bursts:
        length = end - start
        x[start:end] += BURST_RMS * band_noise(rng, length, band, rate) * _envelope(length, rate)
    return x, bursts


def check_burst_contrast(samples, bursts, rate, min_ratio=10.0):
    """Mean STE inside each burst versus the burst-free background."""
    clip = AudioClip(samples, rate)
    cfg = PreprocessConfig()
    ste = short_time_energy(clip, cfg)
    starts = np.arange(len(ste)) * ste.hop_len
    ends = starts + ste.window_len
    inside = np.zeros(len(ste), dtype=bool)
    ratios = []
    for s, e in bursts:
        within = (starts >= s) & (ends <= e)
        inside |= (ends > s) & (starts < e)
        if within.any():
            ratios.append(ste.values[within].mean())
    background = ste.values[~inside].mean() if (~inside).any() else 0.0
    if background == 0:
        return math.inf
    return min(ratios, default=math.inf) / background


def generate_corpus(spec: SynthSpec, out_dir):
    """Write WAVs, ``manifest.csv`` and ``truth.json`` under ``out_dir``.

    Returns ``(manifest_path, truths)``; truths cover the cough clips only.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    labels = np.arange(spec.n_clips) % 2
    rng.shuffle(labels)

    entries, truths = [], []
    for i, label in enumerate(labels):
        label = int(label)
        clip_rng = np.random.default_rng([spec.seed, i])
        samples, bursts = synth_clip(clip_rng, spec, label)
        if bursts and spec.snr_db >= 20:
            ratio = check_burst_contrast(samples, bursts, spec.sample_rate)
            if ratio < 10.0:
                raise RuntimeError(f"clip {i}: burst/background STE ratio {ratio:.1f} < 10")
        subject = f"s{i:04d}"
        name = f"{subject}_cough.wav"
        write_wav(AudioClip(samples, spec.sample_rate), os.path.join(out_dir, name))
        entries.append(ManifestEntry(name, label, "cough", subject))
        truths.append(SynthTruth(name, label, bursts))
        if spec.with_breath:
            breath_rng = np.random.default_rng([spec.seed, i, 1])
            breath, _ = synth_clip(breath_rng, spec, label, with_bursts=False)
            bname = f"{subject}_breath.wav"
            write_wav(AudioClip(breath, spec.sample_rate), os.path.join(out_dir, bname))
            entries.append(ManifestEntry(bname, label, "breath", subject))

    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(entries, manifest)
    with open(os.path.join(out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump([t.to_dict() for t in truths], fh, indent=1)
    with open(os.path.join(out_dir, "synth_spec.json"), "w", encoding="utf-8") as fh:
        json.dump(asdict(spec), fh, indent=1)
    return manifest, truths


def load_truth(path):
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    return [SynthTruth(r["clip_path"], r["label"], [(b["start_sample"], b["end_sample"]) for b in r["bursts"]])
            for r in records]
