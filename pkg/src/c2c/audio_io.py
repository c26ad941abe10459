"""WAV reading/writing, linear resampling and dataset manifests.

WAV support is deliberately narrow: RIFF/WAVE with PCM16 or IEEE float32
samples, one or two channels.  Everything is returned as float64 mono in
[-1, 1].
"""
from __future__ import annotations

import csv
import io
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyAudioError,
    ManifestError,
    ManifestValueError,
    SplitInfeasibleError,
    UnsupportedFormatError,
    WavFormatError,
)

PIPELINE_RATE = 16000

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

MANIFEST_HEADER = ("clip_path", "label", "modality", "subject_id")
MODALITIES = ("cough", "breath")


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono waveform plus its sample rate.

    ``flags`` carries diagnostics raised along the pipeline (for instance
    ``"silent"`` or ``"no_cough_detected"``) so that callers can audit a
    dataset without the processing step failing.
    """

    samples: np.ndarray
    sample_rate: int
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "flags", frozenset(self.flags))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate

    def with_samples(self, samples, *extra_flags):
        return AudioClip(samples, self.sample_rate, self.flags | set(extra_flags))


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------

def _iter_chunks(data):
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        name = cid.decode("latin-1")
        if len(body) < size:
            raise WavFormatError(name, f"declares {size} bytes but only {len(body)} present")
        yield name, body
        pos += 8 + size + (size & 1)


def _parse_fmt(body):
    if len(body) < 16:
        raise WavFormatError("fmt ", f"chunk too short ({len(body)} bytes)")
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise WavFormatError("fmt ", "extensible format without sub-format GUID")
        (tag,) = struct.unpack_from("<H", body, 24)
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels (only mono/stereo supported)")
    if rate == 0:
        raise WavFormatError("fmt ", "sample rate is zero")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedFormatError(f"format tag {tag:#06x} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise WavFormatError("fmt ", f"block align {block_align} inconsistent with {channels}x{bits} bit")
    return channels, rate, dtype


def read_wav_bytes(data: bytes) -> AudioClip:
    if len(data) < 12:
        raise WavFormatError("RIFF", "file shorter than the RIFF header")
    if data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("RIFF", "missing RIFF/WAVE signature")

    fmt = None
    payload = None
    for name, body in _iter_chunks(data):
        if name == "fmt ":
            fmt = _parse_fmt(body)
        elif name == "data":
            if fmt is None:
                raise WavFormatError("data", "data chunk precedes fmt chunk")
            payload = body
            break
    if fmt is None:
        raise WavFormatError("fmt ", "chunk not found")
    if payload is None:
        raise WavFormatError("data", "chunk not found")
    channels, rate, dtype = fmt
    frame_bytes = channels * dtype.itemsize
    n_frames = len(payload) // frame_bytes
    if n_frames == 0:
        raise EmptyAudioError("WAV data chunk holds no complete frames")

    raw = np.frombuffer(payload[:n_frames * frame_bytes], dtype=dtype).reshape(n_frames, channels)
    if dtype.kind == "i":
        samples = raw.astype(np.float64) / 32768.0
    else:
        samples = raw.astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise WavFormatError("data", "non-finite float samples")
    return AudioClip(samples.mean(axis=1), rate)


def load_wav(path) -> AudioClip:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return read_wav_bytes(data)
    except DataError as exc:
        exc.args = (f"{path}: {exc}",)
        raise


def wav_bytes(clip: AudioClip) -> bytes:
    """Encode a clip as canonical 44-byte-header PCM16 mono."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(body), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16,
        b"data", len(body),
    )
    return header + body


def write_wav(clip: AudioClip, path) -> None:
    if np.max(np.abs(clip.samples), initial=0.0) > 1.0:
        raise ValueError("samples must lie in [-1, 1] for PCM16 output")
    with open(path, "wb") as fh:
        fh.write(wav_bytes(clip))


def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n_in = len(clip)
    n_out = max(1, int(math.floor(n_in * target_rate / clip.sample_rate + 0.5)))
    pos = np.arange(n_out) * clip.sample_rate / target_rate
    out = np.interp(pos, np.arange(n_in), clip.samples)
    return AudioClip(out, target_rate, clip.flags)


# ---------------------------------------------------------------------------
# Manifests and splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    clip_path: str
    label: int
    modality: str
    subject_id: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    validation: list
    seed: int


def parse_manifest(text: str) -> list[ManifestEntry]:
    lines = text.splitlines()
    if not lines:
        raise ManifestError(1, "empty file (header required)")
    header = tuple(h.strip() for h in next(csv.reader([lines[0]])))
    if header != MANIFEST_HEADER:
        raise ManifestError(1, f"header must be {','.join(MANIFEST_HEADER)}, got {','.join(header)}")

    entries = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise ManifestError(lineno, f"expected {len(MANIFEST_HEADER)} columns, got {len(row)}")
        path, label, modality, subject = (c.strip() for c in row)
        if label not in ("0", "1"):
            raise ManifestValueError(lineno, f"label must be 0 or 1, got {label!r}")
        if modality not in MODALITIES:
            raise ManifestValueError(lineno, f"modality must be cough or breath, got {modality!r}")
        if not path:
            raise ManifestError(lineno, "empty clip_path")
        entries.append(ManifestEntry(path, int(label), modality, subject))
    return entries


def load_manifest(path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    try:
        return parse_manifest(text)
    except ManifestError as exc:
        raise type(exc)(exc.line, exc.message, str(path)) from None


def format_manifest(entries: Iterable[ManifestEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for e in entries:
        writer.writerow([e.clip_path, e.label, e.modality, e.subject_id])
    return buf.getvalue()


def write_manifest(entries: Iterable[ManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_manifest(entries))


def resolve_clip_path(entry: ManifestEntry, manifest_path) -> str:
    """Relative clip paths are taken relative to the manifest's directory."""
    if os.path.isabs(entry.clip_path):
        return entry.clip_path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), entry.clip_path)


def split_dataset(entries: Sequence[ManifestEntry], fraction: float = 0.08, seed: int = 0) -> DatasetSplit:
    """Subject-disjoint, label-stratified train/validation split.

    Subjects are shuffled within each class and then interleaved in
    proportion to class size, so the validation slice mirrors the label
    balance of the whole set.  Subjects are taken in that order until the
    validation target of ``round(fraction * n)`` entries (at least one) is
    met; a subject whose entries would overshoot the target is skipped.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if not entries:
        raise ValueError("cannot split an empty entry list")
    n = len(entries)

    groups: dict[str, list[ManifestEntry]] = {}
    for e in entries:
        groups.setdefault(e.subject_id, []).append(e)
    if len(groups) == 1 and n > 1:
        raise SplitInfeasibleError(
            f"all {n} entries share subject_id {entries[0].subject_id!r}; no subject-disjoint split exists"
        )

    rng = np.random.default_rng(seed)
    by_class: dict[int, list[str]] = {0: [], 1: []}
    for sid in sorted(groups):
        labels = [e.label for e in groups[sid]]
        by_class[int(2 * sum(labels) >= len(labels))].append(sid)
    keyed = []
    for label in (0, 1):
        sids = by_class[label]
        order = rng.permutation(len(sids))
        for rank, idx in enumerate(order):
            keyed.append(((rank + 0.5) / len(sids), label, sids[idx]))
    keyed.sort(key=lambda k: (k[0], k[1]))

    target = max(1, int(math.floor(fraction * n + 0.5)))
    chosen: set[str] = set()
    count = 0
    for _, _, sid in keyed:
        if count >= target:
            break
        size = len(groups[sid])
        if count + size <= target and len(chosen) + 1 < len(groups):
            chosen.add(sid)
            count += size
    if not chosen:
        smallest = min(groups, key=lambda s: (len(groups[s]), s))
        chosen.add(smallest)

    train = [e for e in entries if e.subject_id not in chosen]
    validation = [e for e in entries if e.subject_id in chosen]
    return DatasetSplit(train, validation, seed)
