"""Spectral frontend: radix-2 FFT, mel filterbank, log-mel and log frame energy."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import AudioClip
from .errors import ConfigError, DataError, TooShortError

LOG_MEL = "log_mel"
RAW_FRAME = "raw_frame"
KIND_CODES = {LOG_MEL: 0, RAW_FRAME: 1}
FEATURE_MAGIC = b"C2CF"


@dataclass(frozen=True)
class FrontendConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    mel_bins: int = 40
    f_min: float = 50.0
    f_max: float = 7600.0
    log_floor: float = 1e-10

    def frame_samples(self, rate):
        return int(math.floor(self.frame_ms * rate / 1000.0 + 0.5))

    def hop_samples(self, rate):
        return max(1, int(math.floor(self.hop_ms * rate / 1000.0 + 0.5)))

    def validate(self, rate):
        _check_pow2(self.fft_size)
        if self.fft_size < self.frame_samples(rate):
            raise ConfigError(f"fft_size {self.fft_size} is smaller than the {self.frame_samples(rate)}-sample frame")
        if not 0 <= self.f_min < self.f_max <= rate / 2:
            raise ConfigError(f"need 0 <= f_min < f_max <= {rate / 2}, got {self.f_min}, {self.f_max}")
        if self.mel_bins < 2:
            raise ConfigError("mel_bins must be at least 2")
        if not self.log_floor > 0:
            raise ConfigError("log_floor must be positive")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """``data`` is time x frequency."""

    data: np.ndarray
    frame_hop_ms: float
    kind: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"feature data must be a non-empty T x F matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data must be finite")
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data):
        return FeatureMatrix(data, self.frame_hop_ms, self.kind)


def _check_pow2(n):
    if n < 1 or n & (n - 1):
        raise ConfigError(f"FFT size must be a power of two, got {n}")


@lru_cache(maxsize=None)
def _bit_reversal(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x, n=None):
    """Full complex DFT along the last axis, iterative radix-2 decimation in time.

    ``x`` is zero-padded (never truncated) to ``n`` points.
    """
    x = np.asarray(x)
    if n is None:
        n = x.shape[-1]
    _check_pow2(n)
    if x.shape[-1] > n:
        raise ValueError(f"signal of length {x.shape[-1]} does not fit in {n} points")
    lead = x.shape[:-1]
    a = np.zeros(lead + (n,), dtype=np.complex128)
    a[..., :x.shape[-1]] = x
    a = a[..., _bit_reversal(n)]

    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        size *= 2
    return a


def ifft(spectrum):
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    n = spectrum.shape[-1]
    return np.conj(fft(np.conj(spectrum))) / n


def fft_real(signal, n):
    """One-sided spectrum (n/2 + 1 bins) of a real signal."""
    return fft(np.asarray(signal, dtype=np.float64), n)[..., : n // 2 + 1]


def irfft_real(half_spectrum, n):
    """Inverse of :func:`fft_real` for a Hermitian spectrum; returns n real samples."""
    half_spectrum = np.asarray(half_spectrum, dtype=np.complex128)
    full = np.zeros(half_spectrum.shape[:-1] + (n,), dtype=np.complex128)
    full[..., : n // 2 + 1] = half_spectrum
    full[..., n // 2 + 1:] = np.conj(half_spectrum[..., 1 : n // 2][..., ::-1])
    return ifft(full).real


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_bins(cfg: FrontendConfig, rate):
    """FFT bin indices of the filter edges/centres (mel_bins + 2 points)."""
    mels = np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.mel_bins + 2)
    bins = np.floor(mel_to_hz(mels) * cfg.fft_size / rate + 0.5).astype(int)
    if np.any(np.diff(bins) <= 0):
        raise ConfigError(
            f"{cfg.mel_bins} mel bins over {cfg.f_min}-{cfg.f_max} Hz are too dense for a {cfg.fft_size}-point FFT"
        )
    return bins


def mel_filterbank(cfg: FrontendConfig = FrontendConfig(), rate: int = 16000) -> np.ndarray:
    """Triangular filters with centres snapped to FFT bins, so each peaks at exactly 1."""
    cfg.validate(rate)
    return _mel_filterbank(cfg, rate).copy()


@lru_cache(maxsize=8)
def _mel_filterbank(cfg, rate):
    edges = mel_center_bins(cfg, rate)
    k = np.arange(cfg.fft_size // 2 + 1)
    fb = np.zeros((cfg.mel_bins, k.size))
    for m in range(cfg.mel_bins):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rise = (k - lo) / (mid - lo)
        fall = (hi - k) / (hi - mid)
        fb[m] = np.clip(np.minimum(rise, fall), 0.0, None)
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=8)
def _hann(n):
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


def frame_signal(samples, frame, hop):
    if samples.shape[0] < frame:
        raise TooShortError(f"clip of {samples.shape[0]} samples is shorter than one {frame}-sample frame")
    return sliding_window_view(samples, frame)[::hop]


def log_mel_features(clip: AudioClip, cfg: FrontendConfig = FrontendConfig()) -> FeatureMatrix:
    rate = clip.sample_rate
    cfg.validate(rate)
    frame = cfg.frame_samples(rate)
    frames = frame_signal(clip.samples, frame, cfg.hop_samples(rate)) * _hann(frame)
    spec = fft_real(frames, cfg.fft_size)
    power = spec.real ** 2 + spec.imag ** 2
    mel = power @ _mel_filterbank(cfg, rate).T
    return FeatureMatrix(np.log(np.maximum(mel, cfg.log_floor)), cfg.hop_ms, LOG_MEL)


def raw_frame_features(clip: AudioClip, cfg: FrontendConfig = FrontendConfig()) -> FeatureMatrix:
    rate = clip.sample_rate
    frames = frame_signal(clip.samples, cfg.frame_samples(rate), cfg.hop_samples(rate))
    energy = np.einsum("ij,ij->i", frames, frames)
    return FeatureMatrix(np.log(np.maximum(energy, cfg.log_floor))[:, None], cfg.hop_ms, RAW_FRAME)


def extract_features(clip: AudioClip, kind: str, cfg: FrontendConfig = FrontendConfig()) -> FeatureMatrix:
    if kind == LOG_MEL:
        return log_mel_features(clip, cfg)
    if kind == RAW_FRAME:
        return raw_frame_features(clip, cfg)
    raise ConfigError(f"unknown frontend {kind!r}")


def feature_dim(kind: str, cfg: FrontendConfig = FrontendConfig()) -> int:
    return cfg.mel_bins if kind == LOG_MEL else 1


# -- feature files: magic, u32 T, u32 F, u32 kind, then float32 rows ---------

def feature_bytes(features: FeatureMatrix) -> bytes:
    t, f = features.shape
    header = struct.pack("<4sIII", FEATURE_MAGIC, t, f, KIND_CODES[features.kind])
    return header + features.data.astype("<f4").tobytes()


def write_features(features: FeatureMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(feature_bytes(features))


def read_features(path, frame_hop_ms: float = FrontendConfig.hop_ms) -> FeatureMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != FEATURE_MAGIC:
        raise DataError(f"{path}: not a C2CF feature file")
    _, t, f, code = struct.unpack_from("<4sIII", data)
    kinds = {v: k for k, v in KIND_CODES.items()}
    if code not in kinds:
        raise DataError(f"{path}: unknown feature kind code {code}")
    if len(data) != 16 + 4 * t * f:
        raise DataError(f"{path}: expected {16 + 4 * t * f} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=16).reshape(t, f)
    return FeatureMatrix(values.astype(np.float64), frame_hop_ms, kinds[code])
