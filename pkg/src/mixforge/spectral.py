"""STFT analysis and overlap-add synthesis at fixed 32 ms / 8 ms Hann framing.

Framing: the signal is left-padded with ``frame_len - hop`` zeros so that
every real sample sits under the same number of frames (four at 75 %
overlap); the tail is zero-padded up to the last frame that still touches
a real sample. ``original_len`` lets ``istft`` return exactly the input
length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import WORKING_RATE, AudioClip
from .errors import EmptyClipError, RateMismatchError, ShapeMismatchError

FRAME_MS = 32
HOP_MS = 8
WINDOW = "hann"


def hann(n):
    """Periodic Hann window (COLA at hop = n/4)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_params(sample_rate):
    return round(sample_rate * FRAME_MS / 1000), round(sample_rate * HOP_MS / 1000)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided complex STFT, ``bins[f, t]``."""

    bins: np.ndarray
    frame_len: int
    hop: int
    sample_rate: int
    original_len: int
    window: str = WINDOW

    @property
    def shape(self):
        return self.bins.shape

    @property
    def n_frames(self):
        return self.bins.shape[1]

    @property
    def pad(self):
        return self.frame_len - self.hop

    def magnitude(self):
        return np.abs(self.bins)

    def phase(self):
        return np.angle(self.bins)

    def with_bins(self, bins):
        return Spectrogram(bins, self.frame_len, self.hop, self.sample_rate,
                           self.original_len, self.window)


def n_frames_for(length, frame_len, hop):
    pad = frame_len - hop
    return (pad + length - 1) // hop + 1


def stft(clip: AudioClip, working_rate=WORKING_RATE, frame_len=None, hop=None) -> Spectrogram:
    if len(clip) == 0:
        raise EmptyClipError("cannot analyse an empty clip")
    if working_rate is not None and clip.sample_rate != working_rate:
        raise RateMismatchError(
            f"clip is at {clip.sample_rate} Hz, STFT configured for {working_rate} Hz")
    default_len, default_hop = frame_params(clip.sample_rate)
    frame_len = frame_len or default_len
    hop = hop or default_hop
    pad = frame_len - hop
    n = len(clip)
    t = n_frames_for(n, frame_len, hop)
    buf = np.zeros((t - 1) * hop + frame_len)
    buf[pad:pad + n] = clip.samples
    idx = np.arange(t)[:, None] * hop + np.arange(frame_len)[None, :]
    frames = buf[idx] * hann(frame_len)[None, :]
    bins = np.fft.rfft(frames, axis=1).T
    return Spectrogram(bins, frame_len, hop, clip.sample_rate, n)


def _check(spec: Spectrogram):
    if spec.window != WINDOW:
        raise ShapeMismatchError(f"unsupported window {spec.window!r}")
    if spec.hop <= 0 or spec.frame_len < spec.hop:
        raise ShapeMismatchError("frame_len/hop inconsistent")
    if spec.bins.ndim != 2 or spec.bins.shape[0] != spec.frame_len // 2 + 1:
        raise ShapeMismatchError(
            f"expected {spec.frame_len // 2 + 1} frequency bins, got {spec.bins.shape}")
    if spec.bins.shape[1] != n_frames_for(spec.original_len, spec.frame_len, spec.hop):
        raise ShapeMismatchError(
            f"{spec.bins.shape[1]} frames do not cover original_len={spec.original_len}")


def istft(spec: Spectrogram) -> AudioClip:
    _check(spec)
    frame_len, hop, t = spec.frame_len, spec.hop, spec.n_frames
    win = hann(frame_len)
    frames = np.fft.irfft(spec.bins.T, n=frame_len, axis=1) * win[None, :]
    total = (t - 1) * hop + frame_len
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = win * win
    for i in range(t):
        out[i * hop:i * hop + frame_len] += frames[i]
        norm[i * hop:i * hop + frame_len] += w2
    start = spec.pad
    seg = slice(start, start + spec.original_len)
    y = out[seg]
    wsum = norm[seg]
    nz = wsum > 1e-10
    y = np.where(nz, y / np.where(nz, wsum, 1.0), 0.0)
    return AudioClip(y, spec.sample_rate)


def recombine(magnitude, phase_source: Spectrogram) -> Spectrogram:
    """Attach the phase of ``phase_source`` to a non-negative magnitude matrix."""
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.shape != phase_source.shape:
        raise ShapeMismatchError(f"magnitude {magnitude.shape} vs spectrogram {phase_source.shape}")
    if np.any(magnitude < 0):
        raise ValueError("magnitude must be non-negative")
    return phase_source.with_bins(magnitude * np.exp(1j * phase_source.phase()))
