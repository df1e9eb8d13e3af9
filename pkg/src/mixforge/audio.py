"""Mono audio clips, PCM16 WAV I/O and rational-ratio resampling."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    EmptyClipError,
    MalformedWavError,
    UnsupportedEncodingError,
    WavError,
    WavNotFoundError,
)

WORKING_RATE = 8000
PCM_SCALE = 32768.0

_KAISER_BETA = 8.6
_ROLLOFF = 0.95


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono float64 samples plus their sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip is mono; samples must be 1-D")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        rate = int(self.sample_rate)
        if rate <= 0 or rate != self.sample_rate:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate

    def scaled(self, gain):
        return AudioClip(self.samples * gain, self.sample_rate)

    def padded(self, length):
        """Return the clip zero-padded at the tail to ``length`` samples."""
        if length < len(self):
            raise ValueError("padded() cannot shorten a clip")
        out = np.zeros(length)
        out[: len(self)] = self.samples
        return AudioClip(out, self.sample_rate)


# --------------------------------------------------------------------- WAV


@dataclass(frozen=True)
class WavInfo:
    sample_rate: int
    n_frames: int
    data_offset: int


def _parse_header(blob: bytes, path) -> WavInfo:
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16 or body + size > len(blob):
                raise MalformedWavError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", blob, body)
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedWavError(f"{path}: data chunk before fmt chunk")
            if body + size > len(blob):
                raise MalformedWavError(
                    f"{path}: data chunk declares {size} bytes, only {len(blob) - body} present")
            tag, channels, rate, _, block_align, bits = fmt
            if tag != 1:
                raise UnsupportedEncodingError(f"{path}: format tag {tag} is not integer PCM")
            if channels != 1:
                raise UnsupportedEncodingError(f"{path}: {channels} channels, only mono is supported")
            if bits != 16:
                raise UnsupportedEncodingError(f"{path}: {bits}-bit samples, only 16-bit is supported")
            if block_align != 2 or size % 2:
                raise MalformedWavError(f"{path}: inconsistent block alignment")
            if rate <= 0:
                raise MalformedWavError(f"{path}: sample rate {rate}")
            return WavInfo(rate, size // 2, body)
        pos = body + size + (size & 1)
    raise MalformedWavError(f"{path}: no data chunk")


def _load(path) -> tuple[bytes, WavInfo]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise WavNotFoundError(f"{path}: no such file") from None
    except IsADirectoryError:
        raise WavNotFoundError(f"{path}: is a directory") from None
    return blob, _parse_header(blob, path)


def wav_info(path) -> WavInfo:
    """Header fields of a PCM16 mono WAV file (validates the same way as ``read_wav``)."""
    return _load(path)[1]


def read_wav(path) -> AudioClip:
    blob, info = _load(path)
    codes = np.frombuffer(blob, dtype="<i2", count=info.n_frames, offset=info.data_offset)
    return AudioClip(codes.astype(np.float64) / PCM_SCALE, info.sample_rate)


def quantize(samples) -> np.ndarray:
    """Clamp to [-1, 1] and map onto int16 codes (x * 32768, rounded, saturated)."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.rint(x * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(clip: AudioClip, path) -> None:
    if len(clip) == 0:
        raise EmptyClipError("refusing to write an empty clip")
    payload = quantize(clip.samples).tobytes()
    rate = clip.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise WavError(f"{path}: cannot write ({exc.strerror or exc})") from exc


# -------------------------------------------------------------- resampling


def _kaiser(t, half_width, beta=_KAISER_BETA):
    r = np.clip(t / half_width, -1.0, 1.0)
    return np.i0(beta * np.sqrt(1.0 - r * r)) / np.i0(beta)


def polyphase_table(up: int, down: int) -> np.ndarray:
    """Windowed-sinc kernel, one 64-tap row per output phase.

    Row ``p`` interpolates at fractional input offset ``p / up``; each row
    is normalized to unit DC gain.
    """
    taps = kernels.TAPS
    cutoff = min(1.0, up / down) * _ROLLOFF
    frac = np.arange(up)[:, None] / up
    t = np.arange(-(taps // 2 - 1), taps // 2 + 1)[None, :] - frac
    table = cutoff * np.sinc(cutoff * t) * _kaiser(t, taps / 2 + 0.5)
    return table / table.sum(axis=1, keepdims=True)


def resampled_length(n: int, source_rate: int, target_rate: int) -> int:
    return (2 * n * target_rate + source_rate) // (2 * source_rate)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    if target_rate <= 0 or int(target_rate) != target_rate:
        raise ValueError(f"target rate must be a positive integer, got {target_rate!r}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), target_rate)
    g = math.gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    out_len = resampled_length(len(clip), clip.sample_rate, target_rate)
    y = kernels.polyphase_resample(clip.samples, polyphase_table(up, down), up, down, out_len)
    return AudioClip(y, target_rate)
