"""Ideal time-frequency masks and ground-truth validation.

Zero-denominator convention for the ratio masks: a bin where both
speakers are silent gets 1/2 for each, so the two masks always sum to 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .audio import AudioClip
from .errors import DegenerateInputError, ShapeMismatchError
from .metrics import si_sdr
from .spectral import Spectrogram, istft, recombine, stft

MASK_KINDS = ("ibm", "irm", "wfm")


@dataclass(frozen=True, eq=False)
class Mask:
    values: np.ndarray
    kind: str

    @property
    def shape(self):
        return self.values.shape


def _magnitudes(s1, s2):
    a = s1.magnitude() if isinstance(s1, Spectrogram) else np.abs(np.asarray(s1))
    b = s2.magnitude() if isinstance(s2, Spectrogram) else np.abs(np.asarray(s2))
    if a.shape != b.shape:
        raise ShapeMismatchError(f"spectrogram shapes differ: {a.shape} vs {b.shape}")
    return a, b


def ibm(s1, s2):
    """Binary masks; a bin belongs to a speaker only if strictly louder."""
    a, b = _magnitudes(s1, s2)
    return Mask((a > b).astype(np.float64), "ibm"), Mask((b > a).astype(np.float64), "ibm")


def _ratio(a, b, kind):
    den = a + b
    zero = den == 0.0
    safe = np.where(zero, 1.0, den)
    m1 = np.where(zero, 0.5, a / safe)
    # second mask as the complement keeps m1 + m2 == 1 to the last bit
    return Mask(m1, kind), Mask(np.where(zero, 0.5, 1.0 - m1), kind)


def irm(s1, s2):
    a, b = _magnitudes(s1, s2)
    return _ratio(a, b, "irm")


def wfm(s1, s2):
    a, b = _magnitudes(s1, s2)
    return _ratio(a * a, b * b, "wfm")


_BUILDERS = {"ibm": ibm, "irm": irm, "wfm": wfm}


def ideal_masks(kind, s1, s2):
    try:
        return _BUILDERS[kind.lower()](s1, s2)
    except KeyError:
        raise ValueError(f"unknown mask kind {kind!r}; expected one of {MASK_KINDS}") from None


def apply_and_reconstruct(mix: Spectrogram, mask) -> AudioClip:
    """Masked mixture magnitude with mixture phase, back to the time domain."""
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask, dtype=np.float64)
    if values.shape != mix.shape:
        raise ShapeMismatchError(f"mask {values.shape} vs mixture {mix.shape}")
    return istft(recombine(mix.magnitude() * values, mix))


@dataclass(frozen=True)
class ValidationRecord:
    kind: str
    si_sdr_db: tuple
    pesq: Optional[tuple] = None


PesqHook = Callable[[AudioClip, AudioClip], Optional[float]]


def validate_ground_truths(gts1: AudioClip, gts2: AudioClip, mix: AudioClip, kind="wfm",
                           pesq_hook: Optional[PesqHook] = None) -> ValidationRecord:
    """Estimate each speaker from the mixture with its ideal mask and score it
    against the recorded ground truth."""
    lengths = {len(gts1), len(gts2), len(mix)}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"clips must be aligned to one length, got {sorted(lengths)}")
    for name, clip in (("gts1", gts1), ("gts2", gts2), ("mix", mix)):
        if not np.any(clip.samples):
            raise DegenerateInputError(f"{name} is all-zero")
    rate = mix.sample_rate
    s1, s2 = stft(gts1, rate), stft(gts2, rate)
    m = stft(mix, rate)
    masks = ideal_masks(kind, s1, s2)
    ests = [apply_and_reconstruct(m, mk) for mk in masks]
    scores = tuple(si_sdr(g, e) for g, e in zip((gts1, gts2), ests))
    pesq = None
    if pesq_hook is not None:
        pesq = tuple(pesq_hook(g, e) for g, e in zip((gts1, gts2), ests))
    return ValidationRecord(kind.lower(), scores, pesq)
