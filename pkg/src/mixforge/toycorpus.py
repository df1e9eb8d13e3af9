"""Deterministic speech-like corpus in the TIMIT directory layout.

Each "sentence" is a chain of voiced syllables (harmonic source with a
drifting pitch contour, shaped by three vowel formants) separated by short
pauses and noise bursts standing in for fricatives. Speakers differ in
pitch range and vocal-tract scale. This is test material, not speech; it
only needs speech-like T-F sparsity and speaker-dependent pitch.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav

TOY_RATE = 16000

# F1, F2, F3 in Hz for a few vowels (adult male reference values)
_VOWELS = np.array([
    [730, 1090, 2440],
    [270, 2290, 3010],
    [300, 870, 2240],
    [530, 1840, 2480],
    [570, 840, 2410],
    [660, 1720, 2410],
])
_BANDWIDTHS = np.array([80.0, 110.0, 160.0])


def _formant_gain(freqs, formants):
    g = np.zeros_like(freqs)
    for f, b in zip(formants, _BANDWIDTHS):
        g += 1.0 / (1.0 + ((freqs - f) / b) ** 2)
    return g


def _syllable(rng, rate, f0_lo, f0_hi, scale):
    n = int(rng.uniform(0.12, 0.30) * rate)
    t = np.arange(n) / rate
    start, end = rng.uniform(f0_lo, f0_hi, size=2)
    f0 = np.linspace(start, end, n) * (1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(3, 6) * t))
    phase = 2 * np.pi * np.cumsum(f0) / rate
    formants = _VOWELS[rng.integers(len(_VOWELS))] * scale
    out = np.zeros(n)
    n_harm = int((rate / 2 - 200) // f0_hi)
    for h in range(1, n_harm + 1):
        freq = h * f0
        amp = _formant_gain(freq, formants) / h ** 0.7
        out += amp * np.sin(h * phase)
    env = np.sin(np.pi * np.arange(n) / n) ** 0.6
    return out * env


def _fricative(rng, rate):
    n = int(rng.uniform(0.05, 0.12) * rate)
    noise = np.diff(rng.standard_normal(n + 1))
    return 0.15 * noise * np.hanning(n)


def synth_sentence(rng, f0_range, scale, rate=TOY_RATE, target_s=(2.5, 3.5)):
    target = int(rng.uniform(*target_s) * rate)
    parts = [np.zeros(int(0.1 * rate))]
    total = parts[0].size
    while total < target:
        piece = _syllable(rng, rate, *f0_range, scale)
        if rng.random() < 0.25:
            piece = np.concatenate([_fricative(rng, rate), piece])
        gap = np.zeros(int(rng.uniform(0.02, 0.12) * rate))
        parts += [piece, gap]
        total += piece.size + gap.size
    x = np.concatenate(parts)[:target]
    return 0.5 * x / np.max(np.abs(x))


def make_toy_corpus(root, n_dialects=4, speakers_per_dialect=3, sentences_per_speaker=3,
                    seed=0, rate=TOY_RATE):
    """Write the corpus under ``root`` and return the list of written paths."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    written = []
    sx = 0
    for d in range(1, n_dialects + 1):
        for s in range(speakers_per_dialect):
            female = (d + s) % 2 == 0
            letters = "".join(chr(ord("A") + int(k)) for k in rng.integers(0, 26, size=3))
            speaker = f"{'F' if female else 'M'}{letters}{s}"
            f0_lo = rng.uniform(170, 200) if female else rng.uniform(90, 115)
            f0_range = (f0_lo, f0_lo * rng.uniform(1.25, 1.45))
            scale = rng.uniform(1.1, 1.2) if female else rng.uniform(0.95, 1.05)
            spk_dir = root / f"DR{d}" / speaker
            spk_dir.mkdir(parents=True, exist_ok=True)
            for k in range(sentences_per_speaker):
                sentence = "SA1" if k == 0 else f"SX{sx + k}"
                x = synth_sentence(rng, f0_range, scale, rate)
                path = spk_dir / f"{sentence}.wav"
                write_wav(AudioClip(x, rate), path)
                written.append(path)
            sx += sentences_per_speaker
    return written
