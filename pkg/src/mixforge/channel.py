"""Acoustic path between rendered and captured audio.

``Session`` is the full-duplex play/record contract: a call renders one or
two sources (dual rendering starts both at the same output sample) and
returns the capture together with overrun/underrun loss counters. Sample 0
of every recording corresponds to render start.

Two implementations ship here: ``SimulatedSession`` (convolution with
synthetic impulse responses, optional soft-clip, white noise) and
``FakeSession`` (pass-through with scheduled fault reports, for tests and
dry runs). A hardware adapter would implement the same two methods and
must serialize calls.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from . import kernels
from .audio import WORKING_RATE, AudioClip
from .errors import ConfigError, RateMismatchError

CHANNELS = ("left", "right")
NOISE_FALLBACK_RMS = 10.0 ** (-40.0 / 20.0)  # reference for all-zero sources: -40 dBFS
_NOISE_TAG = 0x6E6F6973
_RIR_TAG = 0x72697200


@dataclass(frozen=True)
class SessionReport:
    recording: AudioClip
    overrun_lost: int = 0
    underrun_lost: int = 0

    def __post_init__(self):
        if self.overrun_lost < 0 or self.underrun_lost < 0:
            raise ValueError("loss counters must be non-negative")

    @property
    def clean(self):
        return self.overrun_lost == 0 and self.underrun_lost == 0


class Session(Protocol):
    def play_record_single(self, source: AudioClip, channel: str = "left") -> SessionReport: ...

    def play_record_dual(self, left: AudioClip, right: AudioClip) -> SessionReport: ...


@dataclass(frozen=True)
class ChannelModel:
    """Static two-loudspeaker / one-microphone geometry and capture impairments.

    Sources sit at (-spacing/2, 0) and (+spacing/2, 0); the microphone at
    (0, mic_distance_m). ``noise_snr_db`` is relative to the RMS of the
    clean wet signal (``None`` disables noise). ``tail_level`` is the
    starting amplitude of the diffuse reverberant tail, which does not
    depend on distance.
    """

    mic_distance_m: float = 2.0
    source_spacing_m: float = 0.5
    reverb_rt60_s: float = 0.0
    noise_snr_db: Optional[float] = None
    nonlinearity_drive: float = 0.0
    seed: int = 0
    speed_of_sound: float = 343.0
    tail_level: float = 0.05
    sample_rate: int = WORKING_RATE

    def __post_init__(self):
        if not self.mic_distance_m > 0:
            raise ValueError(f"mic_distance_m must be > 0, got {self.mic_distance_m}")
        if self.reverb_rt60_s < 0:
            raise ValueError(f"reverb_rt60_s must be >= 0, got {self.reverb_rt60_s}")
        if self.source_spacing_m < 0 or self.nonlinearity_drive < 0 or self.tail_level < 0:
            raise ValueError("spacing, drive and tail level must be non-negative")
        if self.speed_of_sound <= 0 or self.sample_rate <= 0:
            raise ValueError("speed_of_sound and sample_rate must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def source_distance(self, which):
        x = self.source_spacing_m / 2.0 * (-1.0 if which == "left" else 1.0)
        return math.hypot(x, self.mic_distance_m)

    # key = value config files --------------------------------------------

    _CONFIG_KEYS = {
        "mic_distance_m": float,
        "source_spacing_m": float,
        "reverb_rt60_s": float,
        "noise_snr_db": "optional_float",
        "nonlinearity_drive": float,
        "seed": int,
        "speed_of_sound": float,
        "tail_level": float,
        "sample_rate": int,
    }

    @classmethod
    def config_keys(cls):
        return tuple(cls._CONFIG_KEYS)

    @classmethod
    def coerce(cls, key, raw):
        kind = cls._CONFIG_KEYS.get(key)
        if kind is None:
            raise ConfigError(f"unknown channel key {key!r}")
        try:
            if kind == "optional_float":
                return None if str(raw).strip().lower() in ("", "none", "off") else float(raw)
            return kind(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None

    @classmethod
    def from_mapping(cls, values):
        kwargs = {k: cls.coerce(k, v) for k, v in values.items()}
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")))

    def to_config_text(self):
        lines = []
        for key in self._CONFIG_KEYS:
            value = getattr(self, key)
            lines.append(f"{key} = {'off' if value is None else value}")
        return "\n".join(lines) + "\n"

    def snapshot(self):
        return " ".join(line.replace(" = ", "=") for line in self.to_config_text().splitlines())



def parse_config_text(text):
    """``key = value`` lines; blank lines and ``#`` comments ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


# ------------------------------------------------------------------- RIRs


def direct_delay(distance_m, model: ChannelModel):
    return int(math.floor(distance_m / model.speed_of_sound * model.sample_rate + 0.5))


def direct_amplitude(distance_m):
    return 1.0 / max(distance_m, 0.1)


def generate_rir(distance_m, model: ChannelModel, which="left") -> np.ndarray:
    """Direct-path tap (1/d at the propagation delay) plus a seeded noise tail
    decaying by 60 dB over ``reverb_rt60_s``."""
    if not distance_m > 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    if which not in CHANNELS:
        raise ValueError(f"which must be one of {CHANNELS}")
    delay = direct_delay(distance_m, model)
    rt60 = model.reverb_rt60_s
    tail_n = int(math.ceil(rt60 * model.sample_rate)) if rt60 > 0 else 0
    h = np.zeros(delay + 1 + tail_n)
    h[delay] = direct_amplitude(distance_m)
    if tail_n and model.tail_level > 0:
        ss = np.random.SeedSequence([model.seed, _RIR_TAG, CHANNELS.index(which),
                                     int(round(distance_m * 1e6))])
        k = np.arange(1, tail_n + 1)
        with np.errstate(over="ignore"):  # vanishing rt60: the tail is all zero
            envelope = model.tail_level * 10.0 ** (-3.0 * k / (rt60 * model.sample_rate))
        h[delay + 1:] = envelope * np.random.default_rng(ss).standard_normal(tail_n)
    return h


def soft_clip(x, drive):
    """Cubic soft clipper ``x - drive*x**3``, flat beyond its turning point."""
    if drive <= 0:
        return x
    knee = 1.0 / math.sqrt(3.0 * drive)
    ceiling = knee - drive * knee ** 3
    return np.where(np.abs(x) <= knee, x - drive * x ** 3, np.sign(x) * ceiling)


def add_noise(wet, model: ChannelModel, noise_key=(0,)):
    if model.noise_snr_db is None:
        return wet
    ref = math.sqrt(float(np.mean(wet * wet))) if wet.size else 0.0
    if ref == 0.0:
        ref = NOISE_FALLBACK_RMS
    target = ref * 10.0 ** (-model.noise_snr_db / 20.0)
    rng = np.random.default_rng(np.random.SeedSequence([model.seed, _NOISE_TAG, *noise_key]))
    g = rng.standard_normal(wet.shape[0])
    g *= target / math.sqrt(float(np.mean(g * g)))
    return wet + g


def _check_rate(clip, model):
    if clip.sample_rate != model.sample_rate:
        raise RateMismatchError(
            f"source at {clip.sample_rate} Hz, channel model at {model.sample_rate} Hz")


def model_rirs(model: ChannelModel):
    return tuple(generate_rir(model.source_distance(w), model, w) for w in CHANNELS)


def _finish(wet, model, noise_key):
    out = add_noise(soft_clip(wet, model.nonlinearity_drive), model, noise_key)
    return SessionReport(AudioClip(out, model.sample_rate))


def simulate_single(source: AudioClip, model: ChannelModel, channel="left", noise_key=(0,), rir=None):
    _check_rate(source, model)
    h = generate_rir(model.source_distance(channel), model, channel) if rir is None else np.asarray(rir)
    return _finish(kernels.convolve_direct(source.samples, h), model, noise_key)


def simulate_dual(left: AudioClip, right: AudioClip, model: ChannelModel, noise_key=(0,), rirs=None):
    _check_rate(left, model)
    _check_rate(right, model)
    h_l, h_r = model_rirs(model) if rirs is None else (np.asarray(r) for r in rirs)
    n = max(len(left), len(right))
    wet_l = kernels.convolve_direct(left.padded(n).samples, h_l)
    wet_r = kernels.convolve_direct(right.padded(n).samples, h_r)
    m = max(wet_l.shape[0], wet_r.shape[0])
    wet = np.zeros(m)
    wet[: wet_l.shape[0]] += wet_l
    wet[: wet_r.shape[0]] += wet_r
    return _finish(wet, model, noise_key)


class SimulatedSession:
    """Session backed by the channel simulator.

    Every call draws a fresh noise realization keyed by (entry, call index),
    so runs are reproducible and entries are independent of each other.
    """

    def __init__(self, model: ChannelModel, entry=0):
        self.model = model
        self.entry = entry
        self.calls = 0
        self._rirs = model_rirs(model)

    def for_entry(self, entry):
        return SimulatedSession(self.model, entry)

    def _key(self):
        self.calls += 1
        return (self.entry, self.calls)

    def play_record_single(self, source, channel="left"):
        rir = self._rirs[CHANNELS.index(channel)]
        return simulate_single(source, self.model, channel, self._key(), rir=rir)

    def play_record_dual(self, left, right):
        return simulate_dual(left, right, self.model, self._key(), rirs=self._rirs)


# ------------------------------------------------------------------ fakes


@dataclass(frozen=True)
class FaultSpec:
    """Fault on a 1-based global attempt index; ``attempt=None`` faults every call."""

    kind: str
    attempt: Optional[int] = None
    lost: int = 64

    def __post_init__(self):
        if self.kind not in ("overrun", "underrun"):
            raise ValueError(f"fault kind must be overrun or underrun, got {self.kind!r}")
        if self.attempt is not None and self.attempt < 1:
            raise ValueError("attempt indices are 1-based")
        if self.lost < 1:
            raise ValueError("a fault must lose at least one sample")


def parse_schedule(text):
    """``overrun@1,underrun@3,overrun@*`` (optionally ``kind@n:lost``)."""
    specs = []
    for item in filter(None, (p.strip() for p in (text or "").split(","))):
        try:
            kind, _, where = item.partition("@")
            where, _, lost = where.partition(":")
            attempt = None if where == "*" else int(where)
            specs.append(FaultSpec(kind.strip(), attempt, int(lost) if lost else 64))
        except ValueError as exc:
            raise ConfigError(f"bad fault spec {item!r}: {exc}") from None
    return specs


@dataclass
class FakeSession:
    """Pass-through session that reports scheduled overruns/underruns.

    Faulty calls also corrupt the capture (dropped or silenced samples), so
    persisting one by mistake is detectable.
    """

    schedule: list = field(default_factory=list)
    attempts: int = 0
    log: list = field(default_factory=list)

    def _report(self, samples, rate):
        self.attempts += 1
        over = under = 0
        for spec in self.schedule:
            if spec.attempt is None or spec.attempt == self.attempts:
                if spec.kind == "overrun":
                    over += spec.lost
                else:
                    under += spec.lost
        samples = samples.copy()
        mid = samples.shape[0] // 2
        if under:
            samples[mid:mid + under] = 0.0
        if over:
            kept = np.delete(samples, np.s_[mid:mid + over])
            samples = np.concatenate([kept, np.zeros(samples.shape[0] - kept.shape[0])])
        report = SessionReport(AudioClip(samples, rate), over, under)
        self.log.append(report.clean)
        return report

    def play_record_single(self, source, channel="left"):
        return self._report(source.samples, source.sample_rate)

    def play_record_dual(self, left, right):
        if left.sample_rate != right.sample_rate:
            raise RateMismatchError("dual sources must share a sample rate")
        n = max(len(left), len(right))
        return self._report(left.padded(n).samples + right.padded(n).samples, left.sample_rate)


def fake_session(schedule=()):
    if isinstance(schedule, str):
        schedule = parse_schedule(schedule)
    return FakeSession(list(schedule))
