"""Dataset construction: ground truths and mixtures through a Session.

For every plan entry the two sources are resampled to the working rate and
gain-scaled, then recorded one after another: speaker 1 alone (left
channel), speaker 2 alone (right channel), both together. Each recording is
retried until the session reports no overrun/underrun, at most
``max_attempts`` times. An entry whose retries run out is marked failed and
nothing is written for it; files of successful entries are written only
once all three recordings are clean.

Layout under ``out_root``::

    GTS/<mixture_name>__s1.wav
    GTS/<mixture_name>__s2.wav
    RealMix/<mixture_name>.wav
    manifest.tsv
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audio import WORKING_RATE, AudioClip, read_wav, resample, write_wav
from .errors import ManifestError, RateMismatchError
from .metrics import db_to_gain, mix_synthetic

log = logging.getLogger(__name__)

MANIFEST_HEADER = "# mixforge-manifest v1"
MANIFEST_NAME = "manifest.tsv"
GTS_DIR = "GTS"
MIX_DIR = "RealMix"
DEFAULT_MAX_ATTEMPTS = 5
_NO_PATH = "-"


@dataclass
class ManifestEntry:
    mixture_name: str
    gts1_path: str
    gts2_path: str
    mix_path: str
    attempts_gts1: int
    attempts_gts2: int
    attempts_mix: int
    status: str

    @property
    def ok(self):
        return self.status == "ok"

    def to_line(self):
        return "\t".join(str(v) for v in (
            self.mixture_name, self.gts1_path, self.gts2_path, self.mix_path,
            self.attempts_gts1, self.attempts_gts2, self.attempts_mix, self.status))

    @classmethod
    def from_line(cls, line):
        parts = line.split("\t")
        if len(parts) != 8:
            raise ManifestError(f"manifest line has {len(parts)} fields, expected 8: {line!r}")
        try:
            a1, a2, am = (int(x) for x in parts[4:7])
        except ValueError:
            raise ManifestError(f"non-integer attempt count in {line!r}") from None
        if parts[7] not in ("ok", "failed"):
            raise ManifestError(f"bad status {parts[7]!r}")
        return cls(*parts[:4], a1, a2, am, parts[7])


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    channel_config_snapshot: str = ""
    plan_seed: int = 0

    def to_text(self):
        lines = [MANIFEST_HEADER, f"# plan_seed={self.plan_seed}",
                 f"# channel={self.channel_config_snapshot}"]
        lines += [e.to_line() for e in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.splitlines()
        if not lines or lines[0] != MANIFEST_HEADER:
            raise ManifestError("missing manifest header")
        manifest = cls()
        for line in lines[1:]:
            if line.startswith("# plan_seed="):
                manifest.plan_seed = int(line.split("=", 1)[1])
            elif line.startswith("# channel="):
                manifest.channel_config_snapshot = line.split("=", 1)[1]
            elif line.strip() and not line.startswith("#"):
                manifest.entries.append(ManifestEntry.from_line(line))
        return manifest

    def save(self, out_root):
        (Path(out_root) / MANIFEST_NAME).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, out_root):
        path = Path(out_root) / MANIFEST_NAME
        if not path.is_file():
            raise ManifestError(f"no manifest at {path}")
        return cls.from_text(path.read_text(encoding="utf-8"))

    @property
    def ok_entries(self):
        return [e for e in self.entries if e.ok]


def trim_align(gts1: AudioClip, gts2: AudioClip, mix: AudioClip):
    """Zero-pad all three clips at the tail to their common maximum length."""
    rates = {gts1.sample_rate, gts2.sample_rate, mix.sample_rate}
    if len(rates) != 1:
        raise RateMismatchError(f"clips have different sample rates: {sorted(rates)}")
    n = max(len(gts1), len(gts2), len(mix))
    return gts1.padded(n), gts2.padded(n), mix.padded(n)


def load_sources(entry, working_rate=WORKING_RATE):
    """Read, resample and gain-scale the two sources of a plan entry."""
    left = resample(read_wav(entry.left.path), working_rate)
    right = resample(read_wav(entry.right.path), working_rate)
    return left.scaled(db_to_gain(entry.gain_left_db)), right.scaled(db_to_gain(entry.gain_right_db))


def record_until_clean(call, max_attempts):
    """Retry ``call`` until its report is clean. Returns ``(report or None, attempts)``."""
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        report = call()
        if report.clean:
            return report, attempts
        log.info("faulty capture (overrun=%d, underrun=%d), retrying",
                 report.overrun_lost, report.underrun_lost)
    return None, attempts


def _entry_paths(name):
    return (f"{GTS_DIR}/{name}__s1.wav", f"{GTS_DIR}/{name}__s2.wav", f"{MIX_DIR}/{name}.wav")


def _record_entry(entry, session, max_attempts, working_rate, synthetic):
    name = entry.mixture_name
    s1, s2 = load_sources(entry, working_rate)
    if synthetic:
        clips = (s1, s2, mix_synthetic(s1, s2))
        attempts = [1, 1, 1]
    else:
        calls = (lambda: session.play_record_single(s1, "left"),
                 lambda: session.play_record_single(s2, "right"),
                 lambda: session.play_record_dual(s1, s2))
        clips, attempts = [], [0, 0, 0]
        for k, call in enumerate(calls):
            report, attempts[k] = record_until_clean(call, max_attempts)
            if report is None:
                log.warning("%s: recording %d failed after %d attempts", name, k + 1, attempts[k])
                return ManifestEntry(name, _NO_PATH, _NO_PATH, _NO_PATH, *attempts, "failed"), None
            clips.append(report.recording)
    paths = _entry_paths(name)
    return ManifestEntry(name, *paths, *attempts, "ok"), clips


def _snapshot(session, synthetic):
    if synthetic:
        return "synthetic"
    model = getattr(session, "model", None)
    return model.snapshot() if model is not None else type(session).__name__


def build_dataset(plan, session, out_root, max_attempts=DEFAULT_MAX_ATTEMPTS,
                  working_rate=WORKING_RATE, jobs=1, synthetic=False):
    """Record every plan entry through ``session`` and persist the dataset.

    Sessions exposing ``for_entry(index)`` (the simulator) get an
    independent per-entry session, which makes results independent of
    ``jobs``; other sessions are driven strictly sequentially.
    """
    if len(plan) == 0:
        raise ValueError("plan is empty")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    out_root = Path(out_root)
    for sub in (GTS_DIR, MIX_DIR):
        d = out_root / sub
        d.mkdir(parents=True, exist_ok=True)
        if any(d.iterdir()):
            raise ManifestError(f"{d} is not empty; refusing to mix datasets")
    names = [e.mixture_name for e in plan]
    if len(set(names)) != len(names):
        raise ManifestError("plan contains duplicate mixture names")

    forkable = hasattr(session, "for_entry")

    def run(indexed):
        idx, entry = indexed
        sess = session.for_entry(idx) if forkable else session
        return _record_entry(entry, sess, max_attempts, working_rate, synthetic)

    items = list(enumerate(plan.entries))
    if jobs > 1 and forkable and not synthetic:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]

    manifest = DatasetManifest(channel_config_snapshot=_snapshot(session, synthetic),
                               plan_seed=plan.seed)
    for entry, clips in results:
        if clips is not None:
            for rel, clip in zip((entry.gts1_path, entry.gts2_path, entry.mix_path), clips):
                write_wav(clip, out_root / rel)
        manifest.entries.append(entry)
    manifest.save(out_root)
    return manifest


def load_entry(out_root, entry: ManifestEntry):
    root = Path(out_root)
    return tuple(read_wav(root / p) for p in (entry.gts1_path, entry.gts2_path, entry.mix_path))


def check_consistency(out_root, manifest: DatasetManifest):
    """Problems found between manifest and filesystem (empty list when consistent)."""
    root = Path(out_root)
    problems = []
    referenced = {}
    for e in manifest.entries:
        if not e.ok:
            continue
        for rel in (e.gts1_path, e.gts2_path, e.mix_path):
            referenced[rel] = referenced.get(rel, 0) + 1
            if not (root / rel).is_file():
                problems.append(f"missing {rel}")
    for sub in (GTS_DIR, MIX_DIR):
        for f in sorted((root / sub).glob("*")):
            rel = f"{sub}/{f.name}"
            if referenced.get(rel, 0) != 1:
                problems.append(f"{rel} referenced {referenced.get(rel, 0)} times")
    return problems
