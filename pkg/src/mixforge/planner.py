"""Corpus scanning and two-speaker mixture planning.

Corpus layout is TIMIT-like: ``root/<dialect>/<speaker>/<sentence>.wav``.
Each file is known by its canonical name ``<dialect>_<speaker>_<sentence>``.

The planner is a greedy round-robin: speakers are visited in an order that
interleaves dialects, each visited speaker contributes a left file, and the
right file is the feasible candidate closest in length (seeded tie-break).
Feasible means: different speaker, different sentence id, speaker under its
usage cap, pair not already planned, and, when any candidate allows it,
duration ratio within ``max_len_ratio``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .audio import WORKING_RATE, resampled_length, wav_info
from .errors import CorpusError, InfeasiblePlanError, WavError

PLAN_HEADER = "# mixforge-plan v1"
DEFAULT_MAX_LEN_RATIO = 1.5
DEFAULT_MAX_USES = 4


@dataclass(frozen=True)
class SourceFile:
    dialect: str
    speaker_id: str
    sentence_id: str
    path: str
    duration: int
    gender: Optional[str] = None

    @property
    def canonical(self):
        return f"{self.dialect}_{self.speaker_id}_{self.sentence_id}"


@dataclass(frozen=True)
class PlanEntry:
    left: SourceFile
    right: SourceFile
    gain_left_db: float = 0.0
    gain_right_db: float = 0.0

    @property
    def mixture_name(self):
        return f"{self.left.canonical}__{self.right.canonical}"


@dataclass
class MixturePlan:
    entries: list = field(default_factory=list)
    seed: int = 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_text(self):
        lines = [f"{PLAN_HEADER} seed={self.seed}"]
        for e in self.entries:
            lines.append("\t".join([e.mixture_name, e.left.path, e.right.path,
                                    f"{e.gain_left_db:.6f}", f"{e.gain_right_db:.6f}"]))
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _gender(speaker_id):
    head = speaker_id[:1].upper()
    return head if head in ("F", "M") else None


def source_from_path(path, working_rate=WORKING_RATE):
    p = Path(path)
    if len(p.parts) < 3:
        raise CorpusError(f"{path}: expected <dialect>/<speaker>/<sentence>.wav")
    info = wav_info(p)
    return SourceFile(
        dialect=p.parent.parent.name,
        speaker_id=p.parent.name,
        sentence_id=p.stem,
        path=str(path),
        duration=resampled_length(info.n_frames, info.sample_rate, working_rate),
        gender=_gender(p.parent.name),
    )


def scan_corpus(root, working_rate=WORKING_RATE):
    """One ``SourceFile`` per wav under ``root/<dialect>/<speaker>/``, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    try:
        paths = sorted(p for p in root.glob("*/*/*") if p.is_file() and p.suffix.lower() == ".wav")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus tree {root}: {exc}") from exc
    if not paths:
        raise CorpusError(f"no wav files found under {root}")
    files, seen = [], {}
    for p in paths:
        try:
            sf = source_from_path(p, working_rate)
        except WavError as exc:
            raise CorpusError(str(exc)) from exc
        key = (sf.dialect, sf.speaker_id, sf.sentence_id)
        if key in seen:
            raise CorpusError(f"duplicate sentence {sf.canonical}: {seen[key]} and {p}")
        seen[key] = p
        files.append(sf)
    return files


def count_for_hours(files, hours):
    """Entry count whose mean planned length adds up to ``hours`` of audio."""
    if hours <= 0:
        raise ValueError("hours must be positive")
    mean_s = np.mean([f.duration for f in files]) / WORKING_RATE
    if mean_s <= 0:
        raise CorpusError("corpus files have zero duration")
    return max(1, math.ceil(round(hours * 3600.0 / mean_s, 9)))


def _round_robin(files, rng):
    """Speaker visiting order: one speaker per dialect per round."""
    by_dialect = {}
    for f in files:
        by_dialect.setdefault(f.dialect, set()).add(f.speaker_id)
    dialects = sorted(by_dialect)
    queues = {}
    for d in dialects:
        spk = sorted(by_dialect[d])
        queues[d] = [spk[i] for i in rng.permutation(len(spk))]
    order = []
    for r in range(max(len(q) for q in queues.values())):
        order.extend(queues[d][r] for d in dialects if r < len(queues[d]))
    return order


def build_mixture_list(files, count, seed=0, max_len_ratio=DEFAULT_MAX_LEN_RATIO,
                       max_uses_per_speaker=DEFAULT_MAX_USES, gain_jitter_db=0.0):
    if count < 1:
        raise ValueError("count must be >= 1")
    if max_uses_per_speaker < 1:
        raise ValueError("max_uses_per_speaker must be >= 1")
    files = sorted(files, key=lambda f: (f.dialect, f.speaker_id, f.sentence_id, f.path))
    speakers = sorted({f.speaker_id for f in files})
    if len(speakers) < 2:
        raise InfeasiblePlanError(
            "every pairing would mix a speaker with themself; need >= 2 speakers",
            "distinct_speakers")
    if 2 * count > len(speakers) * max_uses_per_speaker:
        raise InfeasiblePlanError(
            f"{count} mixtures need {2 * count} speaker slots, only "
            f"{len(speakers)} x {max_uses_per_speaker} available", "max_uses_per_speaker")

    rng = np.random.default_rng(seed)
    order = _round_robin(files, rng)
    n = len(files)
    tie = rng.random(n)
    spk_index = {s: k for k, s in enumerate(speakers)}
    spk_of = np.array([spk_index[f.speaker_id] for f in files])
    sentences = sorted({f.sentence_id for f in files})
    sent_index = {s: k for k, s in enumerate(sentences)}
    sent_of = np.array([sent_index[f.sentence_id] for f in files])
    dur = np.array([f.duration for f in files], dtype=np.float64)
    own = {s: [i for i in rng.permutation(n) if files[i].speaker_id == s] for s in speakers}
    cursor = {s: 0 for s in speakers}
    uses = np.zeros(len(speakers), dtype=np.int64)
    partners = [set() for _ in range(n)]

    def pick_partner(i):
        ok = (spk_of != spk_of[i]) & (uses[spk_of] < max_uses_per_speaker) & (sent_of != sent_of[i])
        if partners[i]:
            ok[list(partners[i])] = False
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            return None
        lo = np.minimum(dur[cand], dur[i])
        hi = np.maximum(dur[cand], dur[i])
        within = cand[(lo > 0) & (hi <= max_len_ratio * lo)]
        pool = within if within.size else cand
        gap = np.abs(dur[pool] - dur[i])
        return int(pool[np.lexsort((tie[pool], gap))[0]])

    pairs = []
    pos, idle = 0, 0
    while len(pairs) < count:
        if idle >= len(order):
            exhausted = int((uses >= max_uses_per_speaker).sum())
            constraint = ("max_uses_per_speaker" if exhausted >= len(speakers) - 1
                          else "unique_pairs")
            raise InfeasiblePlanError(
                f"only {len(pairs)} of {count} mixtures satisfy the constraints "
                f"(binding: {constraint})", constraint)
        spk = order[pos]
        pos = (pos + 1) % len(order)
        idle += 1
        s = spk_index[spk]
        if uses[s] >= max_uses_per_speaker:
            continue
        mine = own[spk]
        for step in range(len(mine)):
            i = mine[(cursor[spk] + step) % len(mine)]
            j = pick_partner(i)
            if j is None:
                continue
            cursor[spk] = (cursor[spk] + step + 1) % len(mine)
            uses[s] += 1
            uses[spk_of[j]] += 1
            partners[i].add(j)
            partners[j].add(i)
            pairs.append((i, j))
            idle = 0
            break

    jitter_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    entries = []
    for i, j in pairs:
        offset = float(jitter_rng.uniform(-gain_jitter_db, gain_jitter_db)) if gain_jitter_db > 0 else 0.0
        entries.append(PlanEntry(files[i], files[j], round(offset, 6), 0.0))
    return MixturePlan(entries, seed)


def parse_plan_text(text, working_rate=WORKING_RATE):
    lines = text.splitlines()
    if not lines or not lines[0].startswith(PLAN_HEADER):
        raise CorpusError("not a mixforge plan file (missing header)")
    seed = 0
    for tok in lines[0][len(PLAN_HEADER):].split():
        if tok.startswith("seed="):
            seed = int(tok[5:])
    cache, entries = {}, []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise CorpusError(f"plan line {lineno}: expected 5 tab-separated fields")
        name, lp, rp, gl, gr = parts
        for p in (lp, rp):
            if p not in cache:
                try:
                    cache[p] = source_from_path(p, working_rate)
                except WavError as exc:
                    raise CorpusError(f"plan line {lineno}: {exc}") from exc
        entry = PlanEntry(cache[lp], cache[rp], float(gl), float(gr))
        if entry.mixture_name != name:
            raise CorpusError(f"plan line {lineno}: name {name!r} does not match its files")
        entries.append(entry)
    return MixturePlan(entries, seed)


def load_plan(path, working_rate=WORKING_RATE):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"plan file not found: {path}")
    return parse_plan_text(path.read_text(encoding="utf-8"), working_rate)
