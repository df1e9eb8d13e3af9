"""Dataset-level ground-truth validation and the microphone-distance sweep."""
from __future__ import annotations

import csv
import io
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .audio import write_wav
from .channel import CHANNELS, SimulatedSession, direct_amplitude, direct_delay
from .errors import ManifestError
from .masks import MASK_KINDS, validate_ground_truths
from .metrics import pesq_external, si_sdr
from .pipeline import DatasetManifest, build_dataset, load_entry, load_sources, trim_align

VALIDATION_HEADER = ["mixture_name", "mask", "speaker", "si_sdr_db", "pesq"]
SWEEP_HEADER = ["distance_m", "mask", "mean_si_sdr_db", "mean_pesq", "n",
                "baseline_si_sdr_db", "direct_path_energy"]
UNPROCESSED = "mix"
AGGREGATE_NAME = "ALL"


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def parse_kinds(text):
    kinds = [k.strip().lower() for k in text.split(",") if k.strip()]
    for k in kinds:
        if k not in MASK_KINDS and k != UNPROCESSED:
            raise ValueError(f"unknown mask kind {k!r}; choose from {MASK_KINDS + (UNPROCESSED,)}")
    if not kinds:
        raise ValueError("no mask kinds given")
    return kinds


def make_pesq_hook(command_template):
    """Adapt ``pesq_external`` to clip arguments via temporary wav files."""
    if not command_template:
        return None

    def hook(reference, estimate):
        with tempfile.TemporaryDirectory(prefix="mixforge-pesq-") as tmp:
            ref_path, deg_path = Path(tmp) / "ref.wav", Path(tmp) / "deg.wav"
            write_wav(reference, ref_path)
            write_wav(estimate, deg_path)
            return pesq_external(ref_path, deg_path, command_template)

    return hook


@dataclass(frozen=True)
class ScoreRow:
    mixture_name: str
    mask: str
    speaker: str
    si_sdr_db: float
    pesq: Optional[float] = None

    def as_csv(self):
        return [self.mixture_name, self.mask, self.speaker, _fmt(self.si_sdr_db), _fmt(self.pesq)]


def score_entry(name, gts1, gts2, mix, kinds, pesq_hook=None):
    gts1, gts2, mix = trim_align(gts1, gts2, mix)
    rows = []
    for kind in kinds:
        if kind == UNPROCESSED:
            scores = (si_sdr(gts1, mix), si_sdr(gts2, mix))
            pesq = tuple(pesq_hook(g, mix) for g in (gts1, gts2)) if pesq_hook else (None, None)
        else:
            rec = validate_ground_truths(gts1, gts2, mix, kind, pesq_hook)
            scores, pesq = rec.si_sdr_db, rec.pesq or (None, None)
        rows += [ScoreRow(name, kind, str(i + 1), scores[i], pesq[i]) for i in range(2)]
    return rows


def validate_dataset(dataset_dir, kinds=("wfm",), pesq_cmd=None, jobs=1):
    manifest = DatasetManifest.load(dataset_dir)
    entries = manifest.ok_entries
    if not entries:
        raise ManifestError(f"{dataset_dir}: no successfully recorded entries")
    hook = make_pesq_hook(pesq_cmd)

    def run(entry):
        return score_entry(entry.mixture_name, *load_entry(dataset_dir, entry), kinds, hook)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(run, entries))
    else:
        chunks = [run(e) for e in entries]
    return [row for chunk in chunks for row in chunk]


def aggregate(rows, kinds):
    """Mean SI-SDR / PESQ over all mixtures and speakers, one row per kind."""
    out = []
    for kind in kinds:
        sel = [r for r in rows if r.mask == kind]
        pesq = [r.pesq for r in sel if r.pesq is not None]
        out.append(ScoreRow(AGGREGATE_NAME, kind, "mean",
                            float(np.mean([r.si_sdr_db for r in sel])),
                            float(np.mean(pesq)) if pesq else None))
    return out


def validation_csv(rows, kinds):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VALIDATION_HEADER)
    for r in list(rows) + aggregate(rows, kinds):
        w.writerow(r.as_csv())
    return buf.getvalue()


# ------------------------------------------------------------------ sweep


@dataclass(frozen=True)
class SweepRow:
    distance_m: float
    mask: str
    mean_si_sdr_db: float
    mean_pesq: Optional[float]
    n: int
    baseline_si_sdr_db: float
    direct_path_energy: float

    def as_csv(self):
        return [f"{self.distance_m:g}", self.mask, _fmt(self.mean_si_sdr_db), _fmt(self.mean_pesq),
                str(self.n), _fmt(self.baseline_si_sdr_db), f"{self.direct_path_energy:.9f}"]


def direct_path_energy(model):
    return float(np.mean([direct_amplitude(model.source_distance(w)) ** 2 for w in CHANNELS]))


def dry_baseline(plan_entry, mix, model, working_rate):
    """Mean SI-SDR of the unprocessed mixture against each rendered source,
    delayed by its direct-path propagation time."""
    scores = []
    for src, which in zip(load_sources(plan_entry, working_rate), CHANNELS):
        delay = direct_delay(model.source_distance(which), model)
        ref = np.zeros(len(mix))
        n = min(len(src), len(mix) - delay)
        ref[delay:delay + n] = src.samples[:n]
        scores.append(si_sdr(ref, mix.samples))
    return float(np.mean(scores))


def parse_distances(text):
    try:
        dists = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"bad distance list {text!r}") from None
    if not dists or any(d <= 0 for d in dists) or len(set(dists)) != len(dists):
        raise ValueError("distances must be positive and distinct")
    return sorted(dists)


def run_sweep(plan, model, distances, kinds, out_dir, max_attempts=5, jobs=1,
              pesq_cmd=None, working_rate=8000):
    """Rebuild the simulated set at every distance (only the distance changes)
    and aggregate oracle-mask scores. Rows are grouped by mask, distance ascending."""
    out_dir = Path(out_dir)
    per_kind = {k: [] for k in kinds}
    by_name = {e.mixture_name: e for e in plan}
    for d in sorted(distances):
        m = model.replace(mic_distance_m=d)
        ds = out_dir / f"d{d:g}m"
        build_dataset(plan, SimulatedSession(m), ds, max_attempts, working_rate, jobs)
        rows = validate_dataset(ds, kinds, pesq_cmd, jobs)
        manifest = DatasetManifest.load(ds)
        baselines = []
        for e in manifest.ok_entries:
            mix = load_entry(ds, e)[2]
            baselines.append(dry_baseline(by_name[e.mixture_name], mix, m, working_rate))
        n_mix = len(manifest.ok_entries)
        for agg in aggregate(rows, kinds):
            per_kind[agg.mask].append(SweepRow(d, agg.mask, agg.si_sdr_db, agg.pesq, n_mix,
                                               float(np.mean(baselines)), direct_path_energy(m)))
    return [row for k in kinds for row in per_kind[k]]


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()
