"""SI-SDR, instantaneous mixing, permutation resolution and the PESQ hook."""
from __future__ import annotations

import logging
import re
import shlex
import subprocess
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audio import AudioClip
from .errors import DegenerateInputError, RateMismatchError, ShapeMismatchError

log = logging.getLogger(__name__)

SI_SDR_CAP_DB = 120.0

_FLOAT_RE = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


@dataclass(frozen=True)
class EvalResult:
    si_sdr_db: float
    permutation: str = "identity"
    pesq: Optional[float] = None


def db_to_gain(db):
    return 10.0 ** (db / 20.0)


def mix_synthetic(s1: AudioClip, s2: AudioClip, gains_db=(0.0, 0.0)) -> AudioClip:
    """Sample-wise sum of two gain-scaled clips; the shorter one is zero-padded."""
    if s1.sample_rate != s2.sample_rate:
        raise RateMismatchError(f"{s1.sample_rate} Hz vs {s2.sample_rate} Hz")
    n = max(len(s1), len(s2))
    out = np.zeros(n)
    out[: len(s1)] += db_to_gain(gains_db[0]) * s1.samples
    out[: len(s2)] += db_to_gain(gains_db[1]) * s2.samples
    return AudioClip(out, s1.sample_rate)


def _as_array(x):
    return x.samples if isinstance(x, AudioClip) else np.asarray(x, dtype=np.float64)


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR in dB, capped at +120 dB.

    Both signals are mean-removed; the reference is rescaled by the
    optimal projection gain before measuring the residual.
    """
    ref = _as_array(reference)
    est = _as_array(estimate)
    if ref.shape != est.shape:
        raise ShapeMismatchError(f"length mismatch: {ref.shape[0]} vs {est.shape[0]}")
    raw_energy = np.dot(ref, ref)
    ref = ref - ref.mean()
    est = est - est.mean()
    ref_energy = np.dot(ref, ref)
    # a constant reference leaves only rounding residue after mean removal
    if ref_energy <= 1e-24 * raw_energy or ref_energy == 0.0:
        raise DegenerateInputError("reference is all-zero after mean removal")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    residual = target - est
    err = np.dot(residual, residual)
    if err == 0.0:
        return SI_SDR_CAP_DB
    sig = np.dot(target, target)
    if sig == 0.0:
        return -SI_SDR_CAP_DB
    return float(min(10.0 * np.log10(sig / err), SI_SDR_CAP_DB))


def best_permutation(references, estimates):
    """Score both reference/estimate assignments and keep the better mean.

    Returns ``((EvalResult, EvalResult), permutation)`` where the results are
    ordered like ``references``. Ties go to the identity assignment.
    """
    r1, r2 = references
    e1, e2 = estimates
    lengths = {len(_as_array(x)) for x in (r1, r2, e1, e2)}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"all signals must share one length, got {sorted(lengths)}")
    ident = (si_sdr(r1, e1), si_sdr(r2, e2))
    swap = (si_sdr(r1, e2), si_sdr(r2, e1))
    if sum(swap) > sum(ident):
        return (EvalResult(swap[0], "swapped"), EvalResult(swap[1], "swapped")), "swapped"
    return (EvalResult(ident[0], "identity"), EvalResult(ident[1], "identity")), "identity"


def parse_last_float(text):
    found = _FLOAT_RE.findall(text or "")
    return float(found[-1]) if found else None


def pesq_external(reference_path, estimate_path, command_template, timeout=120.0):
    """Run an external PESQ tool; ``None`` whenever no score can be obtained.

    ``command_template`` is split shell-style and each token formatted with
    ``{ref}`` and ``{deg}``. The last floating-point token on stdout wins.
    """
    try:
        argv = [tok.format(ref=str(reference_path), deg=str(estimate_path))
                for tok in shlex.split(command_template)]
    except (ValueError, KeyError, IndexError) as exc:
        log.warning("bad PESQ command template %r: %s", command_template, exc)
        return None
    if not argv:
        return None
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except (OSError, subprocess.SubprocessError) as exc:
        log.warning("PESQ tool unavailable: %s", exc)
        return None
    if proc.returncode != 0:
        log.warning("PESQ tool exited with %d", proc.returncode)
        return None
    return parse_last_float(proc.stdout)
