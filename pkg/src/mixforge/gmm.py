"""Diagonal-covariance Gaussian mixture EM and a clustering-based separator.

The separator stands in for an embedding network: each T-F bin of the
mixture gets a small handcrafted feature vector, a two-component GMM
clusters the bins, and the posterior responsibilities become soft masks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .audio import WORKING_RATE, AudioClip
from .errors import DegenerateInputError, ShapeMismatchError
from .masks import Mask, apply_and_reconstruct
from .spectral import stft

VAR_FLOOR = 1e-6
LOG_FLOOR_DB = -80.0
# EM is fitted on bins within this range of the loudest bin; quieter bins
# carry almost no energy and would otherwise form a "silence" cluster.
ACTIVE_RANGE_DB = 20.0
N_RESTARTS = 10
# separator features are discrete on the T-F grid; a tiny floor lets a
# component collapse onto one grid value
SEPARATOR_VAR_FLOOR = 1e-2


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def K(self):
        return self.weights.shape[0]

    @property
    def D(self):
        return self.means.shape[1]


def _log_joint(model, X):
    return kernels.diag_gauss_logpdf(X, model.means, model.variances) + np.log(model.weights)[None, :]


def _logsumexp_rows(a):
    peak = a.max(axis=1, keepdims=True)
    return (peak + np.log(np.exp(a - peak).sum(axis=1, keepdims=True)))[:, 0]


def responsibilities(model: GmmModel, features) -> np.ndarray:
    """Posterior component probabilities, one simplex row per point."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.D:
        raise ShapeMismatchError(f"features {X.shape} do not match model dimension {model.D}")
    lj = _log_joint(model, X)
    r = np.exp(lj - lj.max(axis=1, keepdims=True))
    return r / r.sum(axis=1, keepdims=True)


def _kmeanspp(X, K, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _m_step(X, resp, var_floor=VAR_FLOOR):
    nk = resp.sum(axis=0)
    nk_safe = np.maximum(nk, 1e-300)
    means = (resp.T @ X) / nk_safe[:, None]
    var = np.empty_like(means)
    for k in range(means.shape[0]):
        diff = X - means[k]
        var[k] = (resp[:, k:k + 1] * diff * diff).sum(axis=0) / nk_safe[k]
    weights = nk / nk.sum()
    return GmmModel(weights, means, np.maximum(var, max(var_floor, VAR_FLOOR)))


def fit_em(features, K, seed=0, tol=1e-8, max_iter=200, var_floor=VAR_FLOOR):
    """Fit a K-component diagonal GMM by EM from a k-means++ start.

    Returns ``(model, trace)``; ``trace[i]`` is the total log-likelihood of
    the parameters in force at iteration ``i``. ``var_floor`` may only
    raise the default floor.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ShapeMismatchError("features must be an N x D matrix with D >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if K < 1 or X.shape[0] < K:
        raise DegenerateInputError(f"need at least K={K} points, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, K, rng)
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((X.shape[0], K))
    resp[np.arange(X.shape[0]), d2.argmin(axis=1)] = 1.0
    model = _m_step(X, resp, var_floor)
    # empty initial clusters fall back to their k-means++ centre
    empty = resp.sum(axis=0) == 0
    if np.any(empty):
        means = model.means.copy()
        means[empty] = centers[empty]
        weights = np.maximum(model.weights, 1.0 / X.shape[0])
        model = GmmModel(weights / weights.sum(), means, model.variances)
    trace = []
    for _ in range(max_iter):
        lj = _log_joint(model, X)
        norm = _logsumexp_rows(lj)
        ll = float(norm.sum())
        trace.append(ll)
        if len(trace) > 1 and (trace[-1] - trace[-2]) < tol * abs(trace[-2]):
            break
        model = _m_step(X, np.exp(lj - norm[:, None]), var_floor)
    return model, trace


def tf_features(spec):
    """Per-bin features: floored log-magnitude, frequency and time position,
    3x3 neighbourhood mean log-magnitude. Returns ``(F*T, 4)`` and the dB map."""
    mag = spec.magnitude()
    peak = mag.max()
    if peak <= 0.0:
        raise DegenerateInputError("mixture is silent")
    with np.errstate(divide="ignore"):
        level = 20.0 * np.log10(mag / peak)
    level = np.maximum(level, LOG_FLOOR_DB)
    F, T = level.shape
    padded = np.pad(level, 1, mode="edge")
    neigh = sum(padded[i:i + F, j:j + T] for i in range(3) for j in range(3)) / 9.0
    fidx = np.broadcast_to((np.arange(F) / max(F - 1, 1))[:, None], (F, T))
    tidx = np.broadcast_to((np.arange(T) / max(T - 1, 1))[None, :], (F, T))
    feats = np.stack([level, fidx, tidx, neigh], axis=-1).reshape(F * T, 4)
    return feats, level


def spectral_peaks(level, floor_db):
    """Local maxima along frequency that lie within ``floor_db`` of the top bin."""
    peaks = np.zeros_like(level, dtype=bool)
    peaks[1:-1] = (level[1:-1] >= level[:-2]) & (level[1:-1] > level[2:])
    peaks[0] = level[0] > level[1]
    peaks[-1] = level[-1] > level[-2]
    return peaks & (level >= floor_db)


def peak_regions(peaks):
    """For every bin, the frequency index of the nearest peak in its frame
    (-1 for frames without peaks). Ties go to the lower peak."""
    F, T = peaks.shape
    owner = np.full((F, T), -1, dtype=np.int64)
    f = np.arange(F)
    for t in range(T):
        idx = np.flatnonzero(peaks[:, t])
        if idx.size == 1:
            owner[:, t] = idx[0]
        elif idx.size > 1:
            pos = np.clip(np.searchsorted(idx, f), 1, idx.size - 1)
            lo, hi = idx[pos - 1], idx[pos]
            owner[:, t] = np.where(f - lo <= hi - f, lo, hi)
    return owner


def separate_gmm(mix: AudioClip, K=2, seed=0, working_rate=WORKING_RATE, tol=1e-8, max_iter=200,
                 restarts=N_RESTARTS):
    """Split a mixture into two (unordered) estimates with GMM soft masks.

    EM runs on the spectral-peak bins of the active region (standardized
    features, best of ``restarts`` seeded fits by log-likelihood). Every bin
    then takes the posterior of the nearest peak in its frame, so a
    partial's skirt follows its peak; frames without an active peak use
    their own posterior.
    """
    if K != 2:
        raise ValueError("only two-speaker separation is supported")
    if len(mix) == 0 or not np.any(mix.samples):
        raise DegenerateInputError("mixture is silent")
    spec = stft(mix, working_rate)
    feats, level = tf_features(spec)
    F, T = level.shape
    peaks = spectral_peaks(level, -ACTIVE_RANGE_DB)
    active = peaks.reshape(-1)
    if active.sum() < 10 * K:
        active = np.ones(F * T, dtype=bool)
        peaks = np.ones((F, T), dtype=bool)
    train = feats[active]
    center = train.mean(axis=0)
    spread = np.maximum(train.std(axis=0), 1e-9)
    scaled = (feats - center) / spread
    best = None
    for r in range(restarts):
        model, trace = fit_em(scaled[active], K, seed=[seed, r], tol=tol, max_iter=max_iter,
                              var_floor=SEPARATOR_VAR_FLOOR)
        if best is None or trace[-1] > best[1]:
            best = (model, trace[-1])
    own = responsibilities(best[0], scaled).reshape(F, T, K)
    owner = peak_regions(peaks)
    cols = np.broadcast_to(np.arange(T)[None, :], (F, T))
    resp = np.where((owner >= 0)[..., None], own[np.maximum(owner, 0), cols], own)
    return tuple(apply_and_reconstruct(spec, Mask(resp[..., k], "soft")) for k in range(K))
