"""Numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ext`` module. The
convolution keeps the tap-major accumulation order of the compiled
kernel so both backends agree bit for bit.
"""
import numpy as np

TAPS = 64
_LEFT = TAPS // 2 - 1  # taps cover offsets -31 .. +32 around the anchor sample


def convolve_direct(x, h):
    x = np.ascontiguousarray(x, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    n = x.shape[0]
    y = np.zeros(n + h.shape[0] - 1)
    for k in np.flatnonzero(h):
        y[k:k + n] += h[k] * x
    return y


def polyphase_resample(x, table, up, down, out_len):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = np.arange(out_len, dtype=np.int64)
    anchor = (n * down) // up
    phase = (n * down) % up
    offsets = np.arange(-_LEFT, TAPS - _LEFT, dtype=np.int64)
    idx = anchor[:, None] + offsets[None, :]
    valid = (idx >= 0) & (idx < x.shape[0])
    gathered = np.where(valid, x[np.clip(idx, 0, max(x.shape[0] - 1, 0))], 0.0)
    return np.einsum("nj,nj->n", table[phase], gathered)


def diag_gauss_logpdf(X, means, variances):
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    const = -0.5 * (d * np.log(2.0 * np.pi) + np.log(variances).sum(axis=1))
    diff = X[:, None, :] - means[None, :, :]
    return const[None, :] - 0.5 * np.einsum("nkd,kd->nk", diff * diff, 1.0 / variances)
