"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workloads are sized like one plan entry: a 3 s source through a 0.3 s
reverberant RIR, a 16 -> 8 kHz resample, and a GMM E-step over the T-F
bins of a 3 s mixture.
"""
import argparse
import timeit

import numpy as np

from mixforge import _fallback
from mixforge.audio import polyphase_table, resampled_length
from mixforge.channel import ChannelModel, generate_rir

try:
    from mixforge import _ext
except ImportError:
    _ext = None


def workloads(rng):
    x = rng.standard_normal(24000)
    h = generate_rir(2.0, ChannelModel(reverb_rt60_s=0.3))
    src = rng.standard_normal(48000)
    up, down = 1, 2
    table = polyphase_table(up, down)
    out_len = resampled_length(src.size, 16000, 8000)
    feats = rng.standard_normal((129 * 380, 6))
    means = rng.standard_normal((2, 6))
    variances = rng.uniform(0.5, 2.0, (2, 6))
    return {
        "convolve_direct": lambda k: k.convolve_direct(x, h),
        "polyphase_resample": lambda k: k.polyphase_resample(src, table, up, down, out_len),
        "diag_gauss_logpdf": lambda k: k.diag_gauss_logpdf(feats, means, variances),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("cython", _ext)] if _ext is not None else [])
    if _ext is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<20} {'backend':<8} {'best ms':>9} {'speedup':>8}")
    for name, run in workloads(np.random.default_rng(0)).items():
        base = None
        outs = []
        for label, impl in backends:
            best = min(timeit.repeat(lambda: run(impl), number=1, repeat=args.repeat)) * 1e3
            base = base or best
            outs.append(run(impl))
            print(f"{name:<20} {label:<8} {best:9.2f} {base / best:7.1f}x")
        if len(outs) == 2:
            print(f"{'':<20} max |diff| {np.max(np.abs(outs[0] - outs[1])):.1e}")


if __name__ == "__main__":
    main()
