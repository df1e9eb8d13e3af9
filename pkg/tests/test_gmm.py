import numpy as np
import pytest

from mixforge.audio import AudioClip
from mixforge.errors import DegenerateInputError, ShapeMismatchError
from mixforge.gmm import GmmModel, fit_em, peak_regions, responsibilities, separate_gmm, spectral_peaks
from mixforge.metrics import best_permutation
from mixforge.spectral import istft, stft


def two_clusters(rng, n=2000, sep=5.0):
    labels = rng.integers(0, 2, n)
    x = np.where(labels == 1, sep, -sep) + rng.standard_normal(n)
    return x[:, None], labels


def test_recovers_two_1d_clusters(rng):
    X, _ = two_clusters(rng)
    model, trace = fit_em(X, 2, seed=3)
    means = np.sort(model.means[:, 0])
    assert means[0] == pytest.approx(-5, abs=0.3) and means[1] == pytest.approx(5, abs=0.3)
    assert abs(model.weights.sum() - 1) <= 1e-12


def test_single_component_closed_form(rng):
    X = rng.standard_normal((500, 3)) * [1, 2, 3] + [1, -2, 0.5]
    model, trace = fit_em(X, 1, seed=0)
    np.testing.assert_allclose(model.means[0], X.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(model.variances[0], X.var(axis=0), atol=1e-12)
    assert model.weights[0] == 1.0


@pytest.mark.parametrize("seed", range(8))
def test_loglik_monotone(seed):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((150, 2)) * rng.uniform(0.3, 2, 2) + rng.uniform(-3, 3, 2)
                   for _ in range(3)])
    _, trace = fit_em(X, int(rng.integers(2, 5)), seed=seed, tol=0, max_iter=60)
    assert np.all(np.diff(trace) >= -1e-9)


def test_assignment_agreement_6_sigma(rng):
    X, labels = two_clusters(rng, n=3000, sep=3.0)  # means 6 sigma apart
    model, _ = fit_em(X, 2, seed=1)
    pred = responsibilities(model, X).argmax(axis=1)
    agree = max(np.mean(pred == labels), np.mean(pred != labels))
    assert agree >= 0.95


def test_deterministic(rng):
    X, _ = two_clusters(rng)
    a, ta = fit_em(X, 2, seed=9)
    b, tb = fit_em(X, 2, seed=9)
    assert ta == tb and np.array_equal(a.means, b.means)


def test_fit_errors():
    with pytest.raises(DegenerateInputError):
        fit_em(np.zeros((1, 2)), 2)
    with pytest.raises(ValueError):
        fit_em(np.array([[np.inf], [0.0]]), 1)


def test_responsibilities():
    far = GmmModel(np.array([0.5, 0.5]), np.array([[-10.0], [10.0]]), np.ones((2, 1)))
    r = responsibilities(far, np.array([[-10.0], [10.0]]))
    assert r[0, 0] > 0.99 and r[1, 1] > 0.99
    # oracle via direct density ratio
    x = 0.3
    p = np.exp(-0.5 * (x + 10) ** 2), np.exp(-0.5 * (x - 10) ** 2)
    assert responsibilities(far, np.array([[x]]))[0, 0] == pytest.approx(p[0] / sum(p), rel=1e-9)
    one = GmmModel(np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2)))
    assert np.all(responsibilities(one, np.random.default_rng(0).standard_normal((10, 2))) == 1.0)
    same = GmmModel(np.full(3, 1 / 3), np.zeros((3, 1)), np.ones((3, 1)))
    assert np.all(responsibilities(same, np.array([[0.2], [5.0]])) == 1 / 3)
    with pytest.raises(ShapeMismatchError):
        responsibilities(one, np.zeros((3, 3)))


def tones_mix(n=16000):
    t = np.arange(n) / 8000
    a = 0.3 * np.sin(2 * np.pi * 440 * t)
    b = 0.3 * np.sin(2 * np.pi * 2200 * t)
    return AudioClip(a, 8000), AudioClip(b, 8000), AudioClip(a + b, 8000)


def test_separate_disjoint_tones():
    a, b, mix = tones_mix()
    e1, e2 = separate_gmm(mix, seed=0)
    res, _ = best_permutation((a, b), (e1, e2))
    assert min(r.si_sdr_db for r in res) >= 10.0


def test_separate_sums_to_mixture(rng):
    mix = AudioClip(rng.uniform(-0.3, 0.3, 6000), 8000)
    e1, e2 = separate_gmm(mix, seed=4)
    ref = istft(stft(mix)).samples
    assert np.linalg.norm(e1.samples + e2.samples - ref) / np.linalg.norm(ref) < 1e-6


def test_separate_silent_and_deterministic():
    with pytest.raises(DegenerateInputError):
        separate_gmm(AudioClip(np.zeros(800), 8000))
    _, _, mix = tones_mix(8000)
    x1, x2 = separate_gmm(mix, seed=2)
    y1, y2 = separate_gmm(mix, seed=2)
    assert np.array_equal(x1.samples, y1.samples) and np.array_equal(x2.samples, y2.samples)


def test_peak_regions_nearest_peak():
    peaks = np.zeros((10, 3), dtype=bool)
    peaks[[2, 7], 0] = True
    peaks[5, 1] = True
    owner = peak_regions(peaks)
    assert owner[:, 0].tolist() == [2, 2, 2, 2, 2, 7, 7, 7, 7, 7]
    assert (owner[:, 1] == 5).all()
    assert (owner[:, 2] == -1).all()


def test_spectral_peaks_respects_floor():
    level = np.array([[-30.0], [-10.0], [-40.0], [0.0], [-5.0]])
    assert spectral_peaks(level, -20.0)[:, 0].tolist() == [False, True, False, True, False]
