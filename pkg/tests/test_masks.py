import numpy as np
import pytest

from mixforge.audio import AudioClip
from mixforge.errors import DegenerateInputError, ShapeMismatchError
from mixforge.masks import apply_and_reconstruct, ibm, irm, validate_ground_truths, wfm
from mixforge.metrics import mix_synthetic
from mixforge.spectral import istft, stft


def rand_spec(rng, shape=(129, 40)):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def tone(freq, n=8000, rate=8000, amp=0.3):
    return AudioClip(amp * np.sin(2 * np.pi * freq * np.arange(n) / rate), rate)


def test_ibm_basic_and_ties():
    a = np.array([[2.0, 1.0, 1.0, 0.0]])
    b = np.array([[1.0, 2.0, 1.0, 0.0]])
    m1, m2 = ibm(a, b)
    assert m1.values.tolist() == [[1, 0, 0, 0]]
    assert m2.values.tolist() == [[0, 1, 0, 0]]


def test_ibm_matches_elementwise_oracle(rng):
    s1, s2 = rand_spec(rng), rand_spec(rng)
    s2[3, 4] = s1[3, 4]  # exact tie
    m1, m2 = ibm(s1, s2)
    for f in range(s1.shape[0]):
        for t in range(s1.shape[1]):
            x, y = abs(s1[f, t]), abs(s2[f, t])
            assert m1.values[f, t] == (1.0 if x > y else 0.0)
            assert m2.values[f, t] == (1.0 if y > x else 0.0)
    assert m1.values[3, 4] == m2.values[3, 4] == 0.0


def test_irm_values():
    m1, m2 = irm(np.array([[3.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert m1.values[0, 0] == 0.75 and m2.values[0, 0] == 0.25
    assert m1.values[0, 1] == m2.values[0, 1] == 0.5


def test_wfm_values():
    m1, m2 = wfm(np.array([[3.0, 2.0, 0.0]]), np.array([[1.0, 2.0, 0.0]]))
    assert m1.values[0, 0] == pytest.approx(0.9, abs=1e-15)
    assert m1.values[0, 1] == m2.values[0, 1] == 0.5
    assert m1.values[0, 2] == 0.5


@pytest.mark.parametrize("fn", [irm, wfm])
def test_ratio_masks_sum_to_one(rng, fn):
    s1, s2 = rand_spec(rng), rand_spec(rng)
    s1[:5] = 0
    s2[:5] = 0
    m1, m2 = fn(s1, s2)
    assert np.max(np.abs(m1.values + m2.values - 1.0)) <= 1e-12
    assert m1.values.min() >= 0 and m1.values.max() <= 1


def test_wfm_sharper_than_irm(rng):
    s1, s2 = rand_spec(rng), rand_spec(rng)
    w1, _ = wfm(s1, s2)
    r1, _ = irm(s1, s2)
    x, y = np.abs(s1), np.abs(s2)
    oracle_w = x ** 2 / (x ** 2 + y ** 2)
    oracle_r = x / (x + y)
    np.testing.assert_allclose(w1.values, oracle_w, atol=1e-12)
    np.testing.assert_allclose(r1.values, oracle_r, atol=1e-12)
    hi = r1.values >= 0.5
    assert np.all(w1.values[hi] >= r1.values[hi] - 1e-15)
    assert np.all(w1.values[~hi] <= r1.values[~hi] + 1e-15)


def test_shape_mismatch(rng):
    with pytest.raises(ShapeMismatchError):
        ibm(rand_spec(rng, (3, 4)), rand_spec(rng, (3, 5)))


def test_apply_identity_zero_and_complement(rng):
    mix = stft(AudioClip(rng.uniform(-0.5, 0.5, 4000), 8000))
    ones = np.ones(mix.shape)
    ref = istft(mix).samples
    np.testing.assert_allclose(apply_and_reconstruct(mix, ones).samples, ref, atol=1e-9)
    assert not np.any(apply_and_reconstruct(mix, np.zeros(mix.shape)).samples)
    s1 = stft(AudioClip(rng.standard_normal(4000), 8000))
    m1, m2 = irm(s1, mix)
    total = apply_and_reconstruct(mix, m1).samples + apply_and_reconstruct(mix, m2).samples
    assert np.linalg.norm(total - ref) / np.linalg.norm(ref) < 1e-6
    with pytest.raises(ShapeMismatchError):
        apply_and_reconstruct(mix, np.ones((2, 2)))


@pytest.mark.parametrize("kind", ["ibm", "irm", "wfm"])
def test_disjoint_tones_near_perfect(kind):
    g1, g2 = tone(500), tone(2500)
    rec = validate_ground_truths(g1, g2, mix_synthetic(g1, g2), kind)
    assert min(rec.si_sdr_db) >= 30.0


def test_validation_degenerate_and_pesq_hook():
    g1, g2 = tone(500), tone(2500)
    with pytest.raises(DegenerateInputError):
        validate_ground_truths(g1, AudioClip(np.zeros(8000), 8000), g1)
    rec = validate_ground_truths(g1, g2, mix_synthetic(g1, g2), "wfm", pesq_hook=lambda r, e: 3.2)
    assert rec.pesq == (3.2, 3.2)
    with pytest.raises(ShapeMismatchError):
        validate_ground_truths(g1, tone(2500, n=100), g1)
