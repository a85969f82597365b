import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisecutmix import mix_labels, one_hot, sample_lambda, sample_mask
from noisecutmix.samplers import child_rng


def ks_uniform_statistic(samples):
    u = np.sort(samples)
    n = len(u)
    i = np.arange(1, n + 1)
    return max(np.max(i / n - u), np.max(u - (i - 1) / n))


# ---------------------------------------------------------------------------
# lambda sampling
# ---------------------------------------------------------------------------


def test_lambda_rejects_nonpositive_alpha():
    rng = child_rng(0, 0)
    with pytest.raises(ValueError):
        sample_lambda(0.0, rng)
    with pytest.raises(ValueError):
        sample_lambda(-1.0, rng)


def test_lambda_alpha_one_is_uniform():
    rng = child_rng(101, 0)
    draws = np.array([sample_lambda(1.0, rng) for _ in range(100_000)])
    assert ks_uniform_statistic(draws) < 0.01


@pytest.mark.parametrize("alpha", [0.2, 1.0, 5.0])
def test_lambda_symmetric_mean(alpha):
    rng = child_rng(55, 0)
    n = 100_000
    draws = np.array([sample_lambda(alpha, rng) for _ in range(n)])
    var = 1.0 / (4.0 * (2.0 * alpha + 1.0))
    assert abs(draws.mean() - 0.5) <= 3.0 * math.sqrt(var / n)


def test_lambda_variance_matches_beta_formula():
    rng = child_rng(56, 0)
    draws = np.array([sample_lambda(0.2, rng) for _ in range(100_000)])
    expected = 1.0 / (4.0 * (2.0 * 0.2 + 1.0))
    assert abs(draws.var() - expected) <= 0.05 * expected


def test_lambda_in_unit_interval_and_reproducible():
    d1 = [sample_lambda(0.5, child_rng(9, 0)) for _ in range(50)]
    d2 = [sample_lambda(0.5, child_rng(9, 0)) for _ in range(50)]
    assert d1 == d2
    assert all(0.0 <= v <= 1.0 for v in d1)


# ---------------------------------------------------------------------------
# mask sampling
# ---------------------------------------------------------------------------


def test_mask_lambda_one_is_all_ones():
    spec = sample_mask(8, 8, 1.0, child_rng(3, 0))
    assert spec.mask.all()
    assert spec.lambda_real == 1.0
    assert spec.rect[2] == 0.0 and spec.rect[3] == 0.0


def test_mask_rect_width_formula():
    # W sqrt(1 - 0.75) = 8 * 0.5 = 4
    spec = sample_mask(8, 8, 0.75, child_rng(4, 0))
    assert spec.rect[2] == 4.0
    assert spec.rect[3] == 4.0


def test_mask_rejects_bad_lambda():
    with pytest.raises(ValueError):
        sample_mask(8, 8, -0.1, child_rng(0, 0))
    with pytest.raises(ValueError):
        sample_mask(8, 8, 1.1, child_rng(0, 0))


def _expected_cut_fraction(width, height, lam):
    """Closed-form mean realized cut fraction for a center-anchored,
    border-clipped rectangle: per axis E[len] = (2cL - c^2)/L with
    c = half the cut size, valid while the cut fits the axis."""

    def axis(length):
        c = length * math.sqrt(1.0 - lam) / 2.0
        return (2.0 * c * length - c * c) / (length * length)

    return axis(width) * axis(height)


def test_mask_mean_cut_fraction_shrinks_under_clipping():
    # border clipping shrinks the realized cut below the nominal
    # 1 - lambda; the exact expectation for lambda = 0.5 on 16x16 is
    # 0.33885, frozen here from the closed-form oracle
    rng = child_rng(12, 0)
    fractions = [1.0 - sample_mask(16, 16, 0.5, rng).lambda_real for _ in range(10_000)]
    mean = float(np.mean(fractions))
    oracle = _expected_cut_fraction(16, 16, 0.5)
    assert abs(oracle - 0.33885) < 5e-4  # sanity-pin the oracle itself
    assert mean <= 0.5
    assert abs(mean - oracle) <= 0.012


def test_mask_lambda_real_exact_and_rectangular():
    rng = child_rng(21, 0)
    for _ in range(200):
        lam = sample_lambda(1.0, rng)
        spec = sample_mask(12, 9, lam, rng)
        zeros = int((spec.mask == 0).sum())
        assert spec.lambda_real == 1.0 - zeros / spec.mask.size
        assert_zero_region_is_one_rectangle(spec.mask)


def assert_zero_region_is_one_rectangle(mask):
    zero_rows = np.where((mask == 0).any(axis=1))[0]
    if zero_rows.size == 0:
        return
    assert np.array_equal(zero_rows, np.arange(zero_rows[0], zero_rows[-1] + 1))
    first = np.where(mask[zero_rows[0]] == 0)[0]
    assert np.array_equal(first, np.arange(first[0], first[-1] + 1))
    for r in zero_rows:
        assert np.array_equal(np.where(mask[r] == 0)[0], first)
    # rows outside the band hold no zeros
    others = np.setdiff1d(np.arange(mask.shape[0]), zero_rows)
    assert (mask[others] == 1).all()


@settings(max_examples=60, deadline=None)
@given(
    width=st.integers(4, 24),
    height=st.integers(4, 24),
    lam=st.floats(0.0, 1.0, allow_nan=False),
    seed=st.integers(0, 2**31 - 1),
)
def test_mask_properties_hold_for_any_draw(width, height, lam, seed):
    spec = sample_mask(width, height, lam, child_rng(seed, 0))
    zeros = int((spec.mask == 0).sum())
    assert spec.lambda_real == 1.0 - zeros / (width * height)
    assert_zero_region_is_one_rectangle(spec.mask)


def test_mask_bit_reproducible():
    a = sample_mask(16, 16, 0.4, child_rng(77, 0))
    b = sample_mask(16, 16, 0.4, child_rng(77, 0))
    assert np.array_equal(a.mask, b.mask)
    assert a.rect == b.rect and a.lambda_real == b.lambda_real


# ---------------------------------------------------------------------------
# soft labels
# ---------------------------------------------------------------------------


def test_mix_labels_arithmetic():
    assert np.allclose(mix_labels(0, 1, 0.3, 3), [0.3, 0.7, 0.0], atol=1e-15)


def test_mix_labels_degenerate():
    assert np.array_equal(mix_labels(0, 1, 1.0, 3), one_hot(0, 3))
    assert np.array_equal(mix_labels(2, 2, 0.37, 3), one_hot(2, 3))


def test_mix_labels_validation():
    with pytest.raises(ValueError):
        mix_labels(0, 3, 0.5, 3)
    with pytest.raises(ValueError):
        mix_labels(0, 1, 1.5, 3)


@settings(max_examples=100, deadline=None)
@given(
    k=st.integers(2, 10),
    lam=st.floats(0.0, 1.0, allow_nan=False),
    data=st.data(),
)
def test_mix_labels_on_simplex(k, lam, data):
    y_a = data.draw(st.integers(0, k - 1))
    y_b = data.draw(st.integers(0, k - 1))
    label = mix_labels(y_a, y_b, lam, k)
    assert np.all(label >= 0.0)
    assert abs(label.sum() - 1.0) <= 1e-12
    assert int((label > 0).sum()) <= 2
