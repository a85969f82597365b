import math

import numpy as np
import pytest

from noisecutmix import ClassModel, make_bump_dataset, make_cosine_schedule, predict_noise

# ---------------------------------------------------------------------------
# independent oracle: closed-form log mixture density and its finite-difference
# gradient, written from the definition rather than the predictor's algebra
# ---------------------------------------------------------------------------


def oracle_log_density(x, t, sched, models, cond=None):
    ab = sched.alpha_bar[t]
    logs = []
    for m in models:
        if cond is not None and m.class_id != cond:
            continue
        v = ab * m.var + (1.0 - ab)
        z = x - math.sqrt(ab) * m.mean
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * v) + z * z / v)
        logs.append((math.log(m.weight) if cond is None else 0.0) + ll)
    m0 = max(logs)
    return m0 + math.log(sum(math.exp(v - m0) for v in logs))


def oracle_fd_noise(x, t, sched, models, cond=None, h=1e-5):
    """-sqrt(1-abar) * central-difference gradient of the log density."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (
            oracle_log_density(xp, t, sched, models, cond)
            - oracle_log_density(xm, t, sched, models, cond)
        ) / (2.0 * h)
    return -math.sqrt(1.0 - sched.alpha_bar[t]) * grad


# ---------------------------------------------------------------------------
# bump dataset
# ---------------------------------------------------------------------------


def test_bump_means_distinct_and_equal_mass():
    models, _ = make_bump_dataset(2, 8, 8, 1.5, 0.25, seed=0, n_per_class=0)
    assert not np.array_equal(models[0].mean, models[1].mean)
    assert abs(models[0].mean.sum() - models[1].mean.sum()) <= 1e-9


def test_bump_dataset_rejects_degenerate_noise():
    with pytest.raises(ValueError):
        make_bump_dataset(2, 8, 8, 1.5, 0.0, seed=0, n_per_class=1)


def test_bump_dataset_rejects_too_many_classes():
    # an 8x8 grid holds a lattice of at most 16 resolvable centers
    with pytest.raises(ValueError):
        make_bump_dataset(17, 8, 8, 1.0, 0.25, seed=0, n_per_class=0)


def test_bump_dataset_reproducible():
    _, s1 = make_bump_dataset(3, 8, 8, 1.5, 0.25, seed=5, n_per_class=4)
    _, s2 = make_bump_dataset(3, 8, 8, 1.5, 0.25, seed=5, n_per_class=4)
    assert all(np.array_equal(a[0], b[0]) and a[1] == b[1] for a, b in zip(s1, s2))


def test_bump_sample_mean_matches_model():
    n = 100_000
    noise_var = 0.25
    models, samples = make_bump_dataset(2, 8, 8, 1.5, noise_var, seed=11, n_per_class=n)
    class0 = np.stack([g for g, c in samples if c == 0])
    assert class0.shape[0] == n
    tol = 3.0 * math.sqrt(noise_var / n)
    assert np.all(np.abs(class0.mean(axis=0) - models[0].mean) <= tol)


# ---------------------------------------------------------------------------
# analytic noise predictor
# ---------------------------------------------------------------------------


def _standard_normal_model(h=6, w=6):
    return [ClassModel(class_id=0, mean=np.zeros((h, w)), var=np.ones((h, w)))]


def test_predictor_stationary_standard_normal():
    sched = make_cosine_schedule(100)
    models = _standard_normal_model()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 6))
    for t in (1, 42, 100):
        expected = math.sqrt(1.0 - sched.alpha_bar[t]) * x
        assert np.allclose(predict_noise(x, 0, t, sched, models), expected, atol=1e-14)


def test_predictor_vanishes_at_scaled_mode():
    sched = make_cosine_schedule(100)
    models, _ = make_bump_dataset(2, 8, 8, 1.5, 0.25, seed=0, n_per_class=0)
    t = 37
    x = sched.signal(t) * models[1].mean
    eps = predict_noise(x, 1, t, sched, models)
    assert np.allclose(eps, 0.0, atol=1e-14)


def test_predictor_matches_fd_oracle_at_pinned_point():
    # two-class mixture at one frozen state: relative error <= 1e-5 at step 1e-4
    sched = make_cosine_schedule(1000)
    models, _ = make_bump_dataset(2, 8, 8, 1.5, 0.3, seed=0, n_per_class=0)
    t = 400
    rng = np.random.default_rng(123)
    x = sched.signal(t) * models[0].mean + sched.noise(t) * rng.standard_normal((8, 8))
    eps = predict_noise(x, None, t, sched, models)
    ref = oracle_fd_noise(x, t, sched, models, cond=None, h=1e-4)
    mask = np.abs(eps) > 1e-3
    assert mask.any()
    rel = np.abs(eps[mask] - ref[mask]) / np.abs(eps[mask])
    assert rel.max() <= 1e-5


def test_predictor_matches_fd_oracle_random_states():
    sched = make_cosine_schedule(1000)
    models, _ = make_bump_dataset(3, 8, 8, 1.5, 0.3, seed=1, n_per_class=0)
    rng = np.random.default_rng(7)
    for _ in range(10):
        t = int(rng.integers(1, 1001))
        cond = [None, 0, 1, 2][int(rng.integers(4))]
        x = rng.normal(scale=1.2, size=(8, 8))
        eps = predict_noise(x, cond, t, sched, models)
        ref = oracle_fd_noise(x, t, sched, models, cond=cond)
        mask = np.abs(eps) > 1e-3
        rel = np.abs(eps[mask] - ref[mask]) / np.abs(eps[mask])
        assert rel.max() <= 1e-4


def test_tweedie_matches_single_class_posterior_mean():
    sched = make_cosine_schedule(500)
    models, _ = make_bump_dataset(2, 8, 8, 1.5, 0.4, seed=2, n_per_class=0)
    m = models[0]
    rng = np.random.default_rng(3)
    for t in (1, 100, 500):
        ab = sched.alpha_bar[t]
        x = rng.standard_normal((8, 8))
        eps = predict_noise(x, 0, t, sched, models)
        x0_hat = (x - sched.noise(t) * eps) / sched.signal(t)
        v = ab * m.var + (1.0 - ab)
        posterior = m.mean + math.sqrt(ab) * m.var * (x - math.sqrt(ab) * m.mean) / v
        assert np.max(np.abs(x0_hat - posterior)) <= 1e-9


def test_unconditional_equals_conditional_for_one_class():
    sched = make_cosine_schedule(100)
    models = [ClassModel(class_id=0, mean=np.full((5, 5), 0.3), var=np.full((5, 5), 0.5))]
    x = np.random.default_rng(4).standard_normal((5, 5))
    assert np.array_equal(
        predict_noise(x, None, 50, sched, models), predict_noise(x, 0, 50, sched, models)
    )


def test_predictor_batched_axis_matches_loop():
    sched = make_cosine_schedule(200)
    models, _ = make_bump_dataset(2, 6, 6, 1.2, 0.3, seed=5, n_per_class=0)
    rng = np.random.default_rng(6)
    batch = rng.standard_normal((4, 6, 6))
    for cond in (None, 0):
        stacked = predict_noise(batch, cond, 77, sched, models)
        single = np.stack([predict_noise(batch[i], cond, 77, sched, models) for i in range(4)])
        assert np.allclose(stacked, single, atol=0, rtol=0)


def test_predictor_validation():
    sched = make_cosine_schedule(100)
    models = _standard_normal_model()
    x = np.zeros((6, 6))
    with pytest.raises(ValueError):
        predict_noise(x, 0, 73, sched, [])
    with pytest.raises(ValueError):
        predict_noise(x, 3, 73, sched, models)
    with pytest.raises(ValueError):
        predict_noise(x, 0, 0, sched, models)


def test_class_model_validation():
    with pytest.raises(ValueError):
        ClassModel(class_id=0, mean=np.zeros((2, 2)), var=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ClassModel(class_id=0, mean=np.full((2, 2), np.nan), var=np.ones((2, 2)))
    with pytest.raises(ValueError):
        ClassModel(class_id=0, mean=np.zeros((2, 2)), var=np.ones((2, 2)), weight=0.0)
