"""Per-class Gaussian image models and the closed-form optimal noise predictor.

Each class c is a Gaussian over single-channel W x H grids with mean
mu_c and diagonal covariance var_c. Under the variance-preserving
forward process the step-t marginal of class c is Gaussian with mean
sqrt(abar_t) mu_c and diagonal variance v_t = abar_t var_c + (1 - abar_t),
so the optimal noise predictor is available in closed form:

    eps*(x) = -sqrt(1 - abar_t) * grad log p_t(x)
            = sqrt(1 - abar_t) * (x - sqrt(abar_t) mu_c) / v_t     (conditional)

For the unconditional branch p_t is the weighted mixture over all
classes and the score is the responsibility-weighted sum of per-class
scores, with responsibilities computed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import Schedule

VAR_FLOOR = 1e-6

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class ClassModel:
    """Gaussian image model for one class: N(mean, diag(var))."""

    class_id: int
    mean: np.ndarray  # (H, W)
    var: np.ndarray   # (H, W), all >= VAR_FLOOR
    weight: float = 1.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and var must have the same shape")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("class mean must be finite")
        if np.any(self.var < VAR_FLOOR):
            raise ValueError(f"variances must be >= {VAR_FLOOR}")
        if not (0.0 < self.weight <= 1.0):
            raise ValueError("mixture weight must lie in (0, 1]")


def _bump_centers(num_classes: int, width: int, height: int) -> list[tuple[float, float]]:
    """Deterministic k x k lattice of bump centers, row-major class order."""
    k = math.ceil(math.sqrt(num_classes))
    if width / k < 2.0 or height / k < 2.0:
        raise ValueError(
            f"{num_classes} classes exceed the lattice capacity of a {width}x{height} grid"
        )
    centers = []
    for c in range(num_classes):
        i, j = c % k, c // k
        centers.append(((i + 0.5) * width / k, (j + 0.5) * height / k))
    return centers


def make_bump_dataset(
    num_classes: int,
    width: int,
    height: int,
    bump_sigma: float,
    noise_var: float,
    seed: int,
    n_per_class: int,
) -> tuple[list[ClassModel], list[tuple[np.ndarray, int]]]:
    """Build class models with Gaussian-bump means and draw exact samples.

    Class c's mean is a unit-amplitude Gaussian bump of spatial width
    bump_sigma centered at its lattice point; covariance is uniform
    diagonal noise_var. Samples are exact draws from each class model,
    class-major, reproducible from the seed.
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if width < 4 or height < 4:
        raise ValueError("grid must be at least 4x4")
    if bump_sigma <= 0.0:
        raise ValueError("bump_sigma must be positive")
    if noise_var < VAR_FLOOR:
        raise ValueError(f"noise_var must be >= {VAR_FLOOR}")
    if n_per_class < 0:
        raise ValueError("n_per_class must be >= 0")

    centers = _bump_centers(num_classes, width, height)
    cols = np.arange(width, dtype=np.float64) + 0.5
    rows = np.arange(height, dtype=np.float64) + 0.5
    xx, yy = np.meshgrid(cols, rows)

    models = []
    for c, (cx, cy) in enumerate(centers):
        mean = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * bump_sigma ** 2))
        var = np.full((height, width), float(noise_var))
        models.append(ClassModel(class_id=c, mean=mean, var=var, weight=1.0 / num_classes))

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDA7A)))
    samples = []
    std = math.sqrt(noise_var)
    for model in models:
        draws = model.mean + std * rng.standard_normal((n_per_class, height, width))
        for i in range(n_per_class):
            samples.append((draws[i], model.class_id))
    return models, samples


def _step_params(t: int, sched: Schedule, models: list[ClassModel]):
    if not models:
        raise ValueError("model list must not be empty")
    if not (1 <= t <= sched.num_steps):
        raise ValueError(f"step index {t} outside [1, {sched.num_steps}]")
    ab = float(sched.alpha_bar[t])
    return ab, math.sqrt(ab), math.sqrt(1.0 - ab)


def _log_class_densities(
    x_t: np.ndarray, t: int, sched: Schedule, models: list[ClassModel]
) -> np.ndarray:
    """log(w_c) + log N(x_t; sqrt(abar_t) mu_c, v_c) for each class.

    x_t may carry leading batch axes; densities are totals over the
    trailing (H, W) axes. Returns shape (K,) + batch_shape.
    """
    ab, sqrt_ab, _ = _step_params(t, sched, models)
    out = []
    for m in models:
        v = ab * m.var + (1.0 - ab)
        z = x_t - sqrt_ab * m.mean
        ll = -0.5 * np.sum(np.log(v) + LOG_2PI + z * z / v, axis=(-2, -1))
        out.append(math.log(m.weight) + ll)
    return np.stack(out, axis=0)


def predict_noise(
    x_t: np.ndarray,
    cond: int | None,
    t: int,
    sched: Schedule,
    models: list[ClassModel],
) -> np.ndarray:
    """Optimal noise estimate for x_t under the given condition.

    cond is a class id, or None for the unconditional (all-class
    mixture) branch. x_t may carry leading batch axes over the (H, W)
    grid; the result has the same shape.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    ab, sqrt_ab, sqrt_1mab = _step_params(t, sched, models)

    if cond is None and len(models) == 1:
        # one-class mixture: responsibilities are identically 1
        cond = models[0].class_id
    if cond is not None:
        by_id = {m.class_id: m for m in models}
        if cond not in by_id:
            raise ValueError(f"unknown class id {cond}")
        m = by_id[cond]
        v = ab * m.var + (1.0 - ab)
        return sqrt_1mab * (x_t - sqrt_ab * m.mean) / v

    log_dens = _log_class_densities(x_t, t, sched, models)
    log_dens -= log_dens.max(axis=0, keepdims=True)
    resp = np.exp(log_dens)
    resp /= resp.sum(axis=0, keepdims=True)

    eps = np.zeros_like(x_t)
    for r_c, m in zip(resp, models):
        v = ab * m.var + (1.0 - ab)
        eps += r_c[..., None, None] * (x_t - sqrt_ab * m.mean) / v
    return sqrt_1mab * eps


def num_classes(models: list[ClassModel]) -> int:
    return len(models)


def grid_shape(models: list[ClassModel]) -> tuple[int, int]:
    """(height, width) of the model grids."""
    return models[0].mean.shape
