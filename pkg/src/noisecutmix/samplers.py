"""Reverse-process generation: ancestral DDPM and DPM-Solver++(2M).

Two entry points build one record each: generate_single (one class
condition, the random-generation baseline) and generate_noisecutmix
(two class conditions whose noise estimates are mixed through a fixed
binary mask at every step). Batched variants run the identical step
code over a leading sample axis for distribution-level tests.

Every record derives its randomness from an integer seed through two
independent child streams, one for mask/ratio draws and one for the
trajectory, so a record is reproducible bit-exactly from its
provenance and forcing the mask never perturbs the trajectory draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classmodels import ClassModel, grid_shape, num_classes, predict_noise
from .mixing import (
    MaskSpec,
    mask_from_rect,
    mix_labels,
    one_hot,
    realized_lambda,
    sample_lambda,
    sample_mask,
)
from .schedule import Schedule, cfg_combine

ANCESTRAL = "ancestral"
DPM_PP_2M = "dpm_solver_pp_2m"
SAMPLER_KINDS = (ANCESTRAL, DPM_PP_2M)

_MASK_STREAM = 0
_TRAJ_STREAM = 1


@dataclass
class SamplerConfig:
    kind: str = DPM_PP_2M
    num_inference_steps: int = 25
    guidance_scale: float = 7.5

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.num_inference_steps < 1:
            raise ValueError("num_inference_steps must be >= 1")
        if self.guidance_scale < 0.0:
            raise ValueError("guidance_scale must be >= 0")


@dataclass
class Provenance:
    """Everything needed to regenerate a record bit-exactly (given the
    schedule and class models from the experiment config)."""

    method: str
    class_a: int
    class_b: int | None
    lambda_sampled: float | None
    lambda_real: float
    rect: tuple[float, float, float, float] | None
    seed: int
    sampler: str
    steps: int
    guidance: float
    alpha: float | None


@dataclass
class GenRecord:
    image: np.ndarray      # (H, W)
    label: np.ndarray      # (K,) simplex vector
    provenance: Provenance
    mask: np.ndarray | None = field(default=None, repr=False)


def child_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for (seed, stream), stable across runs."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream))))


def timestep_grid(num_steps: int, num_inference_steps: int) -> np.ndarray:
    """n+1 step indices from T down to 0, uniformly spaced in t and rounded."""
    if not (1 <= num_inference_steps <= num_steps):
        raise ValueError(
            f"num_inference_steps must lie in [1, {num_steps}], got {num_inference_steps}"
        )
    ts = np.round(np.linspace(num_steps, 0, num_inference_steps + 1)).astype(np.int64)
    if not np.all(np.diff(ts) < 0):
        raise ValueError("rounded timestep grid is not strictly decreasing")
    return ts


def tweedie_x0(x_t: np.ndarray, eps_hat: np.ndarray, t: int, sched: Schedule) -> np.ndarray:
    """Data estimate (x_t - sigma_t eps) / a_t."""
    return (x_t - sched.noise(t) * eps_hat) / sched.signal(t)


def step_ancestral(
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    t_from: int,
    t_to: int,
    sched: Schedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """One DDPM posterior step from t_from to t_to (skip steps allowed).

    Returns the posterior mean toward t_to plus posterior-variance
    noise; the noise term is omitted on the terminal step t_to = 0,
    where the posterior collapses onto the data estimate.
    """
    if not (t_from > t_to >= 0):
        raise ValueError(f"need t_from > t_to >= 0, got {t_from} -> {t_to}")
    if t_from > sched.num_steps:
        raise ValueError(f"t_from {t_from} exceeds schedule length {sched.num_steps}")
    ab_t = float(sched.alpha_bar[t_from])
    ab_s = float(sched.alpha_bar[t_to])
    x0 = tweedie_x0(x_t, eps_hat, t_from, sched)
    u = ab_t / ab_s
    coef_x0 = math.sqrt(ab_s) * (1.0 - u) / (1.0 - ab_t)
    coef_xt = math.sqrt(u) * (1.0 - ab_s) / (1.0 - ab_t)
    mean = coef_x0 * x0 + coef_xt * x_t
    if t_to == 0:
        return mean
    post_var = (1.0 - ab_s) * (1.0 - u) / (1.0 - ab_t)
    return mean + math.sqrt(post_var) * rng.standard_normal(np.shape(x_t))


def step_dpm_pp_2m(
    x: np.ndarray,
    datapred_curr: np.ndarray,
    datapred_prev: np.ndarray | None,
    times: tuple[int | None, int, int],
    sched: Schedule,
) -> np.ndarray:
    """DPM-Solver++(2M) update in the data-prediction parametrization.

    times is (t_prev, t_curr, t_to): the step of the previous data
    prediction (None on the first step, which falls back to first
    order), the current step, and the target step. With l = log(a/sigma),
    h = l(t_to) - l(t_curr), h_prev = l(t_curr) - l(t_prev), r = h_prev/h:

        D = (1 + 1/(2r)) x0_curr - 1/(2r) x0_prev
        x_to = (sigma_to / sigma_curr) x - a_to (exp(-h) - 1) D

    The update is deterministic. A target of t_to = 0 has infinite h;
    the update limit there is the current data prediction, which is
    returned directly (the standard lower-order terminal step).
    """
    t_prev, t_curr, t_to = times
    if not (t_curr > t_to >= 0):
        raise ValueError(f"need t_curr > t_to >= 0, got {t_curr} -> {t_to}")
    if t_curr > sched.num_steps:
        raise ValueError(f"t_curr {t_curr} exceeds schedule length {sched.num_steps}")
    if datapred_prev is not None:
        if t_prev is None or not (t_prev > t_curr):
            raise ValueError("previous data prediction requires t_prev > t_curr")
        if not np.all(np.isfinite(datapred_prev)):
            raise ValueError("data predictions must be finite")
    if not np.all(np.isfinite(datapred_curr)):
        raise ValueError("data predictions must be finite")

    if t_to == 0:
        return np.array(datapred_curr, dtype=np.float64, copy=True)

    l_curr = sched.log_snr_half(t_curr)
    l_to = sched.log_snr_half(t_to)
    h = l_to - l_curr
    if datapred_prev is None:
        d = datapred_curr
    else:
        h_prev = l_curr - sched.log_snr_half(t_prev)
        r = h_prev / h
        d = (1.0 + 1.0 / (2.0 * r)) * datapred_curr - (1.0 / (2.0 * r)) * datapred_prev
    sigma_ratio = sched.noise(t_to) / sched.noise(t_curr)
    return sigma_ratio * x - sched.signal(t_to) * math.expm1(-h) * d


def _run_reverse(x, eps_fn, cfg: SamplerConfig, sched: Schedule, rng: np.random.Generator):
    """Drive the reverse process from x at step T down to 0.

    eps_fn(x, t) supplies the guided (and possibly mask-mixed) noise
    estimate; x may carry leading batch axes.
    """
    ts = timestep_grid(sched.num_steps, cfg.num_inference_steps)
    if cfg.kind == ANCESTRAL:
        for k in range(len(ts) - 1):
            eps = eps_fn(x, int(ts[k]))
            x = step_ancestral(x, eps, int(ts[k]), int(ts[k + 1]), sched, rng)
        return x
    prev_pred = None
    prev_t: int | None = None
    for k in range(len(ts) - 1):
        t_curr, t_to = int(ts[k]), int(ts[k + 1])
        eps = eps_fn(x, t_curr)
        pred = tweedie_x0(x, eps, t_curr, sched)
        x = step_dpm_pp_2m(x, pred, prev_pred, (prev_t, t_curr, t_to), sched)
        prev_pred, prev_t = pred, t_curr
    return x


def _single_eps_fn(cond: int, cfg: SamplerConfig, sched: Schedule, models: list[ClassModel]):
    def eps_fn(x, t):
        eps_cond = predict_noise(x, cond, t, sched, models)
        if cfg.guidance_scale == 1.0:
            # cfg_combine at scale 1 returns the conditional estimate
            return eps_cond
        eps_uncond = predict_noise(x, None, t, sched, models)
        return cfg_combine(eps_cond, eps_uncond, cfg.guidance_scale)

    return eps_fn


def _mixed_eps_fn(
    class_a: int,
    class_b: int,
    mask: np.ndarray,
    cfg: SamplerConfig,
    sched: Schedule,
    models: list[ClassModel],
):
    keep_a = mask.astype(bool)

    def eps_fn(x, t):
        if cfg.guidance_scale == 1.0:
            eps_a = predict_noise(x, class_a, t, sched, models)
            eps_b = predict_noise(x, class_b, t, sched, models)
        else:
            # one shared unconditional estimate per step, guidance per class
            eps_uncond = predict_noise(x, None, t, sched, models)
            eps_a = cfg_combine(predict_noise(x, class_a, t, sched, models), eps_uncond, cfg.guidance_scale)
            eps_b = cfg_combine(predict_noise(x, class_b, t, sched, models), eps_uncond, cfg.guidance_scale)
        # mask selection: each cell takes exactly one source value
        return np.where(keep_a, eps_a, eps_b)

    return eps_fn


def generate_single(
    cond: int,
    cfg: SamplerConfig,
    sched: Schedule,
    models: list[ClassModel],
    seed: int,
) -> GenRecord:
    """Generate one image conditioned on a single class; one-hot label."""
    h, w = grid_shape(models)
    label = one_hot(cond, num_classes(models))
    rng = child_rng(seed, _TRAJ_STREAM)
    x = rng.standard_normal((h, w))
    x = _run_reverse(x, _single_eps_fn(cond, cfg, sched, models), cfg, sched, rng)
    prov = Provenance(
        method="single",
        class_a=cond,
        class_b=None,
        lambda_sampled=None,
        lambda_real=1.0,
        rect=None,
        seed=seed,
        sampler=cfg.kind,
        steps=cfg.num_inference_steps,
        guidance=cfg.guidance_scale,
        alpha=None,
    )
    return GenRecord(image=x, label=label, provenance=prov)


def _draw_mask(
    width: int,
    height: int,
    alpha: float,
    rng: np.random.Generator,
    force_lambda: float | None,
    force_mask: np.ndarray | None,
) -> MaskSpec:
    if force_mask is not None:
        mask = np.asarray(force_mask, dtype=np.uint8)
        if mask.shape != (height, width):
            raise ValueError(f"forced mask must have shape {(height, width)}")
        return MaskSpec(
            lambda_sampled=math.nan, rect=None, mask=mask, lambda_real=realized_lambda(mask)
        )
    if force_lambda is not None:
        if not (0.0 <= force_lambda <= 1.0):
            raise ValueError("forced lambda must lie in [0, 1]")
        if force_lambda == 0.0:
            # degenerate full cut: the whole grid belongs to class B
            rect = (width / 2.0, height / 2.0, float(width), float(height))
            mask = mask_from_rect(width, height, rect)
            return MaskSpec(lambda_sampled=0.0, rect=rect, mask=mask, lambda_real=0.0)
        return sample_mask(width, height, force_lambda, rng)
    lam = sample_lambda(alpha, rng)
    return sample_mask(width, height, lam, rng)


def generate_noisecutmix(
    class_a: int,
    class_b: int,
    cfg: SamplerConfig,
    sched: Schedule,
    models: list[ClassModel],
    alpha: float,
    seed: int,
    force_lambda: float | None = None,
    force_mask: np.ndarray | None = None,
) -> GenRecord:
    """Generate one image mixing the noise estimates of two classes.

    The mixing ratio and mask are drawn once before the loop and held
    fixed across all denoising steps; the soft label uses the realized
    (post-clipping) area ratio. force_lambda / force_mask bypass the
    draw for degenerate and oracle tests; forcing never changes the
    trajectory randomness.
    """
    h, w = grid_shape(models)
    k = num_classes(models)
    if not (0 <= class_a < k and 0 <= class_b < k):
        raise ValueError(f"class pair ({class_a}, {class_b}) out of range [0, {k})")
    spec = _draw_mask(w, h, alpha, child_rng(seed, _MASK_STREAM), force_lambda, force_mask)
    label = mix_labels(class_a, class_b, spec.lambda_real, k)

    rng = child_rng(seed, _TRAJ_STREAM)
    x = rng.standard_normal((h, w))
    eps_fn = _mixed_eps_fn(class_a, class_b, spec.mask, cfg, sched, models)
    x = _run_reverse(x, eps_fn, cfg, sched, rng)

    prov = Provenance(
        method="noisecutmix",
        class_a=class_a,
        class_b=class_b,
        lambda_sampled=None if math.isnan(spec.lambda_sampled) else spec.lambda_sampled,
        lambda_real=spec.lambda_real,
        rect=spec.rect,
        seed=seed,
        sampler=cfg.kind,
        steps=cfg.num_inference_steps,
        guidance=cfg.guidance_scale,
        alpha=alpha,
    )
    return GenRecord(image=x, label=label, provenance=prov, mask=spec.mask)


def regenerate(prov: Provenance, sched: Schedule, models: list[ClassModel]) -> GenRecord:
    """Rebuild a record from its provenance (bit-exact for unforced records)."""
    cfg = SamplerConfig(
        kind=prov.sampler, num_inference_steps=prov.steps, guidance_scale=prov.guidance
    )
    if prov.method == "single":
        return generate_single(prov.class_a, cfg, sched, models, prov.seed)
    if prov.method == "noisecutmix":
        if prov.class_b is None or prov.alpha is None:
            raise ValueError("noisecutmix provenance requires class_b and alpha")
        return generate_noisecutmix(
            prov.class_a, prov.class_b, cfg, sched, models, prov.alpha, prov.seed
        )
    raise ValueError(f"unknown generation method {prov.method!r}")


def sample_single_batch(
    cond: int,
    cfg: SamplerConfig,
    sched: Schedule,
    models: list[ClassModel],
    seed: int,
    n: int,
) -> np.ndarray:
    """n terminal images for one class condition, shape (n, H, W).

    Runs the same step code as generate_single with a batch axis; used
    for moment-level distribution tests where per-record provenance is
    not needed.
    """
    h, w = grid_shape(models)
    rng = child_rng(seed, _TRAJ_STREAM)
    x = rng.standard_normal((n, h, w))
    return _run_reverse(x, _single_eps_fn(cond, cfg, sched, models), cfg, sched, rng)


def sample_noisecutmix_batch(
    class_a: int,
    class_b: int,
    mask: np.ndarray,
    cfg: SamplerConfig,
    sched: Schedule,
    models: list[ClassModel],
    seed: int,
    n: int,
) -> np.ndarray:
    """n terminal mixed images sharing one fixed mask, shape (n, H, W)."""
    h, w = grid_shape(models)
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.shape != (h, w):
        raise ValueError(f"mask must have shape {(h, w)}")
    rng = child_rng(seed, _TRAJ_STREAM)
    x = rng.standard_normal((n, h, w))
    eps_fn = _mixed_eps_fn(class_a, class_b, mask, cfg, sched, models)
    return _run_reverse(x, eps_fn, cfg, sched, rng)
