"""Experiment protocol: seven augmentation methods, repeated trials, tables.

Each (method, trial) pair gets a seed derived from (master seed,
method index, trial index); everything inside the trial, including
generation, training and evaluation, is a pure function of that seed,
so a full experiment is byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy
from .classifier import TrainConfig, evaluate, train
from .classmodels import ClassModel, make_bump_dataset
from .config import METHODS, ExperimentConfig, dump_config
from .mixing import mask_from_rect, one_hot
from .recordio import write_pgm, write_provenance, write_records
from .samplers import (
    GenRecord,
    Provenance,
    SamplerConfig,
    child_rng,
    generate_noisecutmix,
    generate_single,
)
from .schedule import Schedule, make_cosine_schedule

_TRAIN_DATA_STREAM = 20
_CLASS_PICK_STREAM = 21
_RECORD_SEED_STREAM = 22
_TRAIN_SEED_STREAM = 23
_TEST_DATA_STREAM = 99


def derive_seed(*parts: int) -> int:
    """Stable integer seed from a tuple of integers."""
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_seed(master_seed: int, method: str, trial: int) -> int:
    return derive_seed(master_seed, METHODS.index(method), trial)


@dataclass
class ResultRow:
    method: str
    accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        if len(self.accuracies) < 2:
            return 0.0
        return float(np.std(self.accuracies, ddof=1))


@dataclass
class ResultTable:
    rows: list[ResultRow]
    trials: int


def build_models(cfg: ExperimentConfig) -> list[ClassModel]:
    """Class models implied by the config's dataset block (no samples)."""
    models, _ = make_bump_dataset(
        cfg.num_classes, cfg.width, cfg.height, cfg.bump_sigma, cfg.noise_var, seed=0, n_per_class=0
    )
    return models


def _dataset(cfg: ExperimentConfig, seed: int, n_per_class: int):
    return make_bump_dataset(
        cfg.num_classes,
        cfg.width,
        cfg.height,
        cfg.bump_sigma,
        cfg.noise_var,
        seed=seed,
        n_per_class=n_per_class,
    )


def _sampler_config(cfg: ExperimentConfig) -> SamplerConfig:
    return SamplerConfig(
        kind=cfg.sampler_kind,
        num_inference_steps=cfg.num_inference_steps,
        guidance_scale=cfg.guidance_scale,
    )


def generate_records(
    method: str,
    cfg: ExperimentConfig,
    models: list[ClassModel],
    sched: Schedule,
    count: int,
    seed: int,
) -> list[GenRecord]:
    """count generated records for a synthetic-data method.

    gen_random draws one class per record uniformly; noisecutmix draws
    the class pair uniformly without replacement. Each record's own
    seed derives from (seed, record index).
    """
    sampler_cfg = _sampler_config(cfg)
    pick_rng = child_rng(seed, _CLASS_PICK_STREAM)
    records = []
    for i in range(count):
        rec_seed = derive_seed(seed, _RECORD_SEED_STREAM, i)
        if method.startswith("gen_random"):
            cls = int(pick_rng.integers(cfg.num_classes))
            records.append(generate_single(cls, sampler_cfg, sched, models, rec_seed))
        elif method == "noisecutmix":
            pair = pick_rng.choice(cfg.num_classes, size=2, replace=False)
            records.append(
                generate_noisecutmix(
                    int(pair[0]), int(pair[1]), sampler_cfg, sched, models,
                    cfg.noisemix_alpha, rec_seed,
                )
            )
        else:
            raise ValueError(f"method {method!r} does not generate records")
    return records


def _method_policy(method: str, cfg: ExperimentConfig) -> AugmentPolicy:
    if method in ("cutmix", "gen_random+cutmix"):
        return AugmentPolicy("cutmix", cfg.cutmix_alpha, cfg.augment_probability)
    if method in ("mixup", "gen_random+mixup"):
        return AugmentPolicy("mixup", cfg.mixup_alpha, cfg.augment_probability)
    return AugmentPolicy("none")


def build_training_pool(method: str, cfg: ExperimentConfig, sched: Schedule, seed: int):
    """(pairs, synthetic flags, generated records) for one method and trial seed."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {list(METHODS)}")
    models, train_samples = _dataset(cfg, derive_seed(seed, _TRAIN_DATA_STREAM), cfg.n_train_per_class)
    pairs = [(grid, one_hot(c, cfg.num_classes)) for grid, c in train_samples]
    flags = [False] * len(pairs)
    records: list[GenRecord] = []
    if method in ("gen_random", "gen_random+cutmix", "gen_random+mixup", "noisecutmix"):
        n_aug = int(round(cfg.augment_ratio * len(pairs)))
        records = generate_records(method, cfg, models, sched, n_aug, seed)
        pairs.extend((r.image, r.label) for r in records)
        flags.extend([True] * len(records))
    return pairs, flags, records


def run_method(method: str, cfg: ExperimentConfig, sched: Schedule, seed: int):
    """Train one classifier under the method's protocol; returns
    (test accuracy, generated records)."""
    pairs, flags, records = build_training_pool(method, cfg, sched, seed)
    policy = _method_policy(method, cfg)
    train_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        val_fraction=cfg.val_fraction,
        hidden=cfg.hidden_units,
        seed=derive_seed(seed, _TRAIN_SEED_STREAM),
    )
    model, _ = train(pairs, train_cfg, policy, flags)
    _, test_samples = _dataset(cfg, derive_seed(cfg.master_seed, _TEST_DATA_STREAM), cfg.n_test_per_class)
    return evaluate(model, test_samples), records


def format_result_table(table: ResultTable) -> str:
    header = ["method"] + [f"trial{i}" for i in range(table.trials)] + ["mean", "std"]
    lines = ["# " + "\t".join(header)]
    for row in table.rows:
        cells = [row.method] + [f"{a:.6f}" for a in row.accuracies]
        cells += [f"{row.mean:.6f}", f"{row.std:.6f}"]
        lines.append("\t".join(cells))
    if table.trials == 1:
        lines.append("# single trial: std is 0 by convention")
    return "\n".join(lines) + "\n"


def parse_result_table(text: str) -> ResultTable:
    rows = []
    trials = 0
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        cells = line.split("\t")
        accs = [float(v) for v in cells[1:-2]]
        trials = len(accs)
        rows.append(ResultRow(method=cells[0], accuracies=accs))
    return ResultTable(rows=rows, trials=trials)


def mask_for_provenance(prov: Provenance, width: int, height: int) -> np.ndarray:
    """Rebuild a record's mask from its stored rectangle (all ones if none)."""
    if prov.rect is None:
        return np.ones((height, width), dtype=np.uint8)
    return mask_from_rect(width, height, prov.rect)


def export_grid(records: list[GenRecord], path: str | Path) -> None:
    """PGM montage: per record one row holding the image tile and, beside
    it, the binary mask tile; 1-pixel separators; affine pixel mapping
    recorded in the header comment."""
    if not records:
        raise ValueError("no records to export")
    h, w = records[0].image.shape
    lo = min(float(r.image.min()) for r in records)
    hi = max(float(r.image.max()) for r in records)
    span = hi - lo
    sep = np.uint8(128)
    rows = []
    comments = [f"image map: lo={lo!r} hi={hi!r} -> 0..255", "mask tile: 0=cut 255=keep"]
    for i, rec in enumerate(records):
        if span > 0:
            tile = np.round((rec.image - lo) / span * 255.0).astype(np.uint8)
        else:
            tile = np.zeros((h, w), dtype=np.uint8)
        mask = rec.mask
        if mask is None:
            mask = mask_for_provenance(rec.provenance, w, h)
        mask_tile = (mask.astype(np.uint8) * 255).astype(np.uint8)
        row = np.concatenate([tile, np.full((h, 1), sep), mask_tile], axis=1)
        rows.append(row)
        if i < len(records) - 1:
            rows.append(np.full((1, row.shape[1]), sep))
        p = rec.provenance
        comments.append(
            f"rec {i}: method={p.method} class_a={p.class_a} class_b={p.class_b} "
            f"lambda_real={p.lambda_real!r} seed={p.seed}"
        )
    write_pgm(path, np.concatenate(rows, axis=0), comments)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> ResultTable:
    """Full protocol: every configured method over `trials` seeds.

    Writes, under out_dir: the resolved config, the result table, per
    trial record batches with provenance sidecars for the generating
    methods, and one montage per generating method. Fails on an
    unwritable output directory before any compute.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_bytes(b"")
    probe.unlink()

    dump_config(cfg, out / "config.json")
    sched = make_cosine_schedule(cfg.schedule_steps)
    rows = []
    for method in cfg.methods:
        accs = []
        for i in range(cfg.trials):
            seed = trial_seed(cfg.master_seed, method, i)
            acc, records = run_method(method, cfg, sched, seed)
            accs.append(acc)
            if records:
                stem = f"{method}_t{i}"
                write_records(out / f"{stem}.records", records)
                write_provenance(out / f"{stem}.prov", records)
                if i == 0:
                    export_grid(records[: min(8, len(records))], out / f"{method}_montage.pgm")
        rows.append(ResultRow(method=method, accuracies=accs))
    table = ResultTable(rows=rows, trials=cfg.trials)
    (out / "results.tsv").write_text(format_result_table(table), encoding="ascii")
    return table
