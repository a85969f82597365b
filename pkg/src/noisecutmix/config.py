"""Experiment configuration: one flat JSON document, strictly validated.

Unknown keys are a hard error so a typo can never silently fall back
to a default. Omitted keys take the documented defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .samplers import SAMPLER_KINDS

METHODS = (
    "original",
    "cutmix",
    "mixup",
    "gen_random",
    "gen_random+cutmix",
    "gen_random+mixup",
    "noisecutmix",
)

OUTPUT_DIR_ENV = "NOISECUTMIX_OUTDIR"


@dataclass
class ExperimentConfig:
    # dataset
    num_classes: int = 4
    width: int = 16
    height: int = 16
    bump_sigma: float = 2.0
    noise_var: float = 0.5
    n_train_per_class: int = 10
    n_test_per_class: int = 50
    # diffusion sampling
    schedule_steps: int = 1000
    sampler_kind: str = "dpm_solver_pp_2m"
    num_inference_steps: int = 25
    guidance_scale: float = 7.5
    # augmentation
    augment_ratio: float = 1.0
    cutmix_alpha: float = 1.0
    mixup_alpha: float = 0.2
    noisemix_alpha: float = 1.0
    augment_probability: float = 0.5
    # classifier training
    batch_size: int = 64
    learning_rate: float = 0.001
    epochs: int = 30
    val_fraction: float = 0.2
    hidden_units: int = 64
    # experiment protocol
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    trials: int = 5
    master_seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.augment_ratio < 0.0:
            raise ConfigError("augment_ratio must be >= 0")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if self.sampler_kind not in SAMPLER_KINDS:
            raise ConfigError(f"sampler_kind must be one of {SAMPLER_KINDS}")
        if not (1 <= self.num_inference_steps <= self.schedule_steps):
            raise ConfigError("num_inference_steps must lie in [1, schedule_steps]")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; valid: {list(METHODS)}")
        if not self.methods:
            raise ConfigError("method list must not be empty")

    def resolved_output_dir(self, override: str | None = None) -> Path:
        if override:
            return Path(override)
        if self.output_dir:
            return Path(self.output_dir)
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env:
            return Path(env)
        return Path("noisecutmix_out")


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    valid = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = sorted(set(raw) - valid)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    try:
        return ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    """Resolved copy of the config, key-sorted for byte stability."""
    Path(path).write_text(
        json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
