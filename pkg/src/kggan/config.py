"""Experiment configuration: flat key = value text, round-trip exact.

Every seed is explicit; nothing draws from hidden entropy. Defaults are
desk scale: 12 categories (9 seen / 3 unseen), 80 images each at 16x16,
3000 GAN iterations.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError
from .hashing import fnv1a_64_hex


@dataclass
class ExperimentConfig:
    n_categories: int = 12
    images_per_category: int = 80
    image_size: int = 16
    n_unseen: int = 3
    descriptions_per_category: int = 10
    embed_dim: int = 64
    condition_mode: str = "semantic_embedding"
    lambda_se: float = 0.1
    embedder_steps: int = 2000
    embedder_batch: int = 32
    embedder_lr: float = 1e-3
    embedder_plateau: int = 300
    gan_iterations: int = 3000
    batch_size: int = 16
    z_dim: int = 16
    d_steps_per_g_step: int = 1
    gan_lr: float = 2e-4
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    g_hidden: int = 128
    d_hidden: int = 128
    feat_dim: int = 64
    n_gen: int = 256
    grid_rows: int = 2
    data_seed: int = 101
    split_seed: int = 102
    embedder_seed: int = 103
    gan_seed: int = 104
    eval_seed: int = 105
    out_dir: str = "runs"


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    if config.image_size < 8:
        raise ConfigError(f"image_size must be >= 8, got {config.image_size}")
    if not (1 <= config.n_unseen < config.n_categories):
        raise ConfigError(
            f"n_unseen must be in [1, {config.n_categories - 1}], got {config.n_unseen}"
        )
    if config.gan_iterations < 1:
        raise ConfigError("gan_iterations must be >= 1")
    if config.lambda_se < 0:
        raise ConfigError("lambda_se must be >= 0")
    if config.condition_mode not in ("semantic_embedding", "one_hot"):
        raise ConfigError(f"unknown condition_mode {config.condition_mode!r}")
    return config


def serialize_config(config: ExperimentConfig) -> str:
    lines = ["# experiment configuration (key = value)"]
    for f in fields(config):
        value = getattr(config, f.name)
        text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} on line {lineno}")
        kind = known[key]
        try:
            if kind in ("int", int):
                values[key] = int(value)
            elif kind in ("float", float):
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"bad value for {key!r} on line {lineno}: {value!r}") from None
    return validate_config(ExperimentConfig(**values))


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path, config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(config))


def config_hash(config: ExperimentConfig) -> str:
    return fnv1a_64_hex(serialize_config(config).encode("utf-8"))


def rebase_seeds(config: ExperimentConfig, master_seed: int) -> ExperimentConfig:
    """Derive the five run seeds from one master seed: master+0 .. master+4."""
    config.data_seed = master_seed
    config.split_seed = master_seed + 1
    config.embedder_seed = master_seed + 2
    config.gan_seed = master_seed + 3
    config.eval_seed = master_seed + 4
    return config
