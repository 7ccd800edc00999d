"""Line-based `key = value` run configuration, strictly keyed and typed."""

from dataclasses import dataclass, fields
from pathlib import Path

from .trainer import TrainConfig

MODES = ("with_gru", "no_gru", "baseline")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    iterations: int = 1000
    batch_size: int = 16
    lr_d: float = 1e-4
    lr_g: float = 1e-4
    mode: str = "with_gru"
    checkpoint_every: int = 0
    image_size: int = 64
    base_channels: int = 64
    noise_dim: int = 100
    embedding_dim: int = 128
    gru_kernel: int = 3
    encoder_spec: str = ""  # "CxKxS,CxKxS,..."; empty = default for the mode
    threads: int = 1
    eval_seed: int = 0

    def encoder_layers(self):
        if not self.encoder_spec:
            return None
        return parse_encoder_spec(self.encoder_spec)

    def train_config(self, mode: str | None = None) -> TrainConfig:
        return TrainConfig(mode=mode or self.mode, iterations=self.iterations,
                           batch_size=self.batch_size, lr_d=self.lr_d,
                           lr_g=self.lr_g, seed=self.seed,
                           checkpoint_every=self.checkpoint_every,
                           image_size=self.image_size,
                           base_channels=self.base_channels,
                           noise_dim=self.noise_dim,
                           embedding_dim=self.embedding_dim,
                           gru_kernel=self.gru_kernel,
                           encoder_layers=self.encoder_layers(),
                           threads=self.threads)


def parse_encoder_spec(spec: str):
    layers = []
    for part in spec.split(","):
        pieces = part.strip().split("x")
        if len(pieces) != 3:
            raise ConfigError(f"encoder_spec entries must be CxKxS, got "
                              f"{part.strip()!r}")
        try:
            layers.append(tuple(int(p) for p in pieces))
        except ValueError:
            raise ConfigError(f"non-integer encoder_spec entry {part.strip()!r}")
    return tuple(layers)


def parse_config(text: str) -> RunConfig:
    """Parse config text; unknown keys are rejected, every value type-checked."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kind = types[key]
        try:
            if kind is int:
                values[key] = int(value)
            elif kind is float:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"line {lineno}: invalid {kind.__name__} value "
                              f"{value!r} for key {key!r}")
    config = RunConfig(**values)
    if config.mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, "
                          f"got {config.mode!r}")
    if config.encoder_spec:
        parse_encoder_spec(config.encoder_spec)
    return config


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
