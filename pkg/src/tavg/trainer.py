"""Adversarial training loop: alternating D and G updates, seeded end to end."""

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .discriminator import DiscriminatorConfig, init_discriminator
from .encoder import SECOND_LAYERS, SEGMENT_LAYERS, EncoderConfig, init_encoder
from .generator import GeneratorConfig, init_generator, sample_noise

PROB_CLAMP = 1e-7
ADAM_BETAS = (0.5, 0.999)

MODE_TO_DATASET = {"with_gru": "triplet", "no_gru": "triplet",
                   "baseline": "baseline"}


class NumericError(RuntimeError):
    """Training aborted on a non-finite loss; carries the diagnostic record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


def _as_scores(scores):
    tensor_in = torch.is_tensor(scores)
    t = scores if tensor_in else torch.as_tensor(scores, dtype=torch.float64)
    if t.dim() == 0:
        t = t.reshape(1)
    if t.numel() == 0:
        raise ValueError("empty score list")
    return t, tensor_in


def d_loss(scores_real, scores_fake):
    """-mean(log p_real) - mean(log(1 - p_fake)), probabilities clamped."""
    p_real, real_t = _as_scores(scores_real)
    p_fake, fake_t = _as_scores(scores_fake)
    p_real = p_real.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    p_fake = p_fake.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    loss = -torch.log(p_real).mean() - torch.log(1 - p_fake).mean()
    return loss if (real_t or fake_t) else float(loss)


def g_loss(scores_fake):
    """Non-saturating generator loss: -mean(log p_fake)."""
    p_fake, tensor_in = _as_scores(scores_fake)
    p_fake = p_fake.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    loss = -torch.log(p_fake).mean()
    return loss if tensor_in else float(loss)


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "with_gru"
    iterations: int = 1000
    batch_size: int = 16
    lr_d: float = 1e-4
    lr_g: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 0
    image_size: int = 64
    base_channels: int = 64
    noise_dim: int = 100
    embedding_dim: int = 128
    gru_kernel: int = 3
    encoder_layers: tuple | None = None  # None -> default stack for the mode
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODE_TO_DATASET:
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.iterations < 0 or self.lr_d <= 0 or self.lr_g <= 0:
            raise ValueError("iterations must be >= 0 and learning rates positive")

    @property
    def dataset_mode(self) -> str:
        return MODE_TO_DATASET[self.mode]

    def encoder_config(self) -> EncoderConfig:
        if self.mode == "baseline":
            layers = self.encoder_layers or tuple(SECOND_LAYERS)
            return EncoderConfig(16000, tuple(tuple(s) for s in layers))
        layers = self.encoder_layers or tuple(SEGMENT_LAYERS)
        return EncoderConfig(1600, tuple(tuple(s) for s in layers))

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(mode=self.mode, noise_dim=self.noise_dim,
                               embedding_dim=self.embedding_dim,
                               base_channels=self.base_channels,
                               out_size=self.image_size,
                               gru_kernel=self.gru_kernel)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(in_size=self.image_size,
                                   base_channels=self.base_channels,
                                   embedding_dim=self.embedding_dim,
                                   frames=1 if self.mode == "baseline" else 3,
                                   gru_kernel=self.gru_kernel)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["encoder_layers"] is not None:
            d["encoder_layers"] = [list(s) for s in d["encoder_layers"]]
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        if d.get("encoder_layers") is not None:
            d["encoder_layers"] = tuple(tuple(s) for s in d["encoder_layers"])
        return TrainConfig(**d)


@dataclass
class LossRecord:
    iteration: int
    d_loss: float
    g_loss: float
    d_real_mean: float
    d_fake_mean: float

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in
                   (self.d_loss, self.g_loss, self.d_real_mean, self.d_fake_mean))


class TrainState:
    def __init__(self, config: TrainConfig):
        torch.set_num_threads(config.threads)
        self.config = config
        self.encoder = init_encoder(config.encoder_config(), config.seed)
        self.generator = init_generator(config.generator_config(), config.seed + 1)
        self.discriminator = init_discriminator(config.discriminator_config(),
                                                config.seed + 2)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(),
                                      lr=config.lr_d, betas=ADAM_BETAS)
        self.opt_g = torch.optim.Adam(
            list(self.generator.parameters()) + list(self.encoder.parameters()),
            lr=config.lr_g, betas=ADAM_BETAS)
        self.noise_rng = torch.Generator().manual_seed(config.seed + 7919)
        self.shuffle_rng = np.random.default_rng(config.seed)
        self.iteration = 0

    def save(self, path) -> None:
        save_checkpoint(path, mode=self.config.mode, seed=self.config.seed,
                        iteration=self.iteration,
                        train_config=self.config.to_dict(),
                        encoder=self.encoder, generator=self.generator,
                        discriminator=self.discriminator,
                        opt_d=self.opt_d, opt_g=self.opt_g)


def _sample_frames(sample) -> np.ndarray:
    if hasattr(sample, "frames"):
        return np.asarray(sample.frames)
    return np.asarray(sample.frame)[None]


def batch_tensors(samples):
    """Stack samples into (frames, audio) float32 tensors, frames as (B,T,3,H,W)."""
    frames = np.stack([_sample_frames(s) for s in samples])
    audio = np.stack([np.asarray(s.audio) for s in samples])
    frames_t = torch.from_numpy(frames).permute(0, 1, 4, 2, 3).contiguous().float()
    return frames_t, torch.from_numpy(audio).float()


def discriminator_step(state: TrainState, real, fake_detached, y_const):
    """Update D on real frames and detached fakes; touches no G/encoder weights.

    Losses are evaluated in logit space (softplus(-l) == -log sigmoid(l)),
    which is the same objective as d_loss but free of the zero-gradient
    plateau a saturated float32 sigmoid would create: the loop can always
    recover from a temporarily winning generator.
    """
    state.opt_d.zero_grad(set_to_none=True)
    logit_real = state.discriminator.logits(real, y_const)
    logit_fake = state.discriminator.logits(fake_detached, y_const)
    loss_d = (torch.nn.functional.softplus(-logit_real).mean()
              + torch.nn.functional.softplus(logit_fake).mean())
    loss_d.backward()
    state.opt_d.step()
    return loss_d, torch.sigmoid(logit_real), torch.sigmoid(logit_fake)


def generator_step(state: TrainState, fake, y_const):
    """Update G (and the encoder, through the fusion path); D is not stepped."""
    state.opt_g.zero_grad(set_to_none=True)
    logit_fake = state.discriminator.logits(fake, y_const)
    loss_g = torch.nn.functional.softplus(-logit_fake).mean()
    loss_g.backward()
    state.opt_g.step()
    return loss_g


def train_step(batch, state: TrainState) -> LossRecord:
    """One D update (real + detached fakes), then one G update (encoder with G)."""
    real, audio = batch
    if real.shape[0] == 0:
        raise ValueError("empty batch")
    # The discriminator sees y as a constant: encoder gradients arrive only
    # through the generator's fusion path.
    y = state.encoder(audio)
    y_const = y.detach()
    z = sample_noise(real.shape[0], state.noise_rng, state.config.noise_dim)
    fake = state.generator(z, y)

    loss_d, p_real, p_fake = discriminator_step(state, real, fake.detach(),
                                                y_const)
    loss_g = generator_step(state, fake, y_const)

    state.iteration += 1
    record = LossRecord(state.iteration, loss_d.item(), loss_g.item(),
                        p_real.mean().item(), p_fake.mean().item())
    if not record.is_finite():
        raise NumericError(f"non-finite loss at iteration {record.iteration}: "
                           f"d={record.d_loss} g={record.g_loss}", record)
    return record


def iter_batches(n_samples: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches: per-epoch seeded shuffles, in order."""
    while True:
        perm = rng.permutation(n_samples)
        for start in range(0, n_samples, batch_size):
            chunk = perm[start:start + batch_size]
            if len(chunk):
                yield chunk


def write_losses(records, path) -> None:
    lines = ["iteration\td_loss\tg_loss\td_real_mean\td_fake_mean"]
    for r in records:
        lines.append(f"{r.iteration}\t{r.d_loss:.10g}\t{r.g_loss:.10g}"
                     f"\t{r.d_real_mean:.10g}\t{r.d_fake_mean:.10g}")
    Path(path).write_text("\n".join(lines) + "\n")


def train(config: TrainConfig, dataset, out_path, losses_path=None,
          progress=None):
    """Run the full loop; returns (TrainState, records) and writes artifacts.

    `dataset` carries .mode ("triplet"/"baseline") and .samples; shuffling,
    noise, and init all derive from config.seed, so runs are reproducible
    bit for bit in single-threaded mode.
    """
    if dataset.mode != config.dataset_mode:
        raise ValueError(f"dataset/config mode mismatch: dataset is "
                         f"{dataset.mode!r} but {config.mode!r} training "
                         f"needs {config.dataset_mode!r}")
    samples = list(dataset.samples)
    if not samples:
        raise ValueError("empty dataset")

    out_path = Path(out_path)
    state = TrainState(config)
    records = []
    batches = iter_batches(len(samples), config.batch_size, state.shuffle_rng)
    for _ in range(config.iterations):
        idx = next(batches)
        record = train_step(batch_tensors([samples[i] for i in idx]), state)
        records.append(record)
        if progress is not None:
            progress(record)
        if (config.checkpoint_every > 0
                and state.iteration % config.checkpoint_every == 0):
            step_path = out_path.with_name(
                f"{out_path.stem}.it{state.iteration:06d}{out_path.suffix}")
            state.save(step_path)

    state.save(out_path)
    if losses_path is not None:
        write_losses(records, losses_path)
    return state, records
