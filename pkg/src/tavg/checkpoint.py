"""Checkpoint save/load: full parameter snapshot plus config and seed."""

from dataclasses import asdict, dataclass

import numpy as np
import torch

from .discriminator import Discriminator, DiscriminatorConfig
from .encoder import AudioEncoder, EncoderConfig
from .generator import Generator, GeneratorConfig
from .serial import BlobError, read_blob, write_blob

KIND = "checkpoint"


@dataclass
class Checkpoint:
    mode: str
    seed: int
    iteration: int
    train: dict
    encoder_config: EncoderConfig
    generator_config: GeneratorConfig
    discriminator_config: DiscriminatorConfig
    arrays: dict
    optimizer_meta: dict

    def build_models(self):
        """Reconstruct (encoder, generator, discriminator) with stored weights."""
        enc = AudioEncoder(self.encoder_config)
        gen = Generator(self.generator_config)
        disc = Discriminator(self.discriminator_config)
        for prefix, model in (("enc", enc), ("gen", gen), ("disc", disc)):
            state = {}
            for key, ref in model.state_dict().items():
                arr = self.arrays[f"{prefix}.{key}"]
                state[key] = torch.from_numpy(arr).to(ref.dtype)
            model.load_state_dict(state)
        return enc, gen, disc


def _state_arrays(prefix: str, model: torch.nn.Module, out: dict) -> None:
    for key, tensor in model.state_dict().items():
        out[f"{prefix}.{key}"] = tensor.detach().cpu().numpy()


def _optimizer_arrays(prefix: str, opt: torch.optim.Adam, out: dict) -> dict:
    state = opt.state_dict()
    for idx, entry in state["state"].items():
        for name in ("step", "exp_avg", "exp_avg_sq"):
            val = entry[name]
            if torch.is_tensor(val):
                val = val.detach().cpu().numpy()
            out[f"{prefix}.{idx}.{name}"] = np.asarray(val)
    group = state["param_groups"][0]
    return {"lr": group["lr"], "betas": list(group["betas"]),
            "eps": group["eps"], "weight_decay": group["weight_decay"],
            "n_params": sum(len(g["params"]) for g in state["param_groups"])}


def restore_optimizer(opt: torch.optim.Adam, arrays: dict, prefix: str) -> None:
    """Put saved moment estimates back into a freshly built Adam."""
    state = opt.state_dict()
    entries = {}
    for name, arr in arrays.items():
        if not name.startswith(prefix + "."):
            continue
        _, idx, field = name.split(".", 2)
        entry = entries.setdefault(int(idx), {})
        entry[field] = torch.from_numpy(arr)
    state["state"] = entries
    opt.load_state_dict(state)


def save_checkpoint(path, *, mode: str, seed: int, iteration: int,
                    train_config: dict, encoder: AudioEncoder,
                    generator: Generator, discriminator: Discriminator,
                    opt_d=None, opt_g=None) -> None:
    arrays: dict = {}
    _state_arrays("enc", encoder, arrays)
    _state_arrays("gen", generator, arrays)
    _state_arrays("disc", discriminator, arrays)
    opt_meta = {}
    if opt_d is not None:
        opt_meta["d"] = _optimizer_arrays("opt_d", opt_d, arrays)
    if opt_g is not None:
        opt_meta["g"] = _optimizer_arrays("opt_g", opt_g, arrays)
    enc_cfg = asdict(encoder.config)
    enc_cfg["layer_specs"] = [list(s) for s in encoder.config.layer_specs]
    meta = {
        "mode": mode, "seed": seed, "iteration": iteration,
        "train": train_config,
        "encoder": enc_cfg,
        "generator": asdict(generator.config),
        "discriminator": asdict(discriminator.config),
        "opt": opt_meta,
    }
    write_blob(path, KIND, meta, arrays)


def load_checkpoint(path, expect_mode: str | None = None) -> Checkpoint:
    meta, arrays = read_blob(path, expect_kind=KIND)
    if expect_mode is not None and meta["mode"] != expect_mode:
        raise BlobError(f"{path}: checkpoint mode is {meta['mode']!r}, "
                        f"expected {expect_mode!r}")
    enc_cfg = dict(meta["encoder"])
    enc_cfg["layer_specs"] = tuple(tuple(s) for s in enc_cfg["layer_specs"])
    return Checkpoint(
        mode=meta["mode"], seed=meta["seed"], iteration=meta["iteration"],
        train=meta["train"],
        encoder_config=EncoderConfig(**enc_cfg),
        generator_config=GeneratorConfig(**meta["generator"]),
        discriminator_config=DiscriminatorConfig(**meta["discriminator"]),
        arrays=arrays, optimizer_meta=meta.get("opt", {}),
    )
