"""Per-frame quality metrics (MSE, SSIM, LPIPS) and dataset-level evaluation."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy.signal import convolve2d
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint
from .serial import read_blob, write_blob
from .trainer import MODE_TO_DATASET

# Table-1 row order.
CONDITION_ORDER = ("baseline", "no_gru", "with_gru")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all pixels and channels."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 2.0  # pixels live in [-1, 1]

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("K1 and K2 must be positive")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError("window_size must be a positive odd integer")

    def window(self) -> np.ndarray:
        half = self.window_size // 2
        coords = np.arange(-half, half + 1, dtype=np.float64)
        g = np.exp(-(coords ** 2) / (2 * self.sigma ** 2))
        win = np.outer(g, g)
        return win / win.sum()


def _ssim_single(a, b, params: SsimParams) -> float:
    win = params.window()
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a, b, params: SsimParams = SsimParams()) -> float:
    """Windowed structural similarity; RGB images average per-channel SSIM."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise ValueError("images must be (H, W) or (H, W, C)")
    if min(a.shape[0], a.shape[1]) < params.window_size:
        raise ValueError(f"image smaller than the {params.window_size}x"
                         f"{params.window_size} window")
    if a.ndim == 2:
        return _ssim_single(a, b, params)
    return float(np.mean([_ssim_single(a[..., c], b[..., c], params)
                          for c in range(a.shape[2])]))


class RandomConvExtractor(nn.Module):
    """Seed-deterministic random conv stack used as the LPIPS feature backbone.

    This is an LPIPS-style perceptual distance, not reference LPIPS: random
    (but fixed) filters stand in for a pretrained network so results are
    reproducible without downloaded weights. Externally trained filters can
    be loaded through ExternalConvExtractor instead.
    """

    def __init__(self, seed: int = 1234, channels=(8, 16, 32),
                 kernel: int = 3, stride: int = 2, slope: float = 0.2):
        super().__init__()
        self.meta = {"channels": list(channels), "kernel": kernel,
                     "stride": stride, "slope": slope}
        gen = torch.Generator().manual_seed(seed)
        convs = []
        c_in = 3
        for c_out in channels:
            conv = nn.Conv2d(c_in, c_out, kernel, stride=stride,
                             padding=kernel // 2)
            with torch.no_grad():
                fan_in = c_in * kernel * kernel
                conv.weight.normal_(0.0, fan_in ** -0.5, generator=gen)
                conv.bias.zero_()
            convs.append(conv)
            c_in = c_out
        self.convs = nn.ModuleList(convs)
        self.slope = slope

    def extract(self, image: np.ndarray) -> list:
        x = torch.from_numpy(np.asarray(image, dtype=np.float32))
        x = x.permute(2, 0, 1).unsqueeze(0)
        feats = []
        with torch.no_grad():
            for conv in self.convs:
                x = torch.nn.functional.leaky_relu(conv(x), self.slope)
                feats.append(x.squeeze(0).numpy().astype(np.float64))
        return feats


class ExternalConvExtractor(RandomConvExtractor):
    """Feature stack loaded from a weight file (see save_extractor)."""

    def __init__(self, path):
        meta, arrays = read_blob(path, expect_kind="features")
        super().__init__(seed=0, channels=meta["channels"],
                         kernel=meta["kernel"], stride=meta["stride"],
                         slope=meta["slope"])
        with torch.no_grad():
            for i, conv in enumerate(self.convs):
                conv.weight.copy_(torch.from_numpy(arrays[f"layer{i}.weight"]))
                conv.bias.copy_(torch.from_numpy(arrays[f"layer{i}.bias"]))


def save_extractor(extractor: RandomConvExtractor, path) -> None:
    arrays = {}
    for i, conv in enumerate(extractor.convs):
        arrays[f"layer{i}.weight"] = conv.weight.detach().numpy()
        arrays[f"layer{i}.bias"] = conv.bias.detach().numpy()
    write_blob(path, "features", extractor.meta, arrays)


def _unit_normalize(feat: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(feat ** 2, axis=0, keepdims=True) + 1e-10)
    return feat / norm


def lpips(a, b, extractor=None) -> float:
    """Sum over layers of mean squared difference of unit-normalized features."""
    if extractor is None:
        extractor = default_extractor()
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    total = 0.0
    for fa, fb in zip(extractor.extract(a), extractor.extract(b)):
        total += float(np.mean((_unit_normalize(fa) - _unit_normalize(fb)) ** 2))
    return total


_DEFAULT_EXTRACTOR = None


def default_extractor() -> RandomConvExtractor:
    global _DEFAULT_EXTRACTOR
    if _DEFAULT_EXTRACTOR is None:
        _DEFAULT_EXTRACTOR = RandomConvExtractor()
    return _DEFAULT_EXTRACTOR


@dataclass
class MetricRow:
    condition: str
    mse: float
    ssim: float
    lpips: float


@dataclass
class MetricReport:
    rows: list

    def write_tsv(self, path) -> None:
        lines = ["condition\tmse\tssim\tlpips"]
        for r in self.rows:
            lines.append(f"{r.condition}\t{r.mse:.6f}\t{r.ssim:.6f}"
                         f"\t{r.lpips:.6f}")
        Path(path).write_text("\n".join(lines) + "\n")


def _sample_truth(sample) -> np.ndarray:
    if hasattr(sample, "frames"):
        return np.asarray(sample.frames, dtype=np.float32)
    return np.asarray(sample.frame, dtype=np.float32)[None]


def generate_for_sample(sample, encoder, generator_net, seed: int) -> np.ndarray:
    """Seeded synthesis for one sample; noise depends only on (seed, index)."""
    rng = torch.Generator().manual_seed((seed * 1_000_003 + sample.index)
                                        & 0x7FFFFFFFFFFF)
    audio = torch.from_numpy(np.asarray(sample.audio, dtype=np.float32))
    with torch.no_grad():
        y = encoder(audio.unsqueeze(0))
    z = torch.randn(1, generator_net.config.noise_dim, generator=rng)
    from .generator import generate
    frames = generate(z, y, generator_net).squeeze(0)
    return frames.permute(0, 2, 3, 1).numpy()


def evaluate(conditions: dict, dataset, *, seed: int = 0,
             ssim_params: SsimParams = SsimParams(), extractor=None,
             grid_dir=None, grid_samples: int = 8) -> MetricReport:
    """Per-condition mean MSE/SSIM/LPIPS over a dataset, rows in Table order.

    `conditions` maps a condition name (mode) to a checkpoint path or
    Checkpoint, or to "identity" to score the ground truth against itself.
    `dataset` is a Dataset, or a {"triplet": ..., "baseline": ...} mapping
    when conditions span both regimes. Per-sample noise is keyed by sample
    index, so the reported means are invariant to sample ordering.
    """
    datasets = dataset if isinstance(dataset, dict) else {dataset.mode: dataset}
    if not conditions:
        raise ValueError("no conditions supplied")
    if any(not list(ds.samples) for ds in datasets.values()):
        raise ValueError("empty evaluation set")
    if extractor is None:
        extractor = default_extractor()

    names = [c for c in CONDITION_ORDER if c in conditions]
    names += sorted(set(conditions) - set(names))
    rows = []
    for name in names:
        needed = MODE_TO_DATASET[name] if name in MODE_TO_DATASET else None
        if needed is not None and needed not in datasets:
            raise ValueError(f"condition {name!r} needs a {needed} dataset")
        samples = list(datasets[needed].samples) if needed is not None \
            else list(next(iter(datasets.values())).samples)

        source = conditions[name]
        if isinstance(source, str) and source == "identity":
            synth = None
        else:
            ckpt = source if isinstance(source, Checkpoint) \
                else load_checkpoint(source, expect_mode=name)
            if ckpt.mode != name:
                raise ValueError(f"checkpoint for condition {name!r} "
                                 f"was trained in mode {ckpt.mode!r}")
            encoder, gen_net, _ = ckpt.build_models()
            encoder.eval()
            synth = (encoder, gen_net)

        per_sample = {}
        grids = []
        for sample in samples:
            truth = _sample_truth(sample)
            if synth is None:
                produced = truth
            else:
                produced = generate_for_sample(sample, synth[0], synth[1], seed)
            vals = np.array([[mse(t, p), ssim(t, p, ssim_params),
                              lpips(t, p, extractor)]
                             for t, p in zip(truth, produced)])
            per_sample[sample.index] = vals.mean(axis=0)
            if grid_dir is not None and len(grids) < grid_samples:
                grids.append((truth, produced))
        ordered = np.stack([per_sample[k] for k in sorted(per_sample)])
        means = ordered.mean(axis=0)
        rows.append(MetricRow(name, float(means[0]), float(means[1]),
                              float(means[2])))
        if grid_dir is not None:
            from .plotting import save_frame_grid
            Path(grid_dir).mkdir(parents=True, exist_ok=True)
            save_frame_grid(grids, Path(grid_dir) / f"{name}.png",
                            title=f"{name}: real (top pair rows) vs generated")
    return MetricReport(rows)
