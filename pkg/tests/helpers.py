"""Shared test utilities: synthetic clips, scalar GRU oracle, finite differences."""

import json
import math
from pathlib import Path

import numpy as np
import torch

from tavg.avi import write_avi

# x, y, w, h -- box size equals the default crop size so resize is identity
FACE_BOX = (20, 16, 64, 64)


def make_face_clip(clip_path, ann_path=None, *, n_frames=90, fps=30,
                   rate=48000, size=96, drop_faces=(), freq=320.0,
                   stereo=False, seed=7):
    """Synthetic talking-head clip with an index watermark inside the face box.

    Frame i carries pixel value i at box-relative position (2, 2), so crops
    reveal which source frame they came from.
    """
    rng = np.random.default_rng(seed)
    x, y, w, h = FACE_BOX
    frames = np.zeros((n_frames, size, size, 3), np.uint8)
    for i in range(n_frames):
        frames[i] = rng.integers(0, 40, (size, size, 3))
        frames[i, y:y + h, x:x + w] = [190, 140 + (i % 60), 90]
        frames[i, y + 2, x + 2] = [i % 256] * 3
    n_samples = int(round(n_frames / fps * rate))
    t = np.arange(n_samples) / rate
    mono = (0.5 * np.sin(2 * np.pi * freq * t) * 32767).astype(np.int16)
    audio = np.stack([mono, mono], axis=1) if stereo else mono
    write_avi(clip_path, frames, audio, fps=fps, sample_rate=rate)
    if ann_path is not None:
        boxes = {str(i): [list(FACE_BOX)] for i in range(n_frames)
                 if i not in set(drop_faces)}
        Path(ann_path).write_text(json.dumps({"boxes": boxes}))
    return frames, mono


def watermark_of(crop: np.ndarray) -> int:
    """Recover the source-frame index from a stored [-1, 1] crop."""
    return int(round((float(crop[2, 2, 0]) + 1.0) * 127.5))


def scalar_gru(xs, h0, w: dict) -> list:
    """Independent scalar recurrence oracle (pure Python floats)."""
    h = float(h0)
    out = []
    for x in xs:
        z = 1.0 / (1.0 + math.exp(-(w["in_update"] * x + w["hid_update"] * h)))
        r = 1.0 / (1.0 + math.exp(-(w["in_reset"] * x + w["hid_reset"] * h)))
        cand = math.tanh(w["in_cand"] * x + r * (w["hid_cand"] * h))
        h = (1.0 - z) * cand + z * h
        out.append(h)
    return out


def set_scalar_weights(cell, w: dict) -> None:
    with torch.no_grad():
        for name, value in w.items():
            getattr(cell, name).weight.fill_(value)


def finite_diff_worst(model, forward, n_check, *, seed=0, step=1e-6,
                      floor=1e-5):
    """Worst relative error between autograd and central finite differences.

    `forward` must be deterministic (eval-mode batch norm, fixed inputs).
    The denominator is floored at 1e-5: below that, central differences at
    step 1e-6 are dominated by f64 roundoff (|loss|*eps/step ~ 1e-10), so a
    pure relative comparison would measure noise, not gradients.
    Returns (worst_rel_error, n_checked).
    """
    params = list(model.parameters())
    loss = forward()
    grads = torch.autograd.grad(loss, params)
    rng = np.random.default_rng(seed)
    flat = [(i, j) for i, p in enumerate(params) for j in range(p.numel())]
    picks = rng.choice(len(flat), size=min(n_check, len(flat)), replace=False)
    worst = 0.0
    with torch.no_grad():
        for k in picks:
            i, j = flat[k]
            view = params[i].view(-1)
            orig = view[j].item()
            view[j] = orig + step
            plus = forward().item()
            view[j] = orig - step
            minus = forward().item()
            view[j] = orig
            fd = (plus - minus) / (2 * step)
            ad = grads[i].view(-1)[j].item()
            worst = max(worst, abs(ad - fd) / max(abs(ad), abs(fd), floor))
    return worst, len(picks)


def write_wav(path, samples: np.ndarray, rate: int, channels: int = 1) -> None:
    import wave
    data = np.clip(samples * 32767, -32768, 32767).astype("<i2")
    if channels == 2 and data.ndim == 1:
        data = np.stack([data, data], axis=1)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(channels)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(data.tobytes())


def dir_fingerprint(directory) -> dict:
    """Relative path -> file bytes for byte-identity comparisons."""
    directory = Path(directory)
    return {str(p.relative_to(directory)): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file()}
