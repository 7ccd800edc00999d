"""Dataset builder: decode video, align audio with frames, crop faces, persist pairs.

Alignment arithmetic at 16 kHz / 30 fps: segment k owns audio samples
[1600k, 1600(k+1)) and frames {3k, 3k+1, 3k+2}; baseline second s owns
samples [16000s, 16000(s+1)) and the middle frame 30s + 15. Trailing
partial segments are discarded, never padded.
"""

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, gcd
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from scipy.signal import resample_poly

from .avi import read_avi
from .errors import DataError
from .faces import FaceDetector

TARGET_RATE = 16000
SEGMENT_SAMPLES = 1600      # 0.1 s at 16 kHz
SECOND_SAMPLES = 16000
FRAMES_PER_SEGMENT = 3
CONFORMING_FPS = 30
PEAK_FLOOR = 1e-8


class DatasetError(DataError):
    pass


@dataclass
class AudioTrack:
    sample_rate: int
    samples: np.ndarray  # mono float32 amplitudes in [-1, 1]

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("audio must be mono (1-D)")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite amplitudes")


@dataclass
class FrameSequence:
    fps: float
    frames: np.ndarray  # (N, H, W, 3) float32 RGB in [0, 1]

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValueError("frames must be an (N, H, W, 3) array")

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class CandidateGroup:
    index: int
    audio: np.ndarray            # 1600 samples, not yet normalized
    frame_indices: tuple
    frames: np.ndarray           # (3, H, W, 3) in [0, 1]


@dataclass
class PairedSample:
    index: int
    audio: np.ndarray   # 1600 float32, peak-normalized
    frames: np.ndarray  # (3, S, S, 3) float32 in [-1, 1]

    def __post_init__(self):
        self.audio = np.asarray(self.audio, dtype=np.float32)
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.audio.shape != (SEGMENT_SAMPLES,):
            raise ValueError(f"paired audio must hold {SEGMENT_SAMPLES} samples")
        if self.frames.ndim != 4 or self.frames.shape[0] != FRAMES_PER_SEGMENT \
                or self.frames.shape[3] != 3:
            raise ValueError("paired frames must be (3, S, S, 3)")


@dataclass
class BaselinePair:
    index: int
    audio: np.ndarray  # 16000 float32
    frame: np.ndarray  # (S, S, 3) float32 in [-1, 1]

    def __post_init__(self):
        self.audio = np.asarray(self.audio, dtype=np.float32)
        self.frame = np.asarray(self.frame, dtype=np.float32)
        if self.audio.shape != (SECOND_SAMPLES,):
            raise ValueError(f"baseline audio must hold {SECOND_SAMPLES} samples")
        if self.frame.ndim != 3 or self.frame.shape[2] != 3:
            raise ValueError("baseline frame must be (S, S, 3)")


@dataclass
class ManifestEntry:
    index: int
    audio_file: str
    frame_files: tuple
    sha256: str


@dataclass
class DatasetManifest:
    mode: str
    sample_count: int
    source_id: str
    image_size: int
    sample_rate: int
    entries: list = field(default_factory=list)


@dataclass
class Dataset:
    manifest: DatasetManifest
    samples: list

    @property
    def mode(self) -> str:
        return self.manifest.mode


def read_wav(path) -> AudioTrack:
    """Load a 16-bit PCM WAV at any rate; stereo is averaged to mono."""
    import wave
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getsampwidth() != 2:
                raise DatasetError(f"{path}: only 16-bit PCM WAV is supported")
            rate = wav.getframerate()
            channels = wav.getnchannels()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise DatasetError(f"{path}: not a readable WAV file: {exc}") from exc
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if channels > 1:
        samples = samples[:len(samples) // channels * channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return AudioTrack(sample_rate=rate, samples=samples)


def ingest_video(path):
    """Decode a local clip into (FrameSequence, AudioTrack); stereo is averaged."""
    clip = read_avi(path)
    if clip.frames is None:
        raise DatasetError(f"{path}: missing video stream")
    if clip.audio is None:
        raise DatasetError(f"{path}: missing audio stream")
    frames = clip.frames.astype(np.float32) / 255.0
    audio = clip.audio.astype(np.float32) / 32768.0
    if audio.ndim == 2:
        audio = audio.mean(axis=1)
    return (FrameSequence(fps=clip.fps, frames=frames),
            AudioTrack(sample_rate=clip.sample_rate, samples=audio))


def resample_audio(track: AudioTrack, target_rate: int = TARGET_RATE) -> AudioTrack:
    """Band-limited (windowed-sinc polyphase) resampling to target_rate.

    Output length is round(n * target/source); amplitudes are clipped to
    [-1, 1]. Already-conforming tracks are returned unchanged.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if track.sample_rate == target_rate:
        return track
    g = gcd(track.sample_rate, target_rate)
    up, down = target_rate // g, track.sample_rate // g
    out = resample_poly(track.samples.astype(np.float64), up, down)
    # exact rational length, rounded half up
    n_out = int(floor(Fraction(len(track.samples) * target_rate,
                               track.sample_rate) + Fraction(1, 2)))
    out = out[:n_out]
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return AudioTrack(sample_rate=target_rate,
                      samples=np.clip(out, -1.0, 1.0).astype(np.float32))


def make_candidate_pairs(frames: FrameSequence, audio: AudioTrack) -> list:
    """Group 0.1 s audio segments with their 3 consecutive frames."""
    if audio.sample_rate != TARGET_RATE:
        raise ValueError(f"audio must be resampled to {TARGET_RATE} Hz first")
    if frames.fps != CONFORMING_FPS:
        raise ValueError(f"conforming inputs run at {CONFORMING_FPS} fps, "
                         f"got {frames.fps}")
    n = min(len(audio.samples) // SEGMENT_SAMPLES,
            len(frames) // FRAMES_PER_SEGMENT)
    groups = []
    for k in range(n):
        idx = tuple(FRAMES_PER_SEGMENT * k + t
                    for t in range(FRAMES_PER_SEGMENT))
        groups.append(CandidateGroup(
            index=k,
            audio=audio.samples[SEGMENT_SAMPLES * k:SEGMENT_SAMPLES * (k + 1)],
            frame_indices=idx,
            frames=frames.frames[list(idx)]))
    return groups


def pixels_from_uint8(values: np.ndarray) -> np.ndarray:
    """8-bit channel values -> float32 pixels in [-1, 1] (writer's inverse)."""
    return (values.astype(np.float64) / 255.0 * 2.0 - 1.0).astype(np.float32)


def uint8_from_pixels(pixels: np.ndarray) -> np.ndarray:
    scaled = np.rint((pixels.astype(np.float64) + 1.0) * 127.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def detect_and_crop(frame: np.ndarray, detector: FaceDetector,
                    out_size: int = 64, frame_index: int = 0):
    """Crop the largest detected face, resized to out_size and scaled to [-1, 1].

    Returns None when no face is found. Crops are quantized to the 8-bit
    grid so the on-disk PNG round trip is exact. Area ties break toward
    the top-left-most box.
    """
    boxes = detector.detect(frame, frame_index)
    if not boxes:
        return None
    best = max(boxes, key=lambda b: (b.area, -b.y, -b.x))
    crop = frame[best.y:best.y + best.h, best.x:best.x + best.w]
    resized = cv2.resize(crop, (out_size, out_size),
                         interpolation=cv2.INTER_LINEAR)
    quantized = np.clip(np.rint(resized.astype(np.float64) * 255), 0, 255)
    return pixels_from_uint8(quantized)


def peak_normalize(samples: np.ndarray) -> np.ndarray:
    peak = max(float(np.max(np.abs(samples))), PEAK_FLOOR)
    return np.clip(samples.astype(np.float64) / peak, -1.0, 1.0).astype(np.float32)


def filter_and_build(candidates, detector: FaceDetector,
                     out_size: int = 64) -> list:
    """Keep groups where all 3 frames yield a face; peak-normalize audio."""
    samples = []
    for group in candidates:
        crops = [detect_and_crop(f, detector, out_size, frame_index=i)
                 for f, i in zip(group.frames, group.frame_indices)]
        if any(c is None for c in crops):
            continue
        samples.append(PairedSample(index=group.index,
                                    audio=peak_normalize(group.audio),
                                    frames=np.stack(crops)))
    return samples


def make_baseline_pairs(frames: FrameSequence, audio: AudioTrack,
                        detector: FaceDetector, out_size: int = 64) -> list:
    """One pair per full second: 1 s audio plus the middle frame of that second."""
    if audio.sample_rate != TARGET_RATE:
        raise ValueError(f"audio must be resampled to {TARGET_RATE} Hz first")
    if frames.fps != CONFORMING_FPS:
        raise ValueError(f"conforming inputs run at {CONFORMING_FPS} fps, "
                         f"got {frames.fps}")
    pairs = []
    n_seconds = len(audio.samples) // SECOND_SAMPLES
    for s in range(n_seconds):
        mid = CONFORMING_FPS * s + CONFORMING_FPS // 2
        if mid >= len(frames):
            break
        crop = detect_and_crop(frames.frames[mid], detector, out_size,
                               frame_index=mid)
        if crop is None:
            continue
        segment = audio.samples[SECOND_SAMPLES * s:SECOND_SAMPLES * (s + 1)]
        pairs.append(BaselinePair(index=s, audio=peak_normalize(segment),
                                  frame=crop))
    return pairs


def _sample_parts(sample):
    if isinstance(sample, PairedSample):
        return sample.audio, sample.frames
    return sample.audio, sample.frame[None]


def write_dataset(samples, out_dir, *, mode: str, source_id: str,
                  image_size: int = 64,
                  sample_rate: int = TARGET_RATE) -> DatasetManifest:
    """Persist samples bit-exactly: raw f32 audio, 8-bit PNG frames, TSV manifest."""
    if mode not in ("triplet", "baseline"):
        raise ValueError(f"unknown dataset mode {mode!r}")
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)

    entries = []
    for sample in samples:
        audio, frames = _sample_parts(sample)
        audio_rel = f"audio/{sample.index}.f32"
        audio_bytes = audio.astype("<f4").tobytes()
        (out_dir / audio_rel).write_bytes(audio_bytes)
        digest = hashlib.sha256(audio_bytes)
        frame_rels = []
        for t, frame in enumerate(frames):
            rel = f"frames/{sample.index}_{t}.png"
            Image.fromarray(uint8_from_pixels(frame)).save(out_dir / rel)
            digest.update((out_dir / rel).read_bytes())
            frame_rels.append(rel)
        entries.append(ManifestEntry(sample.index, audio_rel,
                                     tuple(frame_rels), digest.hexdigest()))

    manifest = DatasetManifest(mode=mode, sample_count=len(entries),
                               source_id=source_id, image_size=image_size,
                               sample_rate=sample_rate, entries=entries)
    lines = [f"mode\t{mode}",
             f"source_id\t{source_id}",
             f"image_size\t{image_size}",
             f"sample_rate\t{sample_rate}",
             f"sample_count\t{len(entries)}",
             "index\taudio\tframes\tsha256"]
    for e in entries:
        lines.append(f"{e.index}\t{e.audio_file}\t{','.join(e.frame_files)}"
                     f"\t{e.sha256}")
    (out_dir / "manifest.tsv").write_text("\n".join(lines) + "\n")
    return manifest


def load_dataset(directory) -> Dataset:
    """Load a dataset directory, verifying files and checksums."""
    directory = Path(directory)
    manifest_path = directory / "manifest.tsv"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.tsv in {directory}")
    lines = manifest_path.read_text().splitlines()

    headers = {}
    rows = []
    in_rows = False
    for line in lines:
        if not line.strip():
            continue
        cells = line.split("\t")
        if not in_rows:
            if cells[0] == "index":
                if cells != ["index", "audio", "frames", "sha256"]:
                    raise DatasetError(f"{manifest_path}: bad column header")
                in_rows = True
                continue
            if len(cells) != 2:
                raise DatasetError(f"{manifest_path}: malformed header line "
                                   f"{line!r}")
            headers[cells[0]] = cells[1]
        else:
            if len(cells) != 4:
                raise DatasetError(f"{manifest_path}: malformed row {line!r}")
            rows.append(cells)

    required = ("mode", "source_id", "image_size", "sample_rate", "sample_count")
    missing = [k for k in required if k not in headers]
    if missing:
        raise DatasetError(f"{manifest_path}: missing header keys {missing}")
    mode = headers["mode"]
    if mode not in ("triplet", "baseline"):
        raise DatasetError(f"{manifest_path}: unknown mode {mode!r}")
    try:
        image_size = int(headers["image_size"])
        sample_rate = int(headers["sample_rate"])
        sample_count = int(headers["sample_count"])
    except ValueError as exc:
        raise DatasetError(f"{manifest_path}: non-integer header value: "
                           f"{exc}") from exc
    if sample_count != len(rows):
        raise DatasetError(f"{manifest_path}: sample_count {sample_count} "
                           f"!= {len(rows)} rows")

    expect_audio = SEGMENT_SAMPLES if mode == "triplet" else SECOND_SAMPLES
    expect_frames = FRAMES_PER_SEGMENT if mode == "triplet" else 1
    entries = []
    samples = []
    for cells in rows:
        index = int(cells[0])
        audio_rel, frame_rels = cells[1], cells[2].split(",")
        audio_path = directory / audio_rel
        if not audio_path.exists():
            raise DatasetError(f"missing referenced file: {audio_path}")
        audio_bytes = audio_path.read_bytes()
        digest = hashlib.sha256(audio_bytes)
        audio = np.frombuffer(audio_bytes, dtype="<f4")
        if len(audio) != expect_audio:
            raise DatasetError(f"{audio_path}: expected {expect_audio} "
                               f"samples, found {len(audio)}")
        if len(frame_rels) != expect_frames:
            raise DatasetError(f"sample {index}: expected {expect_frames} "
                               f"frame files, found {len(frame_rels)}")
        frames = []
        for rel in frame_rels:
            frame_path = directory / rel
            if not frame_path.exists():
                raise DatasetError(f"missing referenced file: {frame_path}")
            digest.update(frame_path.read_bytes())
            img = np.asarray(Image.open(frame_path).convert("RGB"))
            frames.append(pixels_from_uint8(img))
        if digest.hexdigest() != cells[3]:
            raise DatasetError(f"checksum mismatch for sample {index} "
                               f"(dataset corrupt)")
        entries.append(ManifestEntry(index, audio_rel, tuple(frame_rels),
                                     cells[3]))
        if mode == "triplet":
            samples.append(PairedSample(index, audio.copy(), np.stack(frames)))
        else:
            samples.append(BaselinePair(index, audio.copy(), frames[0]))

    manifest = DatasetManifest(mode=mode, sample_count=sample_count,
                               source_id=headers["source_id"],
                               image_size=image_size, sample_rate=sample_rate,
                               entries=entries)
    return Dataset(manifest=manifest, samples=samples)


def build_dataset(video_path, out_dir, detector: FaceDetector, *,
                  mode: str = "triplet", image_size: int = 64):
    """Full pipeline: ingest -> resample -> pair -> filter -> write.

    Returns (manifest, written_count, excluded_count).
    """
    frames, audio = ingest_video(video_path)
    audio = resample_audio(audio)
    if mode == "triplet":
        candidates = make_candidate_pairs(frames, audio)
        samples = filter_and_build(candidates, detector, image_size)
        excluded = len(candidates) - len(samples)
    elif mode == "baseline":
        n_possible = len(audio.samples) // SECOND_SAMPLES
        samples = make_baseline_pairs(frames, audio, detector, image_size)
        excluded = n_possible - len(samples)
    else:
        raise ValueError(f"unknown dataset mode {mode!r}")
    manifest = write_dataset(samples, out_dir, mode=mode,
                             source_id=Path(video_path).stem,
                             image_size=image_size)
    return manifest, len(samples), excluded
