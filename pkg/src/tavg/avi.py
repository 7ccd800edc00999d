"""Minimal AVI (RIFF) reader/writer for uncompressed RGB video + PCM audio.

Scope: BI_RGB 24-bit video ('DIB ', bottom-up BGR rows padded to 4 bytes)
and 16-bit PCM audio, one stream of each. This is the interchange format
the pipeline ingests; anything else must be transcoded first, e.g.

    ffmpeg -i input.mp4 -c:v rawvideo -pix_fmt bgr24 -c:a pcm_s16le out.avi

Chunks are little-endian and word-aligned per RIFF rules.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


from .errors import DataError


class AviError(DataError):
    """Unreadable, unsupported, or malformed AVI input."""


@dataclass
class AviClip:
    frames: np.ndarray | None  # (N, H, W, 3) uint8 RGB
    fps: float | None
    audio: np.ndarray | None   # (S,) or (S, channels) int16
    sample_rate: int | None


def _chunk(fourcc: bytes, payload: bytes) -> bytes:
    data = fourcc + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        data += b"\x00"
    return data


def _list(kind: bytes, payload: bytes) -> bytes:
    return _chunk(b"LIST", kind + payload)


def _video_headers(n_frames, width, height, fps, row_bytes):
    strh = struct.pack("<4s4sIHHIIIIIIIi4h", b"vids", b"DIB ", 0, 0, 0, 0,
                       1, fps, 0, n_frames, row_bytes * height, 0, 0,
                       0, 0, width, height)
    # negative biHeight = top-down rows; the common ffmpeg rawvideo layout
    strf = struct.pack("<IiiHHIIiiII", 40, width, -height, 1, 24, 0,
                       row_bytes * height, 0, 0, 0, 0)
    return _list(b"strl", _chunk(b"strh", strh) + _chunk(b"strf", strf))


def _audio_headers(n_samples, rate, channels):
    block = 2 * channels
    strh = struct.pack("<4s4sIHHIIIIIIIi4h", b"auds", b"\x00\x00\x00\x00",
                       0, 0, 0, 0, 1, rate, 0, n_samples, rate * block, 0,
                       block, 0, 0, 0, 0)
    strf = struct.pack("<HHIIHH", 1, channels, rate, rate * block, block, 16)
    return _list(b"strl", _chunk(b"strh", strh) + _chunk(b"strf", strf))


def write_avi(path, frames: np.ndarray | None, audio: np.ndarray | None,
              fps: int = 30, sample_rate: int = 16000,
              drop_frame_indices=()) -> None:
    """Write an uncompressed AVI; either stream may be omitted (tests use this).

    `drop_frame_indices` writes zero-length video chunks at those positions,
    which readers treat as variable-frame-rate input.
    """
    if frames is None and audio is None:
        raise ValueError("need at least one stream")
    streams = []
    movi = bytearray()
    n_frames = 0
    width = height = 0
    if frames is not None:
        frames = np.asarray(frames, dtype=np.uint8)
        if frames.ndim != 4 or frames.shape[3] != 3 or frames.shape[0] == 0:
            raise ValueError("frames must be a nonempty (N, H, W, 3) array")
        n_frames, height, width = frames.shape[:3]
        row_bytes = (width * 3 + 3) // 4 * 4
        streams.append(_video_headers(n_frames, width, height, fps, row_bytes))
    if audio is not None:
        audio = np.asarray(audio, dtype=np.int16)
        if audio.ndim == 1:
            audio = audio[:, None]
        if audio.ndim != 2 or audio.shape[1] not in (1, 2):
            raise ValueError("audio must be (S,) or (S, 1|2) int16")
        channels = audio.shape[1]
        streams.append(_audio_headers(audio.shape[0], sample_rate, channels))

    vid_id = b"00db"
    aud_id = (b"01wb" if frames is not None else b"00wb")

    def frame_payload(i):
        if i in drop_frame_indices:
            return b""
        bgr = frames[i][:, :, ::-1]  # top-down rows, BGR order
        row_bytes = (width * 3 + 3) // 4 * 4
        pad = row_bytes - width * 3
        if pad:
            padded = np.zeros((height, row_bytes), dtype=np.uint8)
            padded[:, :width * 3] = bgr.reshape(height, width * 3)
            return padded.tobytes()
        return np.ascontiguousarray(bgr).tobytes()

    if frames is not None:
        total = audio.shape[0] if audio is not None else 0
        for i in range(n_frames):
            movi += _chunk(vid_id, frame_payload(i))
            if audio is not None:
                lo = round(i * total / n_frames)
                hi = total if i == n_frames - 1 else round((i + 1) * total / n_frames)
                movi += _chunk(aud_id, audio[lo:hi].tobytes())
    elif audio is not None:
        movi += _chunk(aud_id, audio.tobytes())

    micro_per_frame = int(round(1e6 / fps)) if frames is not None else 0
    avih = struct.pack("<IIIIIIIIII4I", micro_per_frame, 0, 0, 0x10,
                       n_frames, 0, len(streams), 0, width, height,
                       0, 0, 0, 0)
    hdrl = _list(b"hdrl", _chunk(b"avih", avih) + b"".join(streams))
    body = b"AVI " + hdrl + _list(b"movi", bytes(movi))
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def _iter_chunks(buf: bytes, start: int, end: int):
    pos = start
    while pos + 8 <= end:
        fourcc = buf[pos:pos + 4]
        (size,) = struct.unpack_from("<I", buf, pos + 4)
        data_start = pos + 8
        if data_start + size > end:
            raise AviError("truncated chunk")
        yield fourcc, data_start, size
        pos = data_start + size + (size % 2)


def read_avi(path) -> AviClip:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise AviError(f"cannot read {path}: {exc}") from exc
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"AVI ":
        raise AviError(f"{path}: unreadable file (not an AVI container)")

    stream_types = []   # per stream index: "vids"/"auds"
    video = {}
    audio = {}
    movi_span = None

    for fourcc, start, size in _iter_chunks(buf, 12, len(buf)):
        if fourcc != b"LIST":
            continue
        kind = buf[start:start + 4]
        if kind == b"hdrl":
            for f2, s2, n2 in _iter_chunks(buf, start + 4, start + size):
                if f2 != b"LIST" or buf[s2:s2 + 4] != b"strl":
                    continue
                stype = None
                for f3, s3, n3 in _iter_chunks(buf, s2 + 4, s2 + n2):
                    if f3 == b"strh":
                        stype = buf[s3:s3 + 4].decode("ascii", "replace")
                        scale, rate = struct.unpack_from("<II", buf, s3 + 20)
                        if stype == "vids":
                            video["fps"] = rate / max(scale, 1)
                    elif f3 == b"strf" and stype == "vids":
                        (_, w, h, _, bits, comp) = struct.unpack_from(
                            "<IiiHHI", buf, s3)
                        video.update(width=w, height=abs(h), bits=bits,
                                     compression=comp, topdown=h < 0)
                    elif f3 == b"strf" and stype == "auds":
                        fmt, ch, sr, _, _, bits = struct.unpack_from(
                            "<HHIIHH", buf, s3)
                        audio.update(format=fmt, channels=ch, rate=sr,
                                     bits=bits)
                stream_types.append(stype)
        elif kind == b"movi":
            movi_span = (start + 4, start + size)

    if movi_span is None:
        raise AviError(f"{path}: no movi data")

    frame_chunks = []
    audio_bytes = bytearray()
    for fourcc, start, size in _iter_chunks(buf, *movi_span):
        try:
            stream = int(fourcc[:2])
        except ValueError:
            continue
        tag = fourcc[2:]
        stype = stream_types[stream] if stream < len(stream_types) else None
        if stype == "vids" and tag in (b"db", b"dc"):
            frame_chunks.append(buf[start:start + size])
        elif stype == "auds" and tag == b"wb":
            audio_bytes += buf[start:start + size]

    frames = None
    fps = None
    if "vids" in stream_types:
        if video.get("compression", 0) != 0 or video.get("bits") != 24:
            raise AviError(f"{path}: only uncompressed 24-bit RGB video "
                           f"is supported")
        if not frame_chunks:
            raise AviError(f"{path}: missing video stream data")
        w, h = video["width"], video["height"]
        row_bytes = (w * 3 + 3) // 4 * 4
        decoded = []
        for chunk in frame_chunks:
            if len(chunk) == 0:
                raise AviError(f"{path}: variable frame rate (dropped "
                               f"frames) is not supported")
            if len(chunk) != row_bytes * h:
                raise AviError(f"{path}: video chunk size mismatch")
            rows = np.frombuffer(chunk, dtype=np.uint8).reshape(h, row_bytes)
            bgr = rows[:, :w * 3].reshape(h, w, 3)
            if not video.get("topdown"):
                bgr = bgr[::-1]
            decoded.append(bgr[:, :, ::-1].copy())
        frames = np.stack(decoded)
        fps = video["fps"]

    audio_arr = None
    rate = None
    if "auds" in stream_types:
        if audio.get("format") != 1 or audio.get("bits") != 16:
            raise AviError(f"{path}: only 16-bit PCM audio is supported")
        samples = np.frombuffer(bytes(audio_bytes), dtype="<i2")
        ch = audio["channels"]
        if ch > 1:
            samples = samples[:len(samples) // ch * ch].reshape(-1, ch)
        audio_arr = samples
        rate = audio["rate"]

    return AviClip(frames=frames, fps=fps, audio=audio_arr, sample_rate=rate)
