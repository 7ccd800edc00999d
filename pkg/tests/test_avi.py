import cv2
import numpy as np
import pytest

from tavg.avi import AviError, read_avi, write_avi


def random_frames(n=6, h=24, w=25, seed=0):
    # odd width exercises 4-byte row padding
    return np.random.default_rng(seed).integers(0, 256, (n, h, w, 3),
                                                dtype=np.uint8)


def test_round_trip_video_and_audio(tmp_path):
    frames = random_frames()
    audio = (np.random.default_rng(1).standard_normal(8000) * 9000) \
        .astype(np.int16)
    path = tmp_path / "clip.avi"
    write_avi(path, frames, audio, fps=30, sample_rate=48000)
    clip = read_avi(path)
    assert np.array_equal(clip.frames, frames)
    assert clip.fps == 30.0
    assert np.array_equal(clip.audio.ravel(), audio)
    assert clip.sample_rate == 48000


def test_opencv_decodes_identically(tmp_path):
    """Independent decode oracle: cv2's bundled ffmpeg reads the same pixels."""
    frames = random_frames(n=5, h=32, w=32, seed=3)
    path = tmp_path / "clip.avi"
    write_avi(path, frames, None, fps=30)
    cap = cv2.VideoCapture(str(path))
    seen = 0
    while True:
        ok, img = cap.read()
        if not ok:
            break
        assert np.array_equal(img[:, :, ::-1], frames[seen])
        seen += 1
    cap.release()
    assert seen == len(frames)


def test_stereo_audio_preserved(tmp_path):
    stereo = np.random.default_rng(2).integers(-3000, 3000, (500, 2),
                                               dtype=np.int16)
    path = tmp_path / "clip.avi"
    write_avi(path, random_frames(3), stereo, sample_rate=44100)
    clip = read_avi(path)
    assert clip.audio.shape == (500, 2)
    assert np.array_equal(clip.audio, stereo)


def test_audio_only_and_video_only(tmp_path):
    path = tmp_path / "a.avi"
    audio = np.zeros(100, np.int16)
    write_avi(path, None, audio, sample_rate=16000)
    clip = read_avi(path)
    assert clip.frames is None and clip.sample_rate == 16000

    write_avi(path, random_frames(2), None)
    clip = read_avi(path)
    assert clip.audio is None and clip.frames.shape[0] == 2


def test_dropped_frames_rejected_as_variable_rate(tmp_path):
    path = tmp_path / "vfr.avi"
    write_avi(path, random_frames(5), np.zeros(800, np.int16),
              drop_frame_indices={2})
    with pytest.raises(AviError, match="variable frame rate"):
        read_avi(path)


def test_garbage_file_rejected(tmp_path):
    path = tmp_path / "junk.avi"
    path.write_bytes(b"this is not a RIFF container at all")
    with pytest.raises(AviError, match="unreadable"):
        read_avi(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "cut.avi"
    write_avi(path, random_frames(3), None)
    raw = path.read_bytes()
    path.write_bytes(raw[:len(raw) // 2])
    with pytest.raises(AviError):
        read_avi(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(AviError, match="cannot read"):
        read_avi(tmp_path / "absent.avi")


def test_writer_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_avi(tmp_path / "x.avi", None, None)
    with pytest.raises(ValueError):
        write_avi(tmp_path / "x.avi", np.zeros((0, 4, 4, 3), np.uint8), None)


def test_deterministic_bytes(tmp_path):
    frames = random_frames()
    audio = np.arange(1000, dtype=np.int16)
    a, b = tmp_path / "a.avi", tmp_path / "b.avi"
    write_avi(a, frames, audio)
    write_avi(b, frames, audio)
    assert a.read_bytes() == b.read_bytes()
