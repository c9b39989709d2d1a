"""Binary clip-mask files (.gbm).

Layout: magic "GBM1", then little-endian u32 version (=1), T, H, W, then
T*H*W payload bytes in (t, y, x) row-major order, each byte being
round(p * 255). One file per clip, named <video_id>/clip_<index>.gbm.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GBM1"
VERSION = 1
HEADER = struct.Struct("<4sIIII")


class MaskFormatError(ValueError):
    """Malformed mask file; byte_offset points at the offending field."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


def encode_mask(mask: np.ndarray) -> bytes:
    mask = np.asarray(mask)
    if mask.ndim != 3:
        raise ValueError(f"expected (T, H, W) volume, got shape {mask.shape}")
    if mask.dtype == np.uint8:
        payload = mask
    else:
        if mask.size and (mask.min() < 0.0 or mask.max() > 1.0):
            raise ValueError("mask probabilities outside [0, 1]")
        payload = np.rint(np.asarray(mask, dtype=np.float64) * 255.0).astype(np.uint8)
    t, h, w = mask.shape
    return HEADER.pack(MAGIC, VERSION, t, h, w) + payload.tobytes()


def decode_mask(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise MaskFormatError(
            f"truncated header: {len(data)} bytes, need {HEADER.size}", len(data)
        )
    magic, version, t, h, w = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MaskFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise MaskFormatError(f"unsupported version {version}", 4)
    expected = HEADER.size + t * h * w
    if len(data) != expected:
        raise MaskFormatError(
            f"payload size mismatch: file has {len(data)} bytes, header implies {expected}",
            HEADER.size,
        )
    payload = np.frombuffer(data, dtype=np.uint8, offset=HEADER.size)
    return payload.reshape(t, h, w).astype(np.float64) / 255.0


def write_mask(path, mask: np.ndarray) -> None:
    Path(path).write_bytes(encode_mask(mask))


def read_mask(path) -> np.ndarray:
    return decode_mask(Path(path).read_bytes())


def clip_path(root, video_id: str, clip_index: int) -> Path:
    return Path(root) / video_id / f"clip_{clip_index}.gbm"


def list_clips(root, video_id: str) -> list[Path]:
    """Clip files of a video in index order; gaps in the numbering are an
    error because the stream contract needs every clip in sequence."""
    video_dir = Path(root) / video_id
    if not video_dir.is_dir():
        raise FileNotFoundError(f"no mask directory for video {video_id!r} under {root}")
    indexed = {}
    for p in video_dir.glob("clip_*.gbm"):
        try:
            indexed[int(p.stem.split("_", 1)[1])] = p
        except ValueError:
            continue
    if not indexed:
        raise FileNotFoundError(f"no clip files for video {video_id!r} under {root}")
    for k in range(max(indexed) + 1):
        if k not in indexed:
            raise FileNotFoundError(
                f"missing clip file for clip index {k} of video {video_id!r}"
            )
    return [indexed[k] for k in range(max(indexed) + 1)]
