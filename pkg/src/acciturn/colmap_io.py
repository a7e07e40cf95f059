"""Readers (and fixture writers) for COLMAP sparse models, plus per-video pose extraction.

Only ``cameras.*`` and ``images.*`` are consumed. Binary files are little-endian
throughout; 2D point blocks in ``images.bin`` are skipped without decoding.
"""

import logging
import os
import re
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadCount,
    BadLine,
    InputError,
    NonUnitQuaternion,
    Truncated,
    TooFewFrames,
    UnknownCameraModel,
)
from .rotations import quaternion_to_rotation, rotation_angle, relative_rotation

log = logging.getLogger(__name__)

MAX_COUNT = 100_000_000
QUAT_LO, QUAT_HI = 0.999, 1.001
POINT2D_BYTES = 24  # x, y as f64 + point3D id as i64

# model_id -> (name, number of f64 params)
CAMERA_MODELS = {
    0: ("SIMPLE_PINHOLE", 3),
    1: ("PINHOLE", 4),
    2: ("SIMPLE_RADIAL", 4),
    3: ("RADIAL", 5),
    4: ("OPENCV", 8),
    5: ("OPENCV_FISHEYE", 8),
    6: ("FULL_OPENCV", 12),
    7: ("FOV", 5),
    8: ("SIMPLE_RADIAL_FISHEYE", 4),
    9: ("RADIAL_FISHEYE", 5),
    10: ("THIN_PRISM_FISHEYE", 12),
}
CAMERA_MODEL_IDS = {name: mid for mid, (name, _) in CAMERA_MODELS.items()}


@dataclass
class ColmapImageRecord:
    image_id: int
    qvec: np.ndarray  # world-to-camera (w, x, y, z)
    tvec: np.ndarray
    camera_id: int
    name: str

    @property
    def rotation(self):
        return quaternion_to_rotation(self.qvec)


@dataclass
class CameraRecord:
    camera_id: int
    model: str
    width: int
    height: int
    params: np.ndarray


@dataclass
class Frame:
    name: str
    rotation: np.ndarray
    translation: Optional[np.ndarray] = None


@dataclass
class VideoPoses:
    video_id: str
    frames: list = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    @property
    def rotations(self):
        return np.stack([f.rotation for f in self.frames])

    @property
    def names(self):
        return [f.name for f in self.frames]

    def to_dict(self):
        return {
            "video_id": self.video_id,
            "frames": [
                {
                    "name": f.name,
                    "rotation": [float(x) for x in np.asarray(f.rotation).ravel()],
                    "translation": None
                    if f.translation is None
                    else [float(x) for x in np.asarray(f.translation).ravel()],
                }
                for f in self.frames
            ],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            frames = [
                Frame(
                    name=str(fr["name"]),
                    rotation=np.asarray(fr["rotation"], dtype=float).reshape(3, 3),
                    translation=None
                    if fr.get("translation") is None
                    else np.asarray(fr["translation"], dtype=float).reshape(3),
                )
                for fr in d["frames"]
            ]
            return cls(video_id=str(d["video_id"]), frames=frames)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed VideoPoses JSON: {exc}") from exc


def _check_quaternion(q, where):
    n = float(np.linalg.norm(q))
    if not QUAT_LO <= n <= QUAT_HI:
        raise NonUnitQuaternion(f"{where}: quaternion norm {n:.6g} outside [{QUAT_LO}, {QUAT_HI}]")


class _Reader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data, offset=0):
        self.data = memoryview(data)
        self.offset = offset

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise Truncated(self.offset, what)
        out = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return out

    def cstring(self, what):
        end = bytes(self.data[self.offset :]).find(b"\x00")
        if end < 0:
            raise Truncated(len(self.data), what)
        raw = bytes(self.data[self.offset : self.offset + end])
        self.offset += end + 1
        return raw.decode("utf-8")

    def skip(self, n, what):
        if self.offset + n > len(self.data):
            raise Truncated(self.offset, what)
        self.offset += n


def _count(reader, what):
    (n,) = reader.unpack("<Q", f"{what} count")
    if n > MAX_COUNT:
        raise BadCount(f"declared {what} count {n} exceeds {MAX_COUNT}")
    return n


def read_images_binary(data, offset=0):
    """Parse ``images.bin`` bytes starting at ``offset``.

    Returns ``(records, end_offset)``; bytes after ``end_offset`` are untouched.
    """
    r = _Reader(data, offset)
    records = []
    for k in range(_count(r, "image")):
        image_id, qw, qx, qy, qz, tx, ty, tz, camera_id = r.unpack("<i7di", f"image {k} header")
        name = r.cstring(f"image {k} name")
        (n_points,) = r.unpack("<Q", f"image {k} point count")
        if n_points > MAX_COUNT:
            raise BadCount(f"image {image_id}: declared point count {n_points} exceeds {MAX_COUNT}")
        r.skip(n_points * POINT2D_BYTES, f"image {k} points")
        q = np.array([qw, qx, qy, qz])
        _check_quaternion(q, f"image {image_id}")
        records.append(ColmapImageRecord(image_id, q, np.array([tx, ty, tz]), camera_id, name))
    return records, r.offset


def parse_images_binary(data):
    records, end = read_images_binary(data)
    if end != len(data):
        log.debug("ignoring %d trailing bytes after images block", len(data) - end)
    return records


def parse_images_text(text):
    """Parse ``images.txt``: an image line followed by its (possibly empty) points line."""
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if not ln.lstrip().startswith("#")]
    records = []
    for lineno, line in lines[0::2]:
        parts = line.split(maxsplit=9)
        if len(parts) != 10:
            raise BadLine(lineno, f"expected 10 fields, found {len(parts)}")
        try:
            image_id = int(parts[0])
            q = np.array([float(x) for x in parts[1:5]])
            t = np.array([float(x) for x in parts[5:8]])
            camera_id = int(parts[8])
        except ValueError as exc:
            raise BadLine(lineno, str(exc)) from exc
        name = parts[9].strip()
        if not name:
            raise BadLine(lineno, "empty image name")
        _check_quaternion(q, f"line {lineno}")
        records.append(ColmapImageRecord(image_id, q, t, camera_id, name))
    return records


def read_cameras_binary(data, offset=0):
    r = _Reader(data, offset)
    cameras = {}
    for k in range(_count(r, "camera")):
        camera_id, model_id, width, height = r.unpack("<iiQQ", f"camera {k} header")
        if model_id not in CAMERA_MODELS:
            raise UnknownCameraModel(model_id)
        name, n_params = CAMERA_MODELS[model_id]
        params = r.unpack(f"<{n_params}d", f"camera {k} params")
        cameras[camera_id] = CameraRecord(camera_id, name, width, height, np.array(params))
    return cameras, r.offset


def parse_cameras_text(text):
    cameras = {}
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 4:
            raise BadLine(i, f"expected at least 4 fields, found {len(parts)}")
        model = parts[1]
        if model not in CAMERA_MODEL_IDS:
            raise UnknownCameraModel(model)
        n_params = CAMERA_MODELS[CAMERA_MODEL_IDS[model]][1]
        if len(parts) != 4 + n_params:
            raise BadLine(i, f"{model} takes {n_params} params, found {len(parts) - 4}")
        try:
            cameras[int(parts[0])] = CameraRecord(
                int(parts[0]), model, int(parts[2]), int(parts[3]), np.array([float(x) for x in parts[4:]])
            )
        except ValueError as exc:
            raise BadLine(i, str(exc)) from exc
    return cameras


def parse_cameras(data):
    """Camera table from ``cameras.bin`` bytes or ``cameras.txt`` text."""
    if isinstance(data, str):
        return parse_cameras_text(data)
    return read_cameras_binary(data)[0]


# -- writers (fixtures and synthetic exports) --------------------------------


def write_images_binary(records, points=None):
    """Serialize records; ``points`` optionally maps image_id -> point count (filled with zeros)."""
    points = points or {}
    out = [struct.pack("<Q", len(records))]
    for rec in records:
        out.append(struct.pack("<i7di", rec.image_id, *rec.qvec, *rec.tvec, rec.camera_id))
        out.append(rec.name.encode("utf-8") + b"\x00")
        n = points.get(rec.image_id, 0)
        out.append(struct.pack("<Q", n))
        out.append(b"".join(struct.pack("<ddq", 1.5 * i, -2.5 * i, i) for i in range(n)))
    return b"".join(out)


def write_images_text(records):
    lines = [
        "# Image list with two lines of data per image:",
        "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
        "#   POINTS2D[] as (X, Y, POINT3D_ID)",
        f"# Number of images: {len(records)}",
    ]
    for rec in records:
        nums = " ".join(repr(float(x)) for x in (*rec.qvec, *rec.tvec))
        lines.append(f"{rec.image_id} {nums} {rec.camera_id} {rec.name}")
        lines.append("")
    return "\n".join(lines) + "\n"


def write_cameras_binary(cameras):
    out = [struct.pack("<Q", len(cameras))]
    for cam in cameras.values():
        mid = CAMERA_MODEL_IDS[cam.model]
        out.append(struct.pack("<iiQQ", cam.camera_id, mid, cam.width, cam.height))
        out.append(struct.pack(f"<{len(cam.params)}d", *cam.params))
    return b"".join(out)


def write_cameras_text(cameras):
    lines = ["# Camera list with one line of data per camera:", "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]"]
    for cam in cameras.values():
        params = " ".join(repr(float(p)) for p in cam.params)
        lines.append(f"{cam.camera_id} {cam.model} {cam.width} {cam.height} {params}")
    return "\n".join(lines) + "\n"


# -- model directories --------------------------------------------------------


def load_model(model_dir):
    """Read cameras and images from a sparse model directory (``.bin`` preferred over ``.txt``).

    Parser errors are re-raised as :class:`InputError` naming the offending file.
    """

    def pick(stem):
        for ext in (".bin", ".txt"):
            path = os.path.join(model_dir, stem + ext)
            if os.path.isfile(path):
                return path
        raise InputError(f"missing {stem}.bin or {stem}.txt in {model_dir}")

    images_path = pick("images")
    try:
        if images_path.endswith(".bin"):
            with open(images_path, "rb") as fh:
                records = parse_images_binary(fh.read())
        else:
            with open(images_path, encoding="utf-8") as fh:
                records = parse_images_text(fh.read())
    except InputError as exc:
        raise InputError(f"{images_path}: {exc}") from exc

    cameras = {}
    try:
        cam_path = pick("cameras")
    except InputError:
        log.warning("no cameras file in %s; intrinsics unavailable", model_dir)
    else:
        try:
            if cam_path.endswith(".bin"):
                with open(cam_path, "rb") as fh:
                    cameras = parse_cameras(fh.read())
            else:
                with open(cam_path, encoding="utf-8") as fh:
                    cameras = parse_cameras(fh.read())
        except InputError as exc:
            raise InputError(f"{cam_path}: {exc}") from exc
    return cameras, records


def write_model(model_dir, cameras, records, binary=True):
    os.makedirs(model_dir, exist_ok=True)
    if binary:
        with open(os.path.join(model_dir, "cameras.bin"), "wb") as fh:
            fh.write(write_cameras_binary(cameras))
        with open(os.path.join(model_dir, "images.bin"), "wb") as fh:
            fh.write(write_images_binary(records))
    else:
        with open(os.path.join(model_dir, "cameras.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(write_cameras_text(cameras))
        with open(os.path.join(model_dir, "images.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(write_images_text(records))


# -- pose extraction ------------------------------------------------------------

_DIGITS = re.compile(r"(\d+)")


def natural_key(name):
    runs = _DIGITS.split(name)
    key = tuple((0, int(r), "") if r.isdigit() else (1, 0, r) for r in runs if r)
    return key, name


def extract_video_poses(records, video_id):
    """Per-frame world-to-camera rotations, ordered by a numeric-aware sort of image names."""
    if len(records) < 2:
        raise TooFewFrames(f"video {video_id!r} has {len(records)} registered frames, need >= 2")
    ordered = sorted(records, key=lambda rec: natural_key(rec.name))
    frames = [Frame(rec.name, rec.rotation, np.array(rec.tvec, dtype=float)) for rec in ordered]
    return VideoPoses(video_id, frames)


def rebase_to_first_frame(video):
    """Right-multiply every rotation by ``R_1^T`` so the first frame is the identity."""
    R1 = video.frames[0].rotation
    frames = [Frame(f.name, relative_rotation(f.rotation, R1), f.translation) for f in video.frames]
    frames[0].rotation = np.eye(3)
    return VideoPoses(video.video_id, frames)


def mean_adjacent_angle(video):
    R = video.rotations
    return float(np.mean(rotation_angle(relative_rotation(R[1:], R[:-1]))))
