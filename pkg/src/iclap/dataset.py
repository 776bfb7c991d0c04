"""Synthetic haptic-exploration data matching the 14x6-array / 3D-position schema.

Objects are planar height-fields composed of geometric primitives on a
bounded 2D domain (millimeters). An exploration trial samples sensor
positions uniformly at random over the object footprint and renders one
14x6 pressure frame per touch by sampling the height-field over the sensor
grid, with optional Gaussian pressure noise clipped at zero.
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, FormatError

FRAME_ROWS = 14
FRAME_COLS = 6
CELL_PITCH_MM = 3.4  # per-element spatial resolution of the sensing array

DATASET_MAGIC = "ICLAP-DS-1"

# cell-center offsets from the sensor center, rows along x, columns along y
_ROW_OFFSETS = (np.arange(FRAME_ROWS) - (FRAME_ROWS - 1) / 2.0) * CELL_PITCH_MM
_COL_OFFSETS = (np.arange(FRAME_COLS) - (FRAME_COLS - 1) / 2.0) * CELL_PITCH_MM


@dataclass(frozen=True)
class TactileFrame:
    """One 14x6 pressure image plus the 3D sensor position that produced it."""

    pressures: np.ndarray  # (14, 6), non-negative
    position: np.ndarray  # (3,), millimeters
    timestamp_index: int

    def __post_init__(self):
        p = np.array(self.pressures, dtype=np.float64)
        pos = np.array(self.position, dtype=np.float64)
        if p.shape != (FRAME_ROWS, FRAME_COLS):
            raise DimensionError(f"pressure grid must be {FRAME_ROWS}x{FRAME_COLS}, got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any():
            raise DimensionError("pressures must be finite and non-negative")
        if pos.shape != (3,) or not np.isfinite(pos).all():
            raise DimensionError("position must be a finite 3-vector")
        p.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "pressures", p)
        object.__setattr__(self, "position", pos)


# --- height-field primitives ---


@dataclass(frozen=True)
class Rect:
    cx: float
    cy: float
    width: float
    height_y: float
    height: float

    def contains(self, x, y):
        return (np.abs(x - self.cx) <= self.width / 2) & (np.abs(y - self.cy) <= self.height_y / 2)

    def bbox(self):
        return (self.cx - self.width / 2, self.cx + self.width / 2,
                self.cy - self.height_y / 2, self.cy + self.height_y / 2)


@dataclass(frozen=True)
class Disc:
    cx: float
    cy: float
    radius: float
    height: float

    def contains(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.radius**2

    def bbox(self):
        return (self.cx - self.radius, self.cx + self.radius,
                self.cy - self.radius, self.cy + self.radius)


@dataclass(frozen=True)
class Annulus:
    cx: float
    cy: float
    r_inner: float
    r_outer: float
    height: float

    def contains(self, x, y):
        r2 = (x - self.cx) ** 2 + (y - self.cy) ** 2
        return (r2 <= self.r_outer**2) & (r2 >= self.r_inner**2)

    def bbox(self):
        return (self.cx - self.r_outer, self.cx + self.r_outer,
                self.cy - self.r_outer, self.cy + self.r_outer)


@dataclass(frozen=True)
class Capsule:
    """Segment from (x0, y0) to (x1, y1) dilated by radius."""

    x0: float
    y0: float
    x1: float
    y1: float
    radius: float
    height: float

    def contains(self, x, y):
        vx, vy = self.x1 - self.x0, self.y1 - self.y0
        len2 = vx * vx + vy * vy
        if len2 == 0:
            d2 = (x - self.x0) ** 2 + (y - self.y0) ** 2
        else:
            t = np.clip(((x - self.x0) * vx + (y - self.y0) * vy) / len2, 0.0, 1.0)
            d2 = (x - (self.x0 + t * vx)) ** 2 + (y - (self.y0 + t * vy)) ** 2
        return d2 <= self.radius**2

    def bbox(self):
        return (min(self.x0, self.x1) - self.radius, max(self.x0, self.x1) + self.radius,
                min(self.y0, self.y1) - self.radius, max(self.y0, self.y1) + self.radius)


@dataclass(frozen=True)
class SyntheticObject:
    """Planar object as a composition of height-field primitives."""

    object_id: str
    primitives: tuple

    def height_at(self, x, y):
        """Height of the tallest primitive covering each (x, y); 0 outside."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h = np.zeros(np.broadcast(x, y).shape)
        for prim in self.primitives:
            h = np.maximum(h, np.where(prim.contains(x, y), prim.height, 0.0))
        return h

    def support_bbox(self):
        if not self.primitives:
            raise ConfigError(f"object {self.object_id} has no primitives")
        boxes = [p.bbox() for p in self.primitives]
        return (min(b[0] for b in boxes), max(b[1] for b in boxes),
                min(b[2] for b in boxes), max(b[3] for b in boxes))


@dataclass(frozen=True)
class ExplorationTrace:
    object_id: str
    trial_index: int
    frames: tuple

    def __post_init__(self):
        if not self.frames:
            raise DimensionError("a trace must contain at least one frame")
        object.__setattr__(self, "frames", tuple(self.frames))

    def positions(self) -> np.ndarray:
        return np.array([f.position for f in self.frames])

    def pressure_stack(self) -> np.ndarray:
        return np.array([f.pressures for f in self.frames])


# --- object suite generation ---


def _bump_row(x0, y0, x1, y1, spacing, r, h):
    """Discs placed along a segment at fixed spacing."""
    length = float(np.hypot(x1 - x0, y1 - y0))
    n = max(int(length // spacing) + 1, 1)
    out = []
    for i in range(n):
        t = i / max(n - 1, 1)
        out.append(Disc(x0 + t * (x1 - x0), y0 + t * (y1 - y0), r, h))
    return out


def _footprint_twins():
    """Two objects sharing a global plate footprint but with different textures."""
    plate = Rect(60.0, 40.0, 70.0, 45.0, 1.0)
    dotted = [plate]
    for gx in range(4):
        for gy in range(3):
            dotted.append(Disc(35.0 + gx * 16.0, 25.0 + gy * 15.0, 2.6, 3.2))
    ridged = [plate]
    for i in range(4):
        ridged.append(Capsule(32.0 + i * 16.0, 20.0, 44.0 + i * 16.0, 60.0, 2.2, 2.4))
    return tuple(dotted), tuple(ridged)


def _extent_twins():
    """Two objects sharing local texture (bumpy bar) but different spatial extent."""
    short = [Capsule(45.0, 40.0, 75.0, 40.0, 6.0, 1.2)]
    short += _bump_row(45.0, 40.0, 75.0, 40.0, 12.0, 2.6, 3.0)
    long = [Capsule(18.0, 40.0, 102.0, 40.0, 6.0, 1.2)]
    long += _bump_row(18.0, 40.0, 102.0, 40.0, 12.0, 2.6, 3.0)
    return tuple(short), tuple(long)


def _random_object(rng: np.random.Generator):
    prims = []
    n_prims = int(rng.integers(2, 5))
    for _ in range(n_prims):
        kind = rng.choice(["rect", "disc", "annulus", "capsule"])
        cx = float(rng.uniform(25, 95))
        cy = float(rng.uniform(20, 60))
        h = float(rng.uniform(0.6, 3.2))
        if kind == "rect":
            prims.append(Rect(cx, cy, float(rng.uniform(10, 45)), float(rng.uniform(8, 30)), h))
        elif kind == "disc":
            prims.append(Disc(cx, cy, float(rng.uniform(4, 16)), h))
        elif kind == "annulus":
            r_out = float(rng.uniform(8, 18))
            prims.append(Annulus(cx, cy, r_out * float(rng.uniform(0.35, 0.65)), r_out, h))
        else:
            ang = float(rng.uniform(0, np.pi))
            length = float(rng.uniform(15, 55))
            dx, dy = length / 2 * np.cos(ang), length / 2 * np.sin(ang)
            prims.append(Capsule(cx - dx, cy - dy, cx + dx, cy + dy,
                                 float(rng.uniform(3, 8)), h))
    return tuple(prims)


def generate_object_suite(count: int, seed: int) -> list:
    """Deterministic suite of synthetic objects, ids "1".."count".

    The first four objects are crafted confusion pairs: 1 and 2 share a
    global footprint but differ in local texture; 3 and 4 share local
    texture but differ in spatial extent. The rest are random composites.
    """
    if count < 2:
        raise ConfigError(f"need at least 2 objects, got {count}")
    rng = np.random.default_rng(seed)
    crafted = list(_footprint_twins()) + list(_extent_twins())
    objects = []
    for i in range(count):
        if i < len(crafted) and count >= 4:
            prims = crafted[i]
        else:
            prims = _random_object(rng)
        objects.append(SyntheticObject(object_id=str(i + 1), primitives=prims))
    return objects


# --- exploration simulation ---


def render_frame(obj: SyntheticObject, position, timestamp_index: int = 0,
                 noise_sigma: float = 0.0,
                 rng: np.random.Generator | None = None) -> TactileFrame:
    """Sample the height-field over the 14x6 grid centered at position."""
    pos = np.asarray(position, dtype=np.float64)
    if pos.shape != (3,):
        raise DimensionError("position must be a 3-vector")
    xs = pos[0] + _ROW_OFFSETS[:, None]
    ys = pos[1] + _COL_OFFSETS[None, :]
    pressures = obj.height_at(xs, ys)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng()
        pressures = np.clip(pressures + rng.normal(0.0, noise_sigma, pressures.shape), 0.0, None)
    return TactileFrame(pressures=pressures, position=pos, timestamp_index=timestamp_index)


def _sample_support_position(obj: SyntheticObject, rng: np.random.Generator,
                             max_tries: int = 10000) -> tuple[float, float]:
    xmin, xmax, ymin, ymax = obj.support_bbox()
    if not (xmax > xmin and ymax > ymin):
        raise ConfigError(f"object {obj.object_id} has degenerate support")
    for _ in range(max_tries):
        x = rng.uniform(xmin, xmax)
        y = rng.uniform(ymin, ymax)
        if obj.height_at(x, y) > 0:
            return float(x), float(y)
    raise ConfigError(f"object {obj.object_id}: could not sample the footprint")


def simulate_exploration(obj: SyntheticObject, trials: int, frames_per_trial: int,
                         noise_sigma: float, seed: int) -> list:
    """Uninformed exploration: positions drawn uniformly over the footprint.

    Deterministic given (object, parameters, seed); each (object, trial)
    pair derives its own RNG stream so objects can be generated in parallel.
    """
    if trials < 1 or frames_per_trial < 1:
        raise ConfigError("trials and frames_per_trial must be >= 1")
    traces = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, zlib.crc32(obj.object_id.encode()), trial])
        frames = []
        for idx in range(frames_per_trial):
            x, y = _sample_support_position(obj, rng)
            z = float(rng.normal(0.0, noise_sigma)) if noise_sigma > 0 else 0.0
            frames.append(render_frame(obj, (x, y, z), timestamp_index=idx,
                                       noise_sigma=noise_sigma, rng=rng))
        traces.append(ExplorationTrace(object_id=obj.object_id, trial_index=trial,
                                       frames=tuple(frames)))
    return traces


# --- on-disk format ---


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _trace_filename(trace: ExplorationTrace) -> str:
    return f"object_{trace.object_id}_trial_{trace.trial_index}.csv"


def save_dataset(traces, path) -> None:
    """Write traces to a dataset directory: manifest.json + one CSV per trace.

    CSV columns: object_id, trial, frame_index, x, y, z, p000..p083 (pressures
    row-major). Floats are written with full round-trip precision.
    """
    os.makedirs(path, exist_ok=True)
    header = ["object_id", "trial", "frame_index", "x", "y", "z"]
    header += [f"p{i:03d}" for i in range(FRAME_ROWS * FRAME_COLS)]
    entries = []
    for trace in traces:
        fname = _trace_filename(trace)
        lines = [f"# {DATASET_MAGIC}", ",".join(header)]
        for frame in trace.frames:
            row = [trace.object_id, str(trace.trial_index), str(frame.timestamp_index)]
            row += [repr(float(v)) for v in frame.position]
            row += [repr(float(v)) for v in frame.pressures.reshape(-1)]
            lines.append(",".join(row))
        _atomic_write(os.path.join(path, fname), "\n".join(lines) + "\n")
        entries.append({"object_id": trace.object_id, "trial_index": trace.trial_index,
                        "file": fname, "n_frames": len(trace.frames)})
    manifest = {"format": DATASET_MAGIC, "traces": entries}
    _atomic_write(os.path.join(path, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dataset(path) -> list:
    """Inverse of save_dataset; bitwise round-trip of pressures and positions."""
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read dataset manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != DATASET_MAGIC:
        raise FormatError(f"{manifest_path}: missing {DATASET_MAGIC} format tag")
    traces = []
    for entry in manifest.get("traces", []):
        traces.append(_load_trace(os.path.join(path, entry["file"]), entry))
    return traces


def _load_trace(fpath: str, entry: dict) -> ExplorationTrace:
    n_cols = 6 + FRAME_ROWS * FRAME_COLS
    try:
        with open(fpath, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read trace file {fpath}: {exc}") from exc
    if not lines or lines[0] != f"# {DATASET_MAGIC}":
        raise FormatError(f"{fpath}:1: missing {DATASET_MAGIC} header")
    frames = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != n_cols:
            raise FormatError(f"{fpath}:{lineno}: expected {n_cols} columns, got {len(fields)}")
        if fields[0] != str(entry["object_id"]) or fields[1] != str(entry["trial_index"]):
            raise FormatError(f"{fpath}:{lineno}: record does not match manifest entry")
        try:
            frame_index = int(fields[2])
            values = np.array([float(v) for v in fields[3:]])
        except ValueError as exc:
            raise FormatError(f"{fpath}:{lineno}: bad numeric value: {exc}") from exc
        try:
            frames.append(TactileFrame(
                pressures=values[3:].reshape(FRAME_ROWS, FRAME_COLS),
                position=values[:3],
                timestamp_index=frame_index,
            ))
        except DimensionError as exc:
            raise FormatError(f"{fpath}:{lineno}: {exc}") from exc
    if len(frames) != entry.get("n_frames", len(frames)):
        raise FormatError(
            f"{fpath}: truncated trace; manifest says {entry['n_frames']} frames, "
            f"found {len(frames)}"
        )
    return ExplorationTrace(object_id=str(entry["object_id"]),
                            trial_index=int(entry["trial_index"]), frames=tuple(frames))
