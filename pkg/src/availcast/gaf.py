"""Binary presence series and their Gramian Angular Field image encodings.

A service's appearances in a cluster become a 0/1 series; rolling windows
over it are rescaled to [-1, 1], encoded as angles psi = arccos(value),
and rendered as two images: the summation field cos(psi_i + psi_j) and
the difference field sin(psi_i - psi_j). The steps after each window
provide a multi-step label.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .geo import ClusterModel, assign_cluster

_VALUE_TOL = 1e-12


class SeriesError(ValueError):
    pass


@dataclass
class PresenceSeries:
    """0/1 availability per time step for one (service, cluster) pair.

    Step i covers [start + i*granularity, start + (i+1)*granularity).
    """

    service_id: str
    cluster_id: int
    granularity_s: int
    start: datetime
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.granularity_s <= 0:
            raise SeriesError(f"granularity must be positive, got {self.granularity_s}")
        if self.values.ndim != 1 or len(self.values) < 1:
            raise SeriesError("series needs at least one step")
        if not np.all((self.values == 0) | (self.values == 1)):
            raise SeriesError("series values must be 0/1")

    def __len__(self) -> int:
        return len(self.values)


def build_presence_series(
    records,
    model: ClusterModel,
    service_id: str,
    cluster_id: int,
    granularity_s: int = 60,
) -> PresenceSeries:
    """Mark the steps where any record of the service falls in the cluster.

    The time axis spans from the first to the last timestamp over all the
    records passed in, so series built from the same batch are aligned.
    """
    if granularity_s <= 0:
        raise SeriesError(f"granularity must be positive, got {granularity_s}")
    if not records:
        raise SeriesError("no records")
    mine = [r for r in records if r.service_id == service_id]
    if not mine:
        raise SeriesError(f"no records for service {service_id!r}")
    start = min(r.timestamp for r in records)
    end = max(r.timestamp for r in records)
    n = int((end - start).total_seconds() // granularity_s) + 1
    values = np.zeros(n, dtype=np.uint8)
    for r in mine:
        if assign_cluster(model, r.point) == cluster_id:
            step = int((r.timestamp - start).total_seconds() // granularity_s)
            values[step] = 1
    return PresenceSeries(service_id, cluster_id, granularity_s, start, values)


def roll_windows(series, window_len: int, stride: int, horizon: int):
    """Windows of length window_len starting at 0, stride, 2*stride, ...

    Only windows with `horizon` subsequent steps are emitted, i.e. starts
    satisfy start + window_len + horizon <= n. Returns a list of
    (window_values, following_steps) float arrays; an over-long window
    yields an empty list, not an error.
    """
    values = series.values if isinstance(series, PresenceSeries) else np.asarray(series)
    n = len(values)
    if not 1 <= window_len <= n:
        raise SeriesError(f"window length {window_len} outside [1, {n}]")
    if stride < 1:
        raise SeriesError(f"stride must be >= 1, got {stride}")
    if horizon < 0:
        raise SeriesError(f"horizon must be >= 0, got {horizon}")
    out = []
    start = 0
    while start + window_len + horizon <= n:
        out.append(
            (
                values[start : start + window_len].astype(np.float64),
                values[start + window_len : start + window_len + horizon].astype(np.float64),
            )
        )
        start += stride
    return out


@dataclass(frozen=True)
class MultiStepLabel:
    """The next `horizon` presence bits, packed little-endian: the first
    upcoming step is the least significant bit."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise SeriesError("label needs at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise SeriesError(f"label bits must be 0/1, got {self.bits}")

    @property
    def class_index(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @property
    def horizon(self) -> int:
        return len(self.bits)


def make_label(future, max_horizon: int = 3) -> MultiStepLabel:
    """Encode upcoming presence bits as one of 2**horizon classes.

    Horizons above max_horizon are refused unless explicitly raised, since
    the class count doubles per step.
    """
    bits = tuple(int(b) for b in np.asarray(future).reshape(-1))
    if any(float(b) != float(v) for b, v in zip(bits, np.asarray(future).reshape(-1))):
        raise SeriesError(f"non-binary label values: {future}")
    if len(bits) > max_horizon:
        raise SeriesError(
            f"horizon {len(bits)} exceeds max_horizon={max_horizon}; raise it explicitly"
        )
    return MultiStepLabel(bits)


def decode_label(class_index: int, horizon: int) -> MultiStepLabel:
    """Exact inverse of make_label over [0, 2**horizon)."""
    if not 0 <= class_index < 2**horizon:
        raise SeriesError(f"class index {class_index} outside [0, {2**horizon})")
    return MultiStepLabel(tuple((class_index >> i) & 1 for i in range(horizon)))


def perturb_zero_series(window, epsilon: float = 1e-3) -> np.ndarray:
    """Replace an all-zero window by the constant epsilon; anything else
    passes through unchanged. Keeps the polar encoding well defined."""
    if epsilon <= 0:
        raise SeriesError(f"epsilon must be positive, got {epsilon}")
    w = np.asarray(window, dtype=np.float64).copy()
    if np.all(w == 0):
        w[:] = epsilon
    return w


def rescale_to_unit(window) -> np.ndarray:
    """Min-max rescale to [-1, 1]; a constant window maps to all zeros."""
    w = np.asarray(window, dtype=np.float64)
    if w.size == 0:
        raise SeriesError("empty window")
    lo, hi = w.min(), w.max()
    if hi == lo:
        return np.zeros_like(w)
    return 2.0 * (w - lo) / (hi - lo) - 1.0


def _checked_unit(window) -> np.ndarray:
    w = np.asarray(window, dtype=np.float64)
    if np.any(np.abs(w) > 1.0 + _VALUE_TOL):
        raise SeriesError(f"values outside [-1, 1]: max |v| = {np.abs(w).max()}")
    return np.clip(w, -1.0, 1.0)


def to_polar(window, span_constant: float | None = None):
    """Angles psi_i = arccos(value_i) and radii rho_i = i / C.

    C defaults to the window length; the radii only matter for plotting,
    the field encodings below use the angles alone.
    """
    w = _checked_unit(window)
    c = float(len(w) if span_constant is None else span_constant)
    if c <= 0:
        raise SeriesError(f"span constant must be positive, got {c}")
    return np.arccos(w), np.arange(len(w)) / c


def gasf(window) -> np.ndarray:
    """Summation field: G[i, j] = cos(psi_i + psi_j). Exactly symmetric."""
    psi = np.arccos(_checked_unit(window))
    return np.cos(psi[:, None] + psi[None, :])


def gadf(window, mode: str = "difference") -> np.ndarray:
    """Difference field: G[i, j] = sin(psi_i - psi_j).

    Computed as sqrt(1-v^2) v^T - v sqrt(1-v^2)^T, which is exactly
    antisymmetric with an exactly zero diagonal. mode="sum" gives the
    sin(psi_i + psi_j) variant instead.
    """
    v = _checked_unit(window)
    if mode == "sum":
        psi = np.arccos(v)
        return np.clip(np.sin(psi[:, None] + psi[None, :]), -1.0, 1.0)
    if mode != "difference":
        raise ValueError(f"unknown gadf mode {mode!r}")
    s = np.sqrt(1.0 - v * v)
    return np.clip(np.outer(s, v) - np.outer(v, s), -1.0, 1.0)


@dataclass
class GafImagePair:
    """The two field images of one window, plus provenance metadata."""

    gasf: np.ndarray
    gadf: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gasf = np.asarray(self.gasf, dtype=np.float64)
        self.gadf = np.asarray(self.gadf, dtype=np.float64)
        if self.gasf.shape != self.gadf.shape or self.gasf.ndim != 2:
            raise SeriesError(
                f"image pair shapes disagree: {self.gasf.shape} vs {self.gadf.shape}"
            )
        if self.gasf.shape[0] != self.gasf.shape[1]:
            raise SeriesError(f"images must be square, got {self.gasf.shape}")

    @property
    def size(self) -> int:
        return self.gasf.shape[0]


def encode_window(window, epsilon: float = 1e-3, meta: dict | None = None) -> GafImagePair:
    """perturb-if-zero -> rescale -> both fields, in one step."""
    unit = rescale_to_unit(perturb_zero_series(window, epsilon))
    return GafImagePair(gasf(unit), gadf(unit), meta=dict(meta or {}))


def paa(window, m: int) -> np.ndarray:
    """Piecewise aggregate approximation: means of m contiguous frames.

    Frame sizes are as equal as possible, with the remainder spread over
    the leading frames.
    """
    w = np.asarray(window, dtype=np.float64)
    k = len(w)
    if not 1 <= m <= k:
        raise SeriesError(f"target length {m} outside [1, {k}]")
    q, rem = divmod(k, m)
    sizes = [q + 1] * rem + [q] * (m - rem)
    out = np.empty(m, dtype=np.float64)
    pos = 0
    for j, size in enumerate(sizes):
        out[j] = w[pos : pos + size].mean()
        pos += size
    return out


def augment(image, rotation_deg: float = 40.0, shear_factor: float = 0.2) -> np.ndarray:
    """Rotate then shear about the image centre, bilinear interpolation,
    zero fill outside the source."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise SeriesError(f"augment expects a 2D image, got shape {img.shape}")
    h, w = img.shape
    theta = math.radians(rotation_deg)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    shear = np.array([[1.0, shear_factor], [0.0, 1.0]])
    inv = np.linalg.inv(shear @ rot)

    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # map output pixels back to source coordinates (x = col, y = row)
    xy = np.stack([cols - cx, rows - cy], axis=0).reshape(2, -1)
    src = inv @ xy
    sx = src[0].reshape(h, w) + cx
    sy = src[1].reshape(h, w) + cy

    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = sx - x0
    fy = sy - y0

    def sample(yy, xx):
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(valid, vals, 0.0)

    top = sample(y0, x0) * (1 - fx) + sample(y0, x0 + 1) * fx
    bottom = sample(y0 + 1, x0) * (1 - fx) + sample(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bottom * fy


def balance_classes(
    samples,
    seed: int = 0,
    rotation_deg: float = 40.0,
    shear_factor: float = 0.2,
    tolerance: float = 0.10,
):
    """Oversample minority classes with augmented copies.

    samples: list of (GafImagePair, MultiStepLabel). Each synthetic copy
    applies a jittered rotation/shear (uniform within +/- the configured
    magnitudes) to both images of a cycled source sample. Afterwards every
    non-empty class count is within `tolerance` of the majority count.
    Classes with no samples are reported and left empty.
    """
    if not samples:
        return []
    counts: dict[int, list[int]] = {}
    horizon = samples[0][1].horizon
    for i, (_, label) in enumerate(samples):
        counts.setdefault(label.class_index, []).append(i)
    if len(counts) == 1:
        warnings.warn("balance_classes: single-class input left unchanged")
        return list(samples)
    empty = [c for c in range(2**horizon) if c not in counts]
    if empty:
        warnings.warn(f"balance_classes: classes with no samples: {empty}")

    majority = max(len(v) for v in counts.values())
    target = math.ceil((1.0 - tolerance) * majority)
    rng = np.random.default_rng(seed)
    out = list(samples)
    for cls in sorted(counts):
        members = counts[cls]
        need = target - len(members)
        for j in range(max(0, need)):
            pair, label = samples[members[j % len(members)]]
            rot = rng.uniform(-rotation_deg, rotation_deg)
            sh = rng.uniform(-shear_factor, shear_factor)
            out.append(
                (
                    GafImagePair(
                        augment(pair.gasf, rot, sh),
                        augment(pair.gadf, rot, sh),
                        meta={**pair.meta, "augmented": True},
                    ),
                    label,
                )
            )
    return out


# --- file formats -----------------------------------------------------------

_GAF_MAGIC = b"GAFPAIR1"
_SERIES_FIELDS = ["service_id", "cluster_id", "granularity_s", "start", "values"]


def save_gaf_dataset(path, gasf_images, gadf_images, labels, horizon: int) -> None:
    """Flat binary tensor file: magic, counts header, label words, then
    row-major float32 images (gasf then gadf per sample)."""
    ga = np.asarray(gasf_images, dtype=np.float32)
    gd = np.asarray(gadf_images, dtype=np.float32)
    lab = np.asarray(labels, dtype=np.uint32)
    if ga.shape != gd.shape or ga.ndim != 3 or ga.shape[1] != ga.shape[2]:
        raise SeriesError(f"bad image stack shapes: {ga.shape} vs {gd.shape}")
    if len(lab) != len(ga):
        raise SeriesError("label count differs from image count")
    with open(path, "wb") as f:
        f.write(_GAF_MAGIC)
        f.write(struct.pack("<III", len(ga), ga.shape[1], horizon))
        f.write(lab.astype("<u4").tobytes())
        interleaved = np.stack([ga, gd], axis=1)  # (n, 2, t, t)
        f.write(interleaved.astype("<f4").tobytes())


def load_gaf_dataset(path):
    """Returns (gasf (n,t,t) float32, gadf, labels (n,) int64, horizon)."""
    raw = Path(path).read_bytes()
    if raw[:8] != _GAF_MAGIC:
        raise SeriesError(f"{path}: not a GAF dataset file")
    n, t, horizon = struct.unpack("<III", raw[8:20])
    off = 20
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=off).astype(np.int64)
    off += 4 * n
    data = np.frombuffer(raw, dtype="<f4", count=n * 2 * t * t, offset=off)
    data = data.reshape(n, 2, t, t)
    return data[:, 0].copy(), data[:, 1].copy(), labels, int(horizon)


def save_gaf_png(image, path) -> None:
    """Grayscale PNG of a field image ([-1, 1] mapped to [0, 255])."""
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError("PNG export needs Pillow (pip install Pillow)") from exc
    arr = np.asarray(image, dtype=np.float64)
    scaled = np.clip((arr + 1.0) * 127.5, 0, 255).astype(np.uint8)
    Image.fromarray(scaled, mode="L").save(path)


def save_series_csv(path, series_list) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_SERIES_FIELDS)
        for s in series_list:
            writer.writerow(
                [
                    s.service_id,
                    s.cluster_id,
                    s.granularity_s,
                    s.start.isoformat(sep=" "),
                    "".join(str(int(v)) for v in s.values),
                ]
            )


def load_series_csv(path) -> list[PresenceSeries]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != _SERIES_FIELDS:
            raise SeriesError(f"{path}: unexpected series columns {reader.fieldnames}")
        for row in reader:
            out.append(
                PresenceSeries(
                    service_id=row["service_id"],
                    cluster_id=int(row["cluster_id"]),
                    granularity_s=int(row["granularity_s"]),
                    start=datetime.fromisoformat(row["start"]),
                    values=np.array([int(ch) for ch in row["values"]], dtype=np.uint8),
                )
            )
    return out
