"""Annotation oracles: the Annotation type, a deterministic local surrogate
classifier, synthetic corpus generation, and mock oracles for testing.

The surrogate is a nearest-centroid classifier over 16x16 box-averaged
pixels.  It is deliberately fragile under pixel noise: raw-space distances
degrade smoothly with noise density, which is exactly what makes escalation
experiments informative at desk scale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _kernels
from .image import Image
from .rng import derive_seed, uniform_stream

DOWNSAMPLE_BINS = 16

CORPUS_IMAGE_SIZE = 64
CORPUS_BACKGROUND = 180
CORPUS_COLORS = {
    "red": (210, 40, 40),
    "green": (40, 190, 60),
    "blue": (45, 60, 210),
    "yellow": (220, 200, 50),
}
CORPUS_CLASSES = tuple(
    f"{color}_{shape}" for shape in ("circle", "square") for color in CORPUS_COLORS
)


@dataclass(frozen=True)
class Annotation:
    """Ranked label output of an oracle, plus optional face/text detections.

    Labels are normalized at construction: sorted by descending score with
    score ties broken lexicographically, and label texts must be unique.
    """

    labels: tuple[tuple[str, float], ...]
    face_count: int | None = None
    text_blocks: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        labels = tuple((str(t), float(s)) for t, s in self.labels)
        for text, score in labels:
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score for {text!r} outside [0, 1]: {score}")
        texts = [t for t, _ in labels]
        if len(set(texts)) != len(texts):
            raise ValueError("label texts within an annotation must be unique")
        labels = tuple(sorted(labels, key=lambda ls: (-ls[1], ls[0])))
        object.__setattr__(self, "labels", labels)
        if self.face_count is not None and self.face_count < 0:
            raise ValueError("face_count must be non-negative")
        if self.text_blocks is not None:
            object.__setattr__(
                self, "text_blocks", tuple(str(t) for t in self.text_blocks)
            )

    @property
    def top1(self) -> str | None:
        return self.labels[0][0] if self.labels else None

    def to_dict(self) -> dict:
        return {
            "labels": [[t, s] for t, s in self.labels],
            "face_count": self.face_count,
            "text_blocks": list(self.text_blocks) if self.text_blocks is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        tb = d.get("text_blocks")
        return cls(
            labels=tuple((t, s) for t, s in d.get("labels", [])),
            face_count=d.get("face_count"),
            text_blocks=tuple(tb) if tb is not None else None,
        )


# --------------------------------------------------------------------------
# box downsampling

@lru_cache(maxsize=None)
def _box_taps(n: int, bins: int = DOWNSAMPLE_BINS):
    """Tap table mapping n source rows onto *bins* equal fractional cells."""
    cell = n / bins
    max_taps = 0
    rows = []
    for i in range(bins):
        lo, hi = i * cell, (i + 1) * cell
        r0 = int(np.floor(lo))
        r1 = min(int(np.ceil(hi)), n)
        w = [max(min(r + 1.0, hi) - max(float(r), lo), 0.0) for r in range(r0, r1)]
        rows.append((r0, w))
        max_taps = max(max_taps, len(w))
    starts = np.array([r0 for r0, _ in rows], dtype=np.int64)
    counts = np.array([len(w) for _, w in rows], dtype=np.int64)
    weights = np.zeros((bins, max_taps), dtype=np.float64)
    for i, (_, w) in enumerate(rows):
        weights[i, : len(w)] = w
    return starts, counts, weights, cell


def downsample16(img: Image) -> np.ndarray:
    """Box-average an image to a (16, 16, 3) float64 array.

    Cells cover exact fractional source rectangles, so any input size is
    handled; for dimensions divisible by 16 this is the plain block mean.
    """
    src = img.pixels.astype(np.float64)
    s, c, w, cell = _box_taps(img.height)
    rows = _kernels.box_axis0(src, s, c, w, cell)
    s, c, w, cell = _box_taps(img.width)
    cols = _kernels.box_axis0(
        np.ascontiguousarray(rows.transpose(1, 0, 2)), s, c, w, cell
    )
    return cols.transpose(1, 0, 2)


# --------------------------------------------------------------------------
# surrogate model

@dataclass(frozen=True)
class SurrogateModel:
    """Nearest-centroid model: one 16x16x3 mean image per class."""

    classes: tuple[str, ...]
    centroids: np.ndarray = field(repr=False)  # (C, 16, 16, 3) float64
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.classes) < 2:
            raise ValueError("a surrogate model needs at least 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")
        cents = np.asarray(self.centroids, dtype=np.float64)
        expected = (len(self.classes), DOWNSAMPLE_BINS, DOWNSAMPLE_BINS, 3)
        if cents.shape != expected:
            raise ValueError(f"centroids must have shape {expected}, got {cents.shape}")
        if not np.isfinite(cents).all():
            raise ValueError("centroids must be finite")
        if cents.min() < 0.0 or cents.max() > 255.0:
            raise ValueError("centroid samples must lie in [0, 255]")
        cents.flags.writeable = False
        object.__setattr__(self, "centroids", cents)
        object.__setattr__(self, "classes", tuple(self.classes))


def build_surrogate(
    corpus: list[tuple[Image, str]], seed: int, source: str = "custom corpus"
) -> SurrogateModel:
    """Per-class centroid = mean of the class's images downsampled to 16x16.

    Deterministic given corpus order; *seed* and *source* are recorded as
    model metadata.  Class order is first appearance in the corpus.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for img, cls in corpus:
        small = downsample16(img)
        if cls in sums:
            sums[cls] = sums[cls] + small
            counts[cls] += 1
        else:
            sums[cls] = small
            counts[cls] = 1
    classes = tuple(sums.keys())
    if len(classes) < 2:
        raise ValueError("corpus must contain at least 2 classes")
    centroids = np.stack([sums[c] / counts[c] for c in classes])
    meta = {
        "source": source,
        "seed": int(seed),
        "images_per_class": {c: counts[c] for c in classes},
    }
    return SurrogateModel(classes=classes, centroids=centroids, meta=meta)


def surrogate_annotate(model: SurrogateModel, img: Image) -> Annotation:
    """Score every class by normalized inverse Euclidean distance.

    A zero-distance centroid takes score 1.0 exactly (first such class by
    model order), everything else 0.  No face or text fields are produced;
    those exist only on the remote path.
    """
    q = downsample16(img)
    d = np.sqrt(((model.centroids - q) ** 2).sum(axis=(1, 2, 3)))
    scores = np.zeros(len(d))
    zero = np.nonzero(d == 0.0)[0]
    if zero.size:
        scores[zero[0]] = 1.0
    else:
        inv = 1.0 / d
        scores = inv / inv.sum()
    labels = tuple((cls, float(s)) for cls, s in zip(model.classes, scores))
    return Annotation(labels=labels)


def model_to_json(model: SurrogateModel) -> str:
    doc = {
        "classes": list(model.classes),
        "centroids": [c.ravel().tolist() for c in model.centroids],
        "meta": model.meta,
    }
    return json.dumps(doc, indent=1)


def model_from_json(text: str) -> SurrogateModel:
    doc = json.loads(text)
    classes = tuple(doc["classes"])
    cents = np.array(doc["centroids"], dtype=np.float64).reshape(
        len(classes), DOWNSAMPLE_BINS, DOWNSAMPLE_BINS, 3
    )
    return SurrogateModel(classes=classes, centroids=cents, meta=doc.get("meta", {}))


def save_model(model: SurrogateModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path: str | Path) -> SurrogateModel:
    return model_from_json(Path(path).read_text())


# --------------------------------------------------------------------------
# synthetic corpus

def _render_class(cls: str, pseed: int) -> Image:
    u = uniform_stream(pseed, 3)
    dx = int(np.floor(u[0] * 17)) - 8
    dy = int(np.floor(u[1] * 17)) - 8
    half = 12 + int(np.floor(u[2] * 13))
    color, shape = cls.rsplit("_", 1)
    size = CORPUS_IMAGE_SIZE
    arr = np.full((size, size, 3), CORPUS_BACKGROUND, dtype=np.uint8)
    cy, cx = size // 2 + dy, size // 2 + dx
    yy, xx = np.mgrid[0:size, 0:size]
    if shape == "circle":
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= half * half
    else:
        mask = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
    arr[mask] = CORPUS_COLORS[color]
    return Image(arr)


def generate_synthetic_corpus(
    n_per_class: int, seed: int
) -> list[tuple[Image, str]]:
    """Render the 8 {circle, square} x {red, green, blue, yellow} classes.

    Each 64x64 image places the shape on a gray-180 background with seeded
    jitter of center (+-8 px) and size (radius / half-side 12..24 px).
    Output is interleaved by index (all 8 classes, then the next index), so
    a prefix slice stays class-balanced.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    out = []
    for i in range(n_per_class):
        for cls in CORPUS_CLASSES:
            out.append((_render_class(cls, derive_seed(seed, cls, i)), cls))
    return out


def synthetic_corpus_items(
    n_per_class: int, seed: int
) -> list[tuple[str, Image, str]]:
    """Same corpus with stable ids '<class>_<index>' for attack runs."""
    corpus = generate_synthetic_corpus(n_per_class, seed)
    items = []
    for pos, (img, cls) in enumerate(corpus):
        items.append((f"{cls}_{pos // len(CORPUS_CLASSES):03d}", img, cls))
    return items


# --------------------------------------------------------------------------
# oracle objects (anything with .annotate(Image) -> Annotation and .identity)

class SurrogateOracle:
    """Deterministic local oracle wrapping a SurrogateModel."""

    def __init__(self, model: SurrogateModel):
        self.model = model
        digest = hashlib.sha256(model_to_json(model).encode()).hexdigest()[:12]
        self.identity = f"surrogate:{len(model.classes)}classes:{digest}"

    def annotate(self, img: Image) -> Annotation:
        return surrogate_annotate(self.model, img)


class ConstantOracle:
    """Always returns the same annotation; useful as a null baseline."""

    def __init__(self, annotation: Annotation, identity: str = "constant"):
        self.annotation = annotation
        self.identity = identity

    def annotate(self, img: Image) -> Annotation:
        return self.annotation


class PsnrThresholdOracle:
    """Mock oracle: label depends on PSNR against a reference image.

    Returns *above_label* when psnr(img, reference) >= threshold_db, else
    *below_label*.  Escalation outcomes against it are exactly predictable,
    which makes it the standard cross-check for the attack engine.
    """

    def __init__(
        self,
        reference: Image,
        threshold_db: float,
        above_label: str = "clean",
        below_label: str = "noisy",
    ):
        self.reference = reference
        self.threshold_db = threshold_db
        self.above_label = above_label
        self.below_label = below_label
        self.identity = f"psnr_threshold:{threshold_db}dB"

    def annotate(self, img: Image) -> Annotation:
        from .metrics import psnr  # deferred: metrics imports Annotation

        label = (
            self.above_label
            if psnr(img, self.reference) >= self.threshold_db
            else self.below_label
        )
        return Annotation(labels=((label, 1.0),))
