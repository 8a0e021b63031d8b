"""Image fidelity (PSNR) and annotation-similarity measures."""

from __future__ import annotations

import math

import numpy as np

from .image import Image
from .oracle import Annotation

DEFAULT_MIN_SCORE = 0.5
DEFAULT_TOP_K = 10


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when the images are equal.

    PSNR = 10 * log10(255^2 / MSE) with MSE averaged over all 3*w*h samples.
    Images of different dimensions do not compare; that is an error, never an
    implicit crop.
    """
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    diff = a.pixels.astype(np.int64) - b.pixels.astype(np.int64)
    sq = int((diff * diff).sum())
    if sq == 0:
        return math.inf
    mse = sq / diff.size
    return 10.0 * math.log10(255.0 ** 2 / mse)


def format_psnr(value: float, decimals: int = 6) -> str:
    return "inf" if math.isinf(value) else f"{value:.{decimals}f}"


def confident_labels(
    ann: Annotation,
    min_score: float = DEFAULT_MIN_SCORE,
    top_k: int = DEFAULT_TOP_K,
) -> frozenset[str]:
    """Case-insensitive texts of the top-k labels scoring at least min_score."""
    return frozenset(
        text.lower() for text, score in ann.labels[:top_k] if score >= min_score
    )


def label_jaccard(
    a: Annotation,
    b: Annotation,
    min_score: float = DEFAULT_MIN_SCORE,
    top_k: int = DEFAULT_TOP_K,
) -> float:
    """Jaccard index of the two annotations' confident label sets.

    Two empty sets count as identical (1.0): no confident output on either
    side is not evidence of a change.
    """
    if not 0.0 <= min_score <= 1.0:
        raise ValueError(f"min_score must lie in [0, 1], got {min_score}")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    sa = confident_labels(a, min_score, top_k)
    sb = confident_labels(b, min_score, top_k)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def _top1_text(ann: Annotation) -> str | None:
    if not ann.labels:
        return None
    # ties on the top score resolve to the lexicographically smallest text
    top_score = max(s for _, s in ann.labels)
    return min(t.lower() for t, s in ann.labels if s == top_score)


def top1_changed(a: Annotation, b: Annotation) -> bool:
    """True iff the highest-confidence label text differs (case-insensitive).

    An empty label list never equals a non-empty one; two empty lists are
    vacuously equal.
    """
    ta, tb = _top1_text(a), _top1_text(b)
    if ta is None and tb is None:
        return False
    return ta != tb
