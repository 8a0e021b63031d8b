"""Escalation attack engine, success-rate curves, and countermeasure
evaluation over a pluggable annotation oracle.

All randomness derives from one root seed via the documented mixing rule in
:mod:`noiseprobe.rng`; corpus items are independent work units, so worker
count and scheduling never change results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .denoise import FilterConfig, gaussian_lowpass, weighted_average_filter
from .image import Image
from .metrics import format_psnr, label_jaccard, psnr, top1_changed
from .noise import GAUSSIAN, GAUSSIAN_SIGMA_MAX, IMPULSE, NoiseSpec, add_gaussian, add_impulse
from .oracle import Annotation
from .rng import derive_seed

DEFAULT_START = 0.05
DEFAULT_STEP = 0.05
DEFAULT_MAX_DENSITY = 1.0


# --------------------------------------------------------------------------
# success criteria

@dataclass(frozen=True)
class Top1Changed:
    """Lenient criterion: the highest-confidence label text flipped."""

    def evaluate(self, baseline: Annotation, candidate: Annotation) -> bool:
        return top1_changed(baseline, candidate)

    def to_dict(self) -> dict:
        return {"kind": "top1_changed"}


@dataclass(frozen=True)
class JaccardBelow:
    """Default criterion: confident label sets overlap at most tau.

    tau=0 is the strict reading of "completely different outputs": no shared
    confident label.  Two empty sets count as unchanged.
    """

    tau: float = 0.0
    min_score: float = 0.5
    top_k: int = 10

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    def evaluate(self, baseline: Annotation, candidate: Annotation) -> bool:
        return label_jaccard(baseline, candidate, self.min_score, self.top_k) <= self.tau

    def to_dict(self) -> dict:
        return {
            "kind": "jaccard_below",
            "tau": self.tau,
            "min_score": self.min_score,
            "top_k": self.top_k,
        }


@dataclass(frozen=True)
class DetectionVanished:
    """Success when faces/text were detected originally but not anymore."""

    feature: str = "faces"

    def __post_init__(self) -> None:
        if self.feature not in ("faces", "text"):
            raise ValueError("feature must be 'faces' or 'text'")

    def _count(self, ann: Annotation) -> int:
        if self.feature == "faces":
            return ann.face_count or 0
        return len(ann.text_blocks or ())

    def evaluate(self, baseline: Annotation, candidate: Annotation) -> bool:
        return self._count(baseline) > 0 and self._count(candidate) == 0

    def to_dict(self) -> dict:
        return {"kind": "detection_vanished", "feature": self.feature}


def criterion_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "top1_changed":
        return Top1Changed()
    if kind == "jaccard_below":
        return JaccardBelow(
            tau=d.get("tau", 0.0),
            min_score=d.get("min_score", 0.5),
            top_k=d.get("top_k", 10),
        )
    if kind == "detection_vanished":
        return DetectionVanished(feature=d.get("feature", "faces"))
    raise ValueError(f"unknown criterion kind {kind!r}")


# --------------------------------------------------------------------------
# result records

@dataclass(frozen=True)
class TraceStep:
    density: float
    annotation: Annotation
    success: bool
    psnr_db: float

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "annotation": self.annotation.to_dict(),
            "success": self.success,
            "psnr_db": self.psnr_db if math.isfinite(self.psnr_db) else "inf",
        }


@dataclass(frozen=True)
class AttackTrace:
    image_id: str
    baseline: Annotation
    steps: tuple[TraceStep, ...]
    outcome_density: float | None
    queries: int

    def __post_init__(self) -> None:
        densities = [s.density for s in self.steps]
        if any(b <= a for a, b in zip(densities, densities[1:])):
            raise ValueError("step densities must be strictly increasing")
        first_success = next((s.density for s in self.steps if s.success), None)
        if self.outcome_density != first_success:
            raise ValueError("outcome must equal the first successful density")
        if self.queries != 1 + len(self.steps):
            raise ValueError("queries must equal 1 + number of steps")

    @property
    def deceived(self) -> bool:
        return self.outcome_density is not None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "baseline": self.baseline.to_dict(),
            "steps": [s.to_dict() for s in self.steps],
            "outcome_density": self.outcome_density,
            "queries": self.queries,
        }


@dataclass(frozen=True)
class CurvePoint:
    density: float
    success_rate: float
    n: int

    def to_dict(self) -> dict:
        return {"density": self.density, "success_rate": self.success_rate, "n": self.n}


@dataclass(frozen=True)
class ErrorRecord:
    image_id: str
    density: float | None
    message: str

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "density": self.density, "message": self.message}


@dataclass(frozen=True)
class CorpusResult:
    traces: tuple[AttackTrace, ...]
    mean_minimal_density: float | None
    deception_rate: float
    errors: tuple[ErrorRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "traces": [t.to_dict() for t in self.traces],
            "mean_minimal_density": self.mean_minimal_density,
            "deception_rate": self.deception_rate,
            "errors": [e.to_dict() for e in self.errors],
        }


@dataclass(frozen=True)
class CurveResult:
    points: tuple[CurvePoint, ...]
    errors: tuple[ErrorRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "errors": [e.to_dict() for e in self.errors],
        }


class EscalationAborted(Exception):
    """An oracle call failed mid-trace; carries the failing density."""

    def __init__(self, image_id: str, density: float | None, cause: Exception):
        super().__init__(f"oracle failed on {image_id!r} at density {density}: {cause}")
        self.image_id = image_id
        self.density = density
        self.cause = cause


# --------------------------------------------------------------------------
# core procedures

def density_grid(start: float, step: float, max_density: float) -> list[float]:
    """The escalation grid start, start+step, ... capped at max_density."""
    if not 0.0 < start <= max_density <= 1.0:
        raise ValueError("need 0 < start <= max_density <= 1")
    if step <= 0.0:
        raise ValueError("step must be > 0")
    count = int(math.floor((max_density - start) / step + 1e-9)) + 1
    return [min(start + i * step, max_density) for i in range(count)]


def _corrupt(img: Image, noise_kind: str, density: float, seed: int) -> Image:
    if noise_kind == IMPULSE:
        return add_impulse(img, density, seed)
    if noise_kind == GAUSSIAN:
        # "density" is a uniform severity dial: sigma = d * sigma_max
        return add_gaussian(img, density * GAUSSIAN_SIGMA_MAX, seed)
    raise ValueError(f"unknown noise kind {noise_kind!r}")


def run_escalation(
    img: Image,
    oracle,
    *,
    noise_kind: str = IMPULSE,
    start: float = DEFAULT_START,
    step: float = DEFAULT_STEP,
    max_density: float = DEFAULT_MAX_DENSITY,
    criterion=None,
    seed: int = 0,
    image_id: str = "image",
) -> AttackTrace:
    """Escalate noise density until the criterion fires or the grid ends.

    The oracle sees the clean image first (the baseline), then one noisy
    rendition per grid density; the trace stops at the first success.  The
    step-i noise stream is seeded with derive_seed(seed, image_id, i).
    """
    criterion = criterion if criterion is not None else JaccardBelow()
    try:
        baseline = oracle.annotate(img)
    except Exception as exc:
        raise EscalationAborted(image_id, None, exc) from exc
    steps: list[TraceStep] = []
    outcome = None
    for idx, density in enumerate(density_grid(start, step, max_density)):
        noisy = _corrupt(img, noise_kind, density, derive_seed(seed, image_id, idx))
        try:
            ann = oracle.annotate(noisy)
        except Exception as exc:
            raise EscalationAborted(image_id, density, exc) from exc
        success = criterion.evaluate(baseline, ann)
        steps.append(
            TraceStep(
                density=density,
                annotation=ann,
                success=success,
                psnr_db=psnr(noisy, img),
            )
        )
        if success:
            outcome = density
            break
    return AttackTrace(
        image_id=image_id,
        baseline=baseline,
        steps=tuple(steps),
        outcome_density=outcome,
        queries=1 + len(steps),
    )


def _pool_map(fn, items, workers: int | None):
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        return list(pool.map(fn, items))


def run_corpus(
    corpus: Sequence[tuple[str, Image]],
    oracle,
    *,
    noise_kind: str = IMPULSE,
    start: float = DEFAULT_START,
    step: float = DEFAULT_STEP,
    max_density: float = DEFAULT_MAX_DENSITY,
    criterion=None,
    seed: int = 0,
    workers: int | None = None,
) -> CorpusResult:
    """One independently seeded escalation trace per corpus image.

    Per-image oracle failures are recorded and excluded from the statistics
    instead of aborting the run.
    """
    if not corpus:
        raise ValueError("corpus is empty")

    def one(item: tuple[str, Image]):
        image_id, img = item
        try:
            return run_escalation(
                img,
                oracle,
                noise_kind=noise_kind,
                start=start,
                step=step,
                max_density=max_density,
                criterion=criterion,
                seed=seed,
                image_id=image_id,
            )
        except EscalationAborted as exc:
            return ErrorRecord(image_id, exc.density, str(exc.cause))

    results = _pool_map(one, list(corpus), workers)
    traces = tuple(r for r in results if isinstance(r, AttackTrace))
    errors = tuple(r for r in results if isinstance(r, ErrorRecord))
    deceived = [t.outcome_density for t in traces if t.deceived]
    mean_min = sum(deceived) / len(deceived) if deceived else None
    rate = len(deceived) / len(traces) if traces else 0.0
    return CorpusResult(
        traces=traces,
        mean_minimal_density=mean_min,
        deception_rate=rate,
        errors=errors,
    )


def success_curve(
    corpus: Sequence[tuple[str, Image]],
    oracle,
    densities: Sequence[float],
    *,
    noise_kind: str = IMPULSE,
    criterion=None,
    seed: int = 0,
    repeats: int = 1,
    workers: int | None = None,
) -> CurveResult:
    """Per-density success rates against each image's clean baseline.

    Every density is sampled independently (no escalation reuse): each image
    is corrupted *repeats* times with streams seeded by
    derive_seed(seed, image_id, density_index, repeat).
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if not densities:
        raise ValueError("densities is empty")
    if any(not 0.0 < d <= 1.0 for d in densities):
        raise ValueError("densities must lie in (0, 1]")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    criterion = criterion if criterion is not None else JaccardBelow()

    def one(item: tuple[str, Image]):
        image_id, img = item
        try:
            baseline = oracle.annotate(img)
        except Exception as exc:
            return None, [ErrorRecord(image_id, None, str(exc))]
        successes = [0] * len(densities)
        counts = [0] * len(densities)
        errs: list[ErrorRecord] = []
        for di, density in enumerate(densities):
            for rep in range(repeats):
                noisy = _corrupt(
                    img, noise_kind, density, derive_seed(seed, image_id, di, rep)
                )
                try:
                    ann = oracle.annotate(noisy)
                except Exception as exc:
                    errs.append(ErrorRecord(image_id, density, str(exc)))
                    continue
                counts[di] += 1
                successes[di] += criterion.evaluate(baseline, ann)
        return (successes, counts), errs

    results = _pool_map(one, list(corpus), workers)
    total_succ = [0] * len(densities)
    total_n = [0] * len(densities)
    errors: list[ErrorRecord] = []
    for payload, errs in results:
        errors.extend(errs)
        if payload is None:
            continue
        succ, cnt = payload
        for i in range(len(densities)):
            total_succ[i] += succ[i]
            total_n[i] += cnt[i]
    points = tuple(
        CurvePoint(
            density=d,
            success_rate=(total_succ[i] / total_n[i]) if total_n[i] else 0.0,
            n=total_n[i],
        )
        for i, d in enumerate(densities)
    )
    return CurveResult(points=points, errors=tuple(errors))


# --------------------------------------------------------------------------
# countermeasure evaluation

@dataclass(frozen=True)
class CountermeasureRow:
    image_id: str
    top1_original: str | None
    top1_noisy: str | None
    top1_restored: str | None
    top1_match: bool
    jaccard_noisy: float
    jaccard_restored: float
    psnr_noisy_db: float
    psnr_restored_db: float

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["psnr_noisy_db"] = (
            self.psnr_noisy_db if math.isfinite(self.psnr_noisy_db) else "inf"
        )
        d["psnr_restored_db"] = (
            self.psnr_restored_db if math.isfinite(self.psnr_restored_db) else "inf"
        )
        return d


@dataclass(frozen=True)
class CountermeasureReport:
    rows: tuple[CountermeasureRow, ...]
    restoration_match_rate: float
    mean_jaccard_noisy: float
    mean_jaccard_restored: float
    mean_psnr_noisy_db: float | None
    mean_psnr_restored_db: float | None
    n_infinite_psnr_noisy: int
    n_infinite_psnr_restored: int
    errors: tuple[ErrorRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "aggregate": {
                "n": len(self.rows),
                "restoration_match_rate": self.restoration_match_rate,
                "mean_jaccard_noisy": self.mean_jaccard_noisy,
                "mean_jaccard_restored": self.mean_jaccard_restored,
                "mean_psnr_noisy_db": self.mean_psnr_noisy_db,
                "mean_psnr_restored_db": self.mean_psnr_restored_db,
                "n_infinite_psnr_noisy": self.n_infinite_psnr_noisy,
                "n_infinite_psnr_restored": self.n_infinite_psnr_restored,
            },
            "errors": [e.to_dict() for e in self.errors],
        }


def _mean_finite(values: list[float]) -> tuple[float | None, int]:
    finite = [v for v in values if math.isfinite(v)]
    n_inf = len(values) - len(finite)
    return (sum(finite) / len(finite) if finite else None), n_inf


def evaluate_countermeasure(
    corpus: Sequence[tuple[str, Image]],
    oracle,
    noise: NoiseSpec,
    filter_cfg: FilterConfig = FilterConfig(),
    *,
    min_score: float = 0.5,
    top_k: int = 10,
    seed: int = 0,
    workers: int | None = None,
) -> CountermeasureReport:
    """Annotate original / noisy / restored renditions of every image.

    The restoration filter follows the noise kind: weighted-average for
    impulse, low-pass for gaussian.  Per-image noise streams are seeded with
    derive_seed(seed, image_id, 0).
    """
    if not corpus:
        raise ValueError("corpus is empty")

    def one(item: tuple[str, Image]):
        image_id, img = item
        try:
            noisy = noise.apply(img, seed=derive_seed(seed, image_id, 0))
            if noise.kind == IMPULSE:
                restored = weighted_average_filter(noisy, filter_cfg)
            else:
                restored = gaussian_lowpass(noisy, filter_cfg.lowpass_sigma)
            ann_o = oracle.annotate(img)
            ann_n = oracle.annotate(noisy)
            ann_r = oracle.annotate(restored)
        except Exception as exc:
            return ErrorRecord(image_id, None, str(exc))
        return CountermeasureRow(
            image_id=image_id,
            top1_original=ann_o.top1,
            top1_noisy=ann_n.top1,
            top1_restored=ann_r.top1,
            top1_match=not top1_changed(ann_o, ann_r),
            jaccard_noisy=label_jaccard(ann_o, ann_n, min_score, top_k),
            jaccard_restored=label_jaccard(ann_o, ann_r, min_score, top_k),
            psnr_noisy_db=psnr(noisy, img),
            psnr_restored_db=psnr(restored, img),
        )

    results = _pool_map(one, list(corpus), workers)
    rows = tuple(r for r in results if isinstance(r, CountermeasureRow))
    errors = tuple(r for r in results if isinstance(r, ErrorRecord))
    if rows:
        match_rate = sum(r.top1_match for r in rows) / len(rows)
        mean_jn = sum(r.jaccard_noisy for r in rows) / len(rows)
        mean_jr = sum(r.jaccard_restored for r in rows) / len(rows)
    else:
        match_rate = mean_jn = mean_jr = 0.0
    mean_pn, inf_n = _mean_finite([r.psnr_noisy_db for r in rows])
    mean_pr, inf_r = _mean_finite([r.psnr_restored_db for r in rows])
    return CountermeasureReport(
        rows=rows,
        restoration_match_rate=match_rate,
        mean_jaccard_noisy=mean_jn,
        mean_jaccard_restored=mean_jr,
        mean_psnr_noisy_db=mean_pn,
        mean_psnr_restored_db=mean_pr,
        n_infinite_psnr_noisy=inf_n,
        n_infinite_psnr_restored=inf_r,
        errors=errors,
    )


# --------------------------------------------------------------------------
# CSV summaries

def write_curve_csv(points: Sequence[CurvePoint], path: str | Path) -> None:
    lines = ["density,success_rate,n"]
    for p in points:
        lines.append(f"{p.density:.4f},{p.success_rate:.6f},{p.n}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_corpus_csv(traces: Sequence[AttackTrace], path: str | Path) -> None:
    lines = ["image_id,outcome_density,queries,baseline_top1,final_top1"]
    for t in traces:
        outcome = f"{t.outcome_density:.4f}" if t.deceived else ""
        final = t.steps[-1].annotation.top1 if t.steps else None
        lines.append(
            f"{t.image_id},{outcome},{t.queries},{t.baseline.top1 or ''},{final or ''}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
