"""noiseprobe: noise attacks on black-box image annotators, and the
filtering countermeasures that undo them.

Corrupt images with seeded impulse or Gaussian noise, escalate density until
a pluggable annotation oracle changes its output, chart success-rate curves,
and verify that weighted-average / low-pass filtering restores the original
annotations.
"""

from ._kernels import USING_NUMBA
from .attack import (
    AttackTrace,
    CorpusResult,
    CurvePoint,
    CurveResult,
    DetectionVanished,
    EscalationAborted,
    JaccardBelow,
    Top1Changed,
    density_grid,
    evaluate_countermeasure,
    run_corpus,
    run_escalation,
    success_curve,
    write_corpus_csv,
    write_curve_csv,
)
from .denoise import (
    FilterConfig,
    detect_impulse_mask,
    gaussian_lowpass,
    weighted_average_filter,
)
from .image import Image, PpmError, load_ppm, save_ppm
from .metrics import label_jaccard, psnr, top1_changed
from .noise import NoiseSpec, add_gaussian, add_impulse
from .oracle import (
    Annotation,
    ConstantOracle,
    PsnrThresholdOracle,
    SurrogateModel,
    SurrogateOracle,
    build_surrogate,
    downsample16,
    generate_synthetic_corpus,
    load_model,
    save_model,
    surrogate_annotate,
    synthetic_corpus_items,
)
from .png import encode_png
from .remote import (
    HttpStatusError,
    MissingCredentialsError,
    OracleError,
    ParseError,
    RemoteOracle,
    RemoteOracleConfig,
    TransportError,
)
from .rng import derive_seed, mix64, uniform_stream

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AttackTrace",
    "ConstantOracle",
    "CorpusResult",
    "CurvePoint",
    "CurveResult",
    "DetectionVanished",
    "EscalationAborted",
    "FilterConfig",
    "HttpStatusError",
    "Image",
    "JaccardBelow",
    "MissingCredentialsError",
    "NoiseSpec",
    "OracleError",
    "ParseError",
    "PpmError",
    "PsnrThresholdOracle",
    "RemoteOracle",
    "RemoteOracleConfig",
    "SurrogateModel",
    "SurrogateOracle",
    "Top1Changed",
    "TransportError",
    "USING_NUMBA",
    "add_gaussian",
    "add_impulse",
    "build_surrogate",
    "density_grid",
    "derive_seed",
    "detect_impulse_mask",
    "downsample16",
    "encode_png",
    "evaluate_countermeasure",
    "gaussian_lowpass",
    "generate_synthetic_corpus",
    "label_jaccard",
    "load_model",
    "load_ppm",
    "mix64",
    "psnr",
    "run_corpus",
    "run_escalation",
    "save_model",
    "save_ppm",
    "success_curve",
    "surrogate_annotate",
    "synthetic_corpus_items",
    "top1_changed",
    "uniform_stream",
    "weighted_average_filter",
    "write_corpus_csv",
    "write_curve_csv",
]
