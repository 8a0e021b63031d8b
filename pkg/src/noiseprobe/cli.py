"""Command-line surface for batch experiments and report emission.

Subcommands: corrupt, denoise, psnr, attack, curve, evaluate, gen-corpus,
build-surrogate.  The attack/curve/evaluate commands accept a JSON config
file (--config) mirroring their flags, with explicit flags taking
precedence; every report embeds the effective configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import data
from .attack import (
    DetectionVanished,
    JaccardBelow,
    Top1Changed,
    evaluate_countermeasure,
    run_corpus,
    success_curve,
    write_corpus_csv,
    write_curve_csv,
)
from .denoise import FilterConfig, gaussian_lowpass, weighted_average_filter
from .image import Image, load_ppm, save_ppm
from .metrics import format_psnr, psnr
from .noise import GAUSSIAN, GAUSSIAN_SIGMA_MAX, IMPULSE, NoiseSpec
from .oracle import SurrogateOracle, build_surrogate, load_model, model_to_json, synthetic_corpus_items
from .remote import RemoteOracle, RemoteOracleConfig


class CliError(Exception):
    pass


def _read_image(path: str) -> Image:
    return load_ppm(Path(path).read_bytes())


def _write_image(path: str, img: Image) -> None:
    Path(path).write_bytes(save_ppm(img))


def _load_corpus(directory: str) -> list[tuple[str, Image]]:
    root = Path(directory)
    if not root.is_dir():
        raise CliError(f"corpus directory not found: {directory}")
    files = sorted(root.rglob("*.ppm"))
    if not files:
        raise CliError(f"no .ppm files under {directory}")
    return [
        (p.relative_to(root).with_suffix("").as_posix(), load_ppm(p.read_bytes()))
        for p in files
    ]


def _class_of(image_id: str) -> str:
    # corpus naming rule: class name is the id minus a trailing _<digits>
    m = re.fullmatch(r"(.+)_(\d+)", Path(image_id).name)
    if not m:
        raise CliError(
            f"cannot infer a class from {image_id!r}; expected <class>_<index> names"
        )
    return m.group(1)


def _merge_config(args: argparse.Namespace, keys: list[str]) -> dict:
    """Effective settings: explicit flags override --config entries."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())
    merged = {}
    for key in keys:
        flag_val = getattr(args, key)
        merged[key] = flag_val if flag_val is not None else file_cfg.get(key)
    return merged


def _make_criterion(cfg: dict):
    kind = cfg.get("criterion") or "jaccard"
    tau = cfg.get("tau") if cfg.get("tau") is not None else 0.0
    min_score = cfg.get("min_score") if cfg.get("min_score") is not None else 0.5
    top_k = cfg.get("top_k") if cfg.get("top_k") is not None else 10
    if kind == "jaccard":
        return JaccardBelow(tau=tau, min_score=min_score, top_k=top_k)
    if kind == "top1":
        return Top1Changed()
    if kind in ("faces", "text"):
        return DetectionVanished(feature=kind)
    raise CliError(f"unknown criterion {kind!r}")


def _make_oracle(cfg: dict):
    chosen = [k for k in ("surrogate", "remote", "bundled_surrogate") if cfg.get(k)]
    if len(chosen) != 1:
        raise CliError(
            "select exactly one oracle: --surrogate PATH, --remote PATH, "
            "or --bundled-surrogate"
        )
    if cfg.get("surrogate"):
        return SurrogateOracle(load_model(cfg["surrogate"]))
    if cfg.get("bundled_surrogate"):
        return SurrogateOracle(data.bundled_surrogate_model())
    return RemoteOracle(RemoteOracleConfig.from_json(Path(cfg["remote"]).read_text()))


def _parse_densities(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"bad densities list: {exc}") from exc
    if not values:
        raise CliError("densities list is empty")
    return values


# --------------------------------------------------------------------------
# subcommand implementations

def _cmd_corrupt(args) -> int:
    img = _read_image(args.input)
    if args.noise == IMPULSE:
        spec = NoiseSpec.impulse(args.density, args.seed)
    else:
        if args.sigma is None:
            raise CliError("--sigma is required for gaussian noise")
        spec = NoiseSpec.gaussian(args.sigma, args.seed)
    noisy = spec.apply(img)
    _write_image(args.output, noisy)
    print(f"psnr_db={format_psnr(psnr(noisy, img))}")
    return 0


def _cmd_denoise(args) -> int:
    img = _read_image(args.input)
    if args.filter == "weighted-average":
        cfg = FilterConfig(
            initial_radius=args.initial_radius,
            max_radius=args.max_radius,
            max_passes=args.max_passes,
        )
        out = weighted_average_filter(img, cfg)
    else:
        out = gaussian_lowpass(img, args.sigma)
    _write_image(args.output, out)
    reference = _read_image(args.reference) if args.reference else img
    print(f"psnr_db={format_psnr(psnr(out, reference))}")
    return 0


def _cmd_psnr(args) -> int:
    print(format_psnr(psnr(_read_image(args.a), _read_image(args.b))))
    return 0


def _attack_config(args, extra_keys: list[str]) -> dict:
    keys = [
        "corpus", "surrogate", "remote", "bundled_surrogate", "seed", "workers",
        "criterion", "tau", "min_score", "top_k",
    ] + extra_keys
    cfg = _merge_config(args, keys)
    if cfg.get("corpus") is None:
        raise CliError("--corpus is required")
    if cfg.get("seed") is None:
        cfg["seed"] = 0
    return cfg


def _report_envelope(cfg: dict, oracle, command: str) -> dict:
    shown = {k: v for k, v in cfg.items() if v is not None}
    shown["command"] = command
    shown["oracle_identity"] = oracle.identity
    if shown.get("noise_kind") == GAUSSIAN and command in ("attack", "curve"):
        # these commands drive gaussian noise through the density dial
        shown["gaussian_sigma_max"] = GAUSSIAN_SIGMA_MAX
    return shown


def _cmd_attack(args) -> int:
    cfg = _attack_config(args, ["noise_kind", "start", "step", "max_density"])
    cfg["noise_kind"] = cfg.get("noise_kind") or IMPULSE
    cfg["start"] = 0.05 if cfg.get("start") is None else cfg["start"]
    cfg["step"] = 0.05 if cfg.get("step") is None else cfg["step"]
    cfg["max_density"] = 1.0 if cfg.get("max_density") is None else cfg["max_density"]
    oracle = _make_oracle(cfg)
    corpus = _load_corpus(cfg["corpus"])
    result = run_corpus(
        corpus,
        oracle,
        noise_kind=cfg["noise_kind"],
        start=cfg["start"],
        step=cfg["step"],
        max_density=cfg["max_density"],
        criterion=_make_criterion(cfg),
        seed=cfg["seed"],
        workers=cfg.get("workers"),
    )
    report = {
        "config": _report_envelope(cfg, oracle, "attack"),
        "summary": {
            "n_images": len(corpus),
            "deception_rate": result.deception_rate,
            "mean_minimal_density": result.mean_minimal_density,
            "errored_images": len(result.errors),
        },
        "traces": [t.to_dict() for t in result.traces],
        "errors": [e.to_dict() for e in result.errors],
    }
    Path(args.out).write_text(json.dumps(report, indent=1))
    if args.csv:
        write_corpus_csv(result.traces, args.csv)
    print(
        f"attack: {len(corpus)} images, deception_rate={result.deception_rate:.6f}, "
        f"mean_minimal_density="
        + (
            f"{result.mean_minimal_density:.4f}"
            if result.mean_minimal_density is not None
            else "n/a"
        )
    )
    return 0


def _cmd_curve(args) -> int:
    cfg = _attack_config(args, ["noise_kind", "densities", "repeats"])
    cfg["noise_kind"] = cfg.get("noise_kind") or IMPULSE
    cfg["repeats"] = 1 if cfg.get("repeats") is None else cfg["repeats"]
    if cfg.get("densities") is None:
        raise CliError("--densities is required (comma-separated values)")
    densities = (
        _parse_densities(cfg["densities"])
        if isinstance(cfg["densities"], str)
        else [float(d) for d in cfg["densities"]]
    )
    oracle = _make_oracle(cfg)
    corpus = _load_corpus(cfg["corpus"])
    result = success_curve(
        corpus,
        oracle,
        densities,
        noise_kind=cfg["noise_kind"],
        criterion=_make_criterion(cfg),
        seed=cfg["seed"],
        repeats=cfg["repeats"],
        workers=cfg.get("workers"),
    )
    write_curve_csv(result.points, args.out)
    if args.json:
        report = {
            "config": _report_envelope(cfg, oracle, "curve"),
            "points": [p.to_dict() for p in result.points],
            "errors": [e.to_dict() for e in result.errors],
        }
        Path(args.json).write_text(json.dumps(report, indent=1))
    print(f"curve: {len(result.points)} points over {len(corpus)} images")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _attack_config(args, ["noise_kind", "density", "sigma", "lowpass_sigma"])
    cfg["noise_kind"] = cfg.get("noise_kind") or IMPULSE
    if cfg["noise_kind"] == IMPULSE:
        density = 0.15 if cfg.get("density") is None else cfg["density"]
        noise = NoiseSpec.impulse(density)
    else:
        sigma = 20.0 if cfg.get("sigma") is None else cfg["sigma"]
        noise = NoiseSpec.gaussian(sigma)
    filter_cfg = FilterConfig(
        lowpass_sigma=(
            1.0 if cfg.get("lowpass_sigma") is None else cfg["lowpass_sigma"]
        )
    )
    min_score = 0.5 if cfg.get("min_score") is None else cfg["min_score"]
    top_k = 10 if cfg.get("top_k") is None else cfg["top_k"]
    oracle = _make_oracle(cfg)
    corpus = _load_corpus(cfg["corpus"])
    report = evaluate_countermeasure(
        corpus,
        oracle,
        noise,
        filter_cfg,
        min_score=min_score,
        top_k=top_k,
        seed=cfg["seed"],
        workers=cfg.get("workers"),
    )
    doc = {
        "config": _report_envelope(cfg, oracle, "evaluate"),
        "report": report.to_dict(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=1))
    print(
        f"evaluate: match_rate={report.restoration_match_rate:.6f}, "
        f"jaccard noisy={report.mean_jaccard_noisy:.6f} "
        f"restored={report.mean_jaccard_restored:.6f}"
    )
    return 0


def _cmd_gen_corpus(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    items = synthetic_corpus_items(args.n_per_class, args.seed)
    for image_id, img, _cls in items:
        (out / f"{image_id}.ppm").write_bytes(save_ppm(img))
    print(f"gen-corpus: wrote {len(items)} images to {out}")
    return 0


def _cmd_build_surrogate(args) -> int:
    corpus = _load_corpus(args.corpus)
    pairs = [(img, _class_of(image_id)) for image_id, img in corpus]
    model = build_surrogate(pairs, seed=args.seed, source=f"directory {args.corpus}")
    Path(args.out).write_text(model_to_json(model))
    print(f"build-surrogate: {len(model.classes)} classes from {len(pairs)} images")
    return 0


# --------------------------------------------------------------------------
# argument parsing

def _add_oracle_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--surrogate", help="path to a surrogate model JSON")
    p.add_argument("--remote", help="path to a remote oracle config JSON")
    p.add_argument(
        "--bundled-surrogate",
        dest="bundled_surrogate",
        action="store_const",
        const=True,
        help="use the packaged reference surrogate",
    )


def _add_criterion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--criterion", choices=["jaccard", "top1", "faces", "text"])
    p.add_argument("--tau", type=float)
    p.add_argument("--min-score", dest="min_score", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noiseprobe",
        description="Probe annotation oracles with noise and evaluate denoising countermeasures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="add noise to a PPM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--noise", choices=[IMPULSE, GAUSSIAN], default=IMPULSE)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_corrupt)

    p = sub.add_parser("denoise", help="restore a noisy PPM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument(
        "--filter", choices=["weighted-average", "lowpass"], default="weighted-average"
    )
    p.add_argument("--initial-radius", dest="initial_radius", type=int, default=1)
    p.add_argument("--max-radius", dest="max_radius", type=int, default=3)
    p.add_argument("--max-passes", dest="max_passes", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1.0, help="lowpass kernel sigma")
    p.add_argument("--reference", help="print PSNR against this image instead of the input")
    p.set_defaults(fn=_cmd_denoise)

    p = sub.add_parser("psnr", help="PSNR between two PPM images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=_cmd_psnr)

    p = sub.add_parser("attack", help="escalation attack over a corpus")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", help="also write a per-image CSV summary")
    p.add_argument("--config", help="JSON config mirroring the flags")
    p.add_argument("--noise-kind", dest="noise_kind", choices=[IMPULSE, GAUSSIAN])
    p.add_argument("--start", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--max-density", dest="max_density", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    _add_oracle_flags(p)
    _add_criterion_flags(p)
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("curve", help="success rate versus density")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", help="also write a full JSON report")
    p.add_argument("--config")
    p.add_argument("--noise-kind", dest="noise_kind", choices=[IMPULSE, GAUSSIAN])
    p.add_argument("--densities", help="comma-separated densities in (0, 1]")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    _add_oracle_flags(p)
    _add_criterion_flags(p)
    p.set_defaults(fn=_cmd_curve)

    p = sub.add_parser("evaluate", help="noise + restore countermeasure evaluation")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--config")
    p.add_argument("--noise-kind", dest="noise_kind", choices=[IMPULSE, GAUSSIAN])
    p.add_argument("--density", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lowpass-sigma", dest="lowpass_sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    _add_oracle_flags(p)
    _add_criterion_flags(p)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("gen-corpus", help="write the synthetic shape corpus as PPMs")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", dest="n_per_class", type=int, default=13)
    p.add_argument("--seed", type=int, default=777)
    p.set_defaults(fn=_cmd_gen_corpus)

    p = sub.add_parser("build-surrogate", help="build a surrogate model from a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_build_surrogate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
