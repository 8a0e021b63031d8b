#!/usr/bin/env python3
"""Regenerate the committed assets under src/noiseprobe/data/.

Run from the repository root after changing any generation parameter:

    python3 scripts/build_assets.py

The outputs are deterministic; tests fail if the committed files drift from
what this script produces.
"""

from pathlib import Path

from noiseprobe import data
from noiseprobe.image import save_ppm
from noiseprobe.oracle import build_surrogate, generate_synthetic_corpus, model_to_json

OUT = Path(__file__).resolve().parent.parent / "src" / "noiseprobe" / "data"


def main() -> None:
    corpus = generate_synthetic_corpus(data.BUNDLED_MODEL_N_PER_CLASS, data.BUNDLED_MODEL_SEED)
    model = build_surrogate(
        corpus,
        seed=data.BUNDLED_MODEL_SEED,
        source=(
            f"synthetic corpus, n_per_class={data.BUNDLED_MODEL_N_PER_CLASS}, "
            f"seed={data.BUNDLED_MODEL_SEED}"
        ),
    )
    (OUT / "surrogate_model.json").write_text(model_to_json(model))
    print(f"wrote surrogate_model.json ({len(model.classes)} classes)")

    for name, seed in data.TEST_SCENE_SEEDS.items():
        img = data.make_test_scene(seed)
        (OUT / f"{name}.ppm").write_bytes(save_ppm(img))
        print(f"wrote {name}.ppm ({img.width}x{img.height})")


if __name__ == "__main__":
    main()
