import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from noiseprobe.cli import main
from noiseprobe.image import Image, load_ppm, save_ppm

from conftest import TESTS_DATA, rand_image


def write_ppm(path, img):
    path.write_bytes(save_ppm(img))


@pytest.fixture
def midtone_file(tmp_path, rng):
    img = Image(rng.integers(20, 236, (32, 32, 3), dtype=np.uint8))
    p = tmp_path / "in.ppm"
    write_ppm(p, img)
    return p, img


class TestCorrupt:
    def test_zero_density_identity_and_inf(self, tmp_path, midtone_file, capsys):
        src, _ = midtone_file
        out = tmp_path / "out.ppm"
        rc = main(["corrupt", "--in", str(src), "--out", str(out),
                   "--noise", "impulse", "--density", "0", "--seed", "1"])
        assert rc == 0
        assert out.read_bytes() == src.read_bytes()
        assert capsys.readouterr().out.strip() == "psnr_db=inf"

    def test_determinism(self, tmp_path, midtone_file):
        src, _ = midtone_file
        out1, out2 = tmp_path / "o1.ppm", tmp_path / "o2.ppm"
        args = ["--noise", "impulse", "--density", "0.2", "--seed", "7"]
        assert main(["corrupt", "--in", str(src), "--out", str(out1)] + args) == 0
        assert main(["corrupt", "--in", str(src), "--out", str(out2)] + args) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_density_out_of_range_fails(self, tmp_path, midtone_file, capsys):
        src, _ = midtone_file
        rc = main(["corrupt", "--in", str(src), "--out", str(tmp_path / "x.ppm"),
                   "--density", "1.5"])
        assert rc != 0
        assert "error" in capsys.readouterr().err

    def test_gaussian_requires_sigma(self, tmp_path, midtone_file):
        src, _ = midtone_file
        rc = main(["corrupt", "--in", str(src), "--out", str(tmp_path / "x.ppm"),
                   "--noise", "gaussian"])
        assert rc != 0

    def test_gaussian_corruption(self, tmp_path, midtone_file):
        src, img = midtone_file
        out = tmp_path / "g.ppm"
        rc = main(["corrupt", "--in", str(src), "--out", str(out),
                   "--noise", "gaussian", "--sigma", "15", "--seed", "4"])
        assert rc == 0
        from noiseprobe.noise import add_gaussian
        assert load_ppm(out.read_bytes()) == add_gaussian(img, 15.0, 4)

    def test_missing_input(self, tmp_path):
        rc = main(["corrupt", "--in", str(tmp_path / "nope.ppm"),
                   "--out", str(tmp_path / "x.ppm")])
        assert rc != 0


class TestDenoise:
    def test_clean_midtone_is_identity(self, tmp_path, midtone_file):
        src, _ = midtone_file
        out = tmp_path / "out.ppm"
        assert main(["denoise", "--in", str(src), "--out", str(out)]) == 0
        assert out.read_bytes() == src.read_bytes()

    def test_restoration_improves_psnr(self, tmp_path, midtone_file, capsys):
        src, clean_img = midtone_file
        noisy = tmp_path / "noisy.ppm"
        restored = tmp_path / "restored.ppm"
        main(["corrupt", "--in", str(src), "--out", str(noisy),
              "--density", "0.1", "--seed", "3"])
        psnr_noisy = float(capsys.readouterr().out.strip().split("=")[1])
        rc = main(["denoise", "--in", str(noisy), "--out", str(restored),
                   "--reference", str(src)])
        assert rc == 0
        psnr_restored = float(capsys.readouterr().out.strip().split("=")[1])
        assert psnr_restored > psnr_noisy

    def test_lowpass_filter_path(self, tmp_path, midtone_file, capsys):
        src, img = midtone_file
        out = tmp_path / "out.ppm"
        rc = main(["denoise", "--in", str(src), "--out", str(out),
                   "--filter", "lowpass", "--sigma", "1.0"])
        assert rc == 0
        from noiseprobe.denoise import gaussian_lowpass
        assert load_ppm(out.read_bytes()) == gaussian_lowpass(img, 1.0)

    def test_missing_input(self, tmp_path):
        assert main(["denoise", "--in", str(tmp_path / "nope.ppm"),
                     "--out", str(tmp_path / "x.ppm")]) != 0


class TestPsnrCommand:
    def test_identical_prints_inf(self, tmp_path, midtone_file, capsys):
        src, _ = midtone_file
        assert main(["psnr", str(src), str(src)]) == 0
        assert capsys.readouterr().out.strip() == "inf"

    def test_extremes_print_zero(self, tmp_path, capsys):
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        write_ppm(a, Image.constant(4, 4, (0, 0, 0)))
        write_ppm(b, Image.constant(4, 4, (255, 255, 255)))
        assert main(["psnr", str(a), str(b)]) == 0
        assert capsys.readouterr().out.strip() == "0.000000"

    def test_dimension_mismatch_fails(self, tmp_path, capsys):
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        write_ppm(a, Image.constant(4, 4, (0, 0, 0)))
        write_ppm(b, Image.constant(5, 4, (0, 0, 0)))
        assert main(["psnr", str(a), str(b)]) != 0


class TestGenCorpusAndBuildSurrogate:
    def test_round_trip(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        model_path = tmp_path / "model.json"
        assert main(["gen-corpus", "--out", str(corpus_dir),
                     "--n-per-class", "2", "--seed", "11"]) == 0
        files = sorted(corpus_dir.glob("*.ppm"))
        assert len(files) == 16
        assert main(["build-surrogate", "--corpus", str(corpus_dir),
                     "--out", str(model_path), "--seed", "11"]) == 0
        doc = json.loads(model_path.read_text())
        assert len(doc["classes"]) == 8
        assert len(doc["centroids"][0]) == 16 * 16 * 3

    def test_gen_corpus_deterministic(self, tmp_path):
        d1, d2 = tmp_path / "c1", tmp_path / "c2"
        for d in (d1, d2):
            main(["gen-corpus", "--out", str(d), "--n-per-class", "1", "--seed", "3"])
        for f1, f2 in zip(sorted(d1.glob("*.ppm")), sorted(d2.glob("*.ppm"))):
            assert f1.read_bytes() == f2.read_bytes()


def _scrub_volatile(report: dict) -> dict:
    cfg = dict(report["config"])
    for key in ("corpus", "out", "csv", "config"):
        cfg.pop(key, None)
    return {**report, "config": cfg}


class TestAttackCommand:
    def test_golden_report(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        out = tmp_path / "report.json"
        csv_out = tmp_path / "report.csv"
        assert main(["gen-corpus", "--out", str(corpus_dir),
                     "--n-per-class", "1", "--seed", "777"]) == 0
        rc = main([
            "attack", "--corpus", str(corpus_dir), "--out", str(out),
            "--csv", str(csv_out), "--bundled-surrogate", "--seed", "20250809",
            "--criterion", "jaccard", "--tau", "0", "--min-score", "0.15",
            "--workers", "2",
        ])
        assert rc == 0
        golden = json.loads((TESTS_DATA / "golden_attack_report.json").read_text())
        assert _scrub_volatile(json.loads(out.read_text())) == golden
        lines = csv_out.read_text().strip().splitlines()
        assert lines[0] == "image_id,outcome_density,queries,baseline_top1,final_top1"
        assert len(lines) == 9

    def test_run_twice_byte_identical(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        main(["gen-corpus", "--out", str(corpus_dir), "--n-per-class", "1",
              "--seed", "5"])
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            rc = main(["attack", "--corpus", str(corpus_dir), "--out", str(out),
                       "--bundled-surrogate", "--seed", "99", "--min-score", "0.15"])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_requires_exactly_one_oracle(self, tmp_path, capsys):
        corpus_dir = tmp_path / "corpus"
        main(["gen-corpus", "--out", str(corpus_dir), "--n-per-class", "1",
              "--seed", "5"])
        rc = main(["attack", "--corpus", str(corpus_dir),
                   "--out", str(tmp_path / "r.json")])
        assert rc != 0
        assert "oracle" in capsys.readouterr().err

    def test_config_file_with_flag_precedence(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        main(["gen-corpus", "--out", str(corpus_dir), "--n-per-class", "1",
              "--seed", "5"])
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "corpus": str(corpus_dir),
            "bundled_surrogate": True,
            "seed": 1,
            "max_density": 0.2,
            "min_score": 0.15,
        }))
        out = tmp_path / "r.json"
        # --seed overrides the config value; corpus comes from the file
        rc = main(["attack", "--config", str(cfg_path), "--out", str(out),
                   "--seed", "42"])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["config"]["seed"] == 42
        assert report["config"]["max_density"] == 0.2


class ConstantStub:
    """HTTP stub returning one fixed label set for every request."""

    def __init__(self):
        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                self.rfile.read(int(self.headers.get("Content-Length", 0)))
                payload = json.dumps({
                    "responses": [{"labelAnnotations": [
                        {"description": "Static", "score": 0.9}
                    ]}]
                }).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def endpoint(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/annotate"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class FailingForImageStub:
    """Returns 403 whenever the request carries a marked image's payload."""

    def __init__(self, poison_b64: str):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                if stub.poison.encode() in body:
                    payload = b'{"error": "refused"}'
                    self.send_response(403)
                else:
                    payload = json.dumps({
                        "responses": [{"labelAnnotations": [
                            {"description": "Fine", "score": 0.9}
                        ]}]
                    }).encode()
                    self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.poison = poison_b64
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def endpoint(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}/annotate"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class TestPartialFailures:
    def test_remote_partial_failure_exits_zero_with_errored_images(
        self, tmp_path, monkeypatch, rng
    ):
        import base64

        from noiseprobe.png import encode_png

        monkeypatch.setenv("VISION_API_KEY", "k")
        good, bad = rand_image(rng, 12, 12), rand_image(rng, 12, 12)
        corpus_dir = tmp_path / "corpus"
        corpus_dir.mkdir()
        write_ppm(corpus_dir / "good_0.ppm", good)
        write_ppm(corpus_dir / "bad_0.ppm", bad)
        poison = base64.b64encode(encode_png(bad)).decode()
        stub = FailingForImageStub(poison)
        try:
            remote_cfg = tmp_path / "remote.json"
            remote_cfg.write_text(json.dumps({
                "endpoint": stub.endpoint,
                "max_requests_per_second": 10000.0,
                "backoff_base": 0.01,
                "max_attempts": 1,
            }))
            out = tmp_path / "report.json"
            rc = main(["attack", "--corpus", str(corpus_dir), "--out", str(out),
                       "--remote", str(remote_cfg), "--seed", "2",
                       "--max-density", "0.1", "--workers", "1"])
            assert rc == 0  # partial failure still completes the run
            report = json.loads(out.read_text())
            assert report["summary"]["errored_images"] == 1
            assert len(report["traces"]) == 1
            assert report["errors"][0]["image_id"] == "bad_0"
        finally:
            stub.close()


class TestCurveCommand:
    def test_constant_remote_oracle_yields_zero_rates(self, tmp_path, monkeypatch, rng):
        monkeypatch.setenv("VISION_API_KEY", "k")
        stub = ConstantStub()
        try:
            corpus_dir = tmp_path / "corpus"
            corpus_dir.mkdir()
            write_ppm(corpus_dir / "a_0.ppm", rand_image(rng, 16, 16))
            write_ppm(corpus_dir / "b_0.ppm", rand_image(rng, 16, 16))
            remote_cfg = tmp_path / "remote.json"
            remote_cfg.write_text(json.dumps({
                "endpoint": stub.endpoint,
                "max_requests_per_second": 10000.0,
                "backoff_base": 0.01,
            }))
            out = tmp_path / "curve.csv"
            rc = main(["curve", "--corpus", str(corpus_dir), "--out", str(out),
                       "--remote", str(remote_cfg),
                       "--densities", "0.1,0.3,0.5", "--seed", "4"])
            assert rc == 0
            lines = out.read_text().strip().splitlines()
            assert lines[0] == "density,success_rate,n"
            assert [ln.split(",")[1] for ln in lines[1:]] == ["0.000000"] * 3
        finally:
            stub.close()

    def test_bundled_surrogate_curve_with_json(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        main(["gen-corpus", "--out", str(corpus_dir), "--n-per-class", "1",
              "--seed", "7"])
        out, jout = tmp_path / "c.csv", tmp_path / "c.json"
        rc = main(["curve", "--corpus", str(corpus_dir), "--out", str(out),
                   "--json", str(jout), "--bundled-surrogate",
                   "--densities", "0.2,0.8", "--min-score", "0.15", "--seed", "6"])
        assert rc == 0
        doc = json.loads(jout.read_text())
        assert doc["config"]["seed"] == 6
        assert len(doc["points"]) == 2


class TestEvaluateCommand:
    def test_zero_density_match_rate_one(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        main(["gen-corpus", "--out", str(corpus_dir), "--n-per-class", "1",
              "--seed", "13"])
        out = tmp_path / "eval.json"
        rc = main(["evaluate", "--corpus", str(corpus_dir), "--out", str(out),
                   "--bundled-surrogate", "--density", "0", "--seed", "2"])
        assert rc == 0
        doc = json.loads(out.read_text())
        agg = doc["report"]["aggregate"]
        assert agg["restoration_match_rate"] == 1.0
        assert agg["mean_jaccard_restored"] == 1.0
        assert doc["config"]["oracle_identity"].startswith("surrogate:")
