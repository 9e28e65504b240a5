import json

import numpy as np
import pytest

from fernmatch import GrayImage, load_model, load_pgm, save_pgm
from fernmatch.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, MATCH_CSV_HEADER, main
from fernmatch.evaluate import EVAL_CSV_HEADER
from fernmatch.texture import synthetic_texture


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Model image + small config, trained once for the whole module."""
    root = tmp_path_factory.mktemp("cli")
    image = synthetic_texture(160, 160, seed=11, num_shapes=90)
    save_pgm(image, root / "model.pgm")
    # mild warp ranges: the fixture exercises the plumbing, and 20 views
    # are too few to learn full-rotation invariance
    (root / "run.cfg").write_text(
        "model_image = model.pgm\n"
        "output_dir = out\n"
        "num_warps = 20\n"
        "h = 8\n"
        "m = 8\n"
        "s = 8\n"
        "seed = 5\n"
        "theta_min = -0.3\ntheta_max = 0.3\n"
        "phi_min = -0.3\nphi_max = 0.3\n"
        "lambda1_min = 0.9\nlambda1_max = 1.1\n"
        "lambda2_min = 0.9\nlambda2_max = 1.1\n"
        "tx_min = -4\ntx_max = 4\n"
        "ty_min = -4\nty_max = 4\n"
        "noise_min = 0\nnoise_max = 2\n"
        "detector_max_keypoints = 150\n"
        "ransac_iterations = 400\n"
    )
    code = main(["train", "--config", str(root / "run.cfg")])
    assert code == EXIT_OK
    return root


class TestTrain:
    def test_model_file_valid(self, workspace):
        model = load_model(workspace / "out" / "model.fern")
        assert model.num_classes == 8
        assert model.ensemble.num_ferns == 8

    def test_training_report_written(self, workspace):
        report = json.loads((workspace / "out" / "training_report.json").read_text())
        assert report["num_classes"] == 8
        assert len(report["classes"]) == 8

    def test_deterministic_byte_identical(self, workspace, tmp_path):
        cfg = tmp_path / "again.cfg"
        cfg.write_text(
            (workspace / "run.cfg")
            .read_text()
            .replace("model_image = model.pgm",
                     f"model_image = {workspace / 'model.pgm'}")
            .replace("output_dir = out", f"output_dir = {tmp_path / 'out2'}")
        )
        assert main(["train", "--config", str(cfg)]) == EXIT_OK
        original = (workspace / "out" / "model.fern").read_bytes()
        again = (tmp_path / "out2" / "model.fern").read_bytes()
        assert original == again

    def test_insufficient_keypoints_exit_code(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "big.cfg"
        cfg.write_text(
            f"model_image = {workspace / 'model.pgm'}\n"
            f"output_dir = {tmp_path / 'out'}\n"
            "num_warps = 1\nh = 5000\nm = 2\ns = 4\n"
        )
        assert main(["train", "--config", str(cfg)]) == EXIT_DATA
        assert "keypoints" in capsys.readouterr().err

    def test_missing_config_exit_code(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == EXIT_DATA


class TestUsage:
    def test_no_arguments(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_flag(self):
        assert main(["train"]) == EXIT_USAGE


class TestMatch:
    def test_self_match_outputs(self, workspace, tmp_path):
        out = tmp_path / "match"
        code = main([
            "match",
            "--model", str(workspace / "out" / "model.fern"),
            "--image", str(workspace / "model.pgm"),
            "--out", str(out),
        ])
        assert code == EXIT_OK

        csv_lines = (out / "correspondences.csv").read_text().splitlines()
        assert csv_lines[0] == MATCH_CSV_HEADER
        assert MATCH_CSV_HEADER == "model_x,model_y,test_x,test_y,log_score,is_inlier"
        assert len(csv_lines) > 1

        hom = (out / "homography.txt").read_text().split()
        assert len(hom) == 9
        matrix = np.array([float(v) for v in hom]).reshape(3, 3)
        assert np.allclose(matrix, np.eye(3), atol=1e-3)

        annotated = load_pgm(out / "annotated.pgm")
        original = load_pgm(workspace / "model.pgm")
        assert annotated.pixels.shape == original.pixels.shape
        assert (annotated.pixels == 255).sum() > (original.pixels == 255).sum()

        # inliers >= 0.7 * h on a self match
        inlier_count = sum(int(line.rsplit(",", 1)[1]) for line in csv_lines[1:])
        assert inlier_count >= 0.7 * 8

    def test_blank_image_no_model(self, workspace, tmp_path):
        blank = tmp_path / "blank.pgm"
        save_pgm(GrayImage(np.zeros((160, 160), dtype=np.uint8)), blank)
        out = tmp_path / "match"
        code = main([
            "match",
            "--model", str(workspace / "out" / "model.fern"),
            "--image", str(blank),
            "--out", str(out),
        ])
        assert code == EXIT_OK
        assert (out / "homography.txt").read_text().strip() == "no-model"
        assert (out / "correspondences.csv").read_text().splitlines() == [MATCH_CSV_HEADER]

    def test_missing_model_exit_code(self, workspace, tmp_path):
        assert main([
            "match",
            "--model", str(tmp_path / "missing.fern"),
            "--image", str(workspace / "model.pgm"),
            "--out", str(tmp_path / "m"),
        ]) == EXIT_DATA


class TestEval:
    def test_zero_test_warps(self, workspace, tmp_path):
        out = tmp_path / "eval0"
        code = main([
            "eval", "--config", str(workspace / "run.cfg"),
            "--test-warps", "0", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert (out / "eval.csv").read_text().splitlines() == [EVAL_CSV_HEADER]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["frames"] == 0

    def test_eval_csv_deterministic_modulo_timing(self, workspace, tmp_path):
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            code = main([
                "eval", "--config", str(workspace / "run.cfg"),
                "--test-warps", "3", "--out", str(out),
            ])
            assert code == EXIT_OK
            outs.append((out / "eval.csv").read_text().splitlines())

        def strip_timing(lines):
            return [",".join(line.split(",")[:-1]) for line in lines]

        assert strip_timing(outs[0]) == strip_timing(outs[1])
        assert outs[0][0] == EVAL_CSV_HEADER

    def test_eval_accounting_invariant(self, workspace, tmp_path):
        out = tmp_path / "eval_acc"
        assert main([
            "eval", "--config", str(workspace / "run.cfg"),
            "--test-warps", "4", "--out", str(out),
        ]) == EXIT_OK
        lines = (out / "eval.csv").read_text().splitlines()[1:]
        assert len(lines) == 8  # one row per frame per method
        for line in lines:
            parts = line.split(",")
            total_gt, detected, recognized = int(parts[2]), int(parts[3]), int(parts[4])
            num_corr, num_inliers = int(parts[6]), int(parts[7])
            assert recognized <= detected <= total_gt
            assert num_inliers <= num_corr


class TestInspect:
    def test_prints_header_and_classes(self, workspace, capsys):
        assert main(["inspect", "--model", str(workspace / "out" / "model.fern")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "patch_side: 33" in out
        assert "ferns: 8" in out
        assert "classes: 8" in out
        assert "class 0:" in out

    def test_bad_file_exit_code(self, tmp_path):
        bad = tmp_path / "bad.fern"
        bad.write_bytes(b"not a model")
        assert main(["inspect", "--model", str(bad)]) == EXIT_DATA
