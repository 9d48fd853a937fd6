import logging

import numpy as np
import pytest
import torch
from PIL import Image

from cellstyle import (
    StyleJob,
    StyleTransferModel,
    TrainConfig,
    load_checkpoint,
    run_manifest,
    stylize,
    stylize_tensor,
    train_style_model,
)
from conftest import make_content, make_style, write_manifest_tree


class TestTraining:
    def test_smoke_run_produces_checkpoint_and_finite_loss(self, train_dirs, tmp_path, caplog):
        content, style = train_dirs
        out = tmp_path / "smoke.pt"
        with caplog.at_level(logging.INFO, logger="cellstyle"):
            path = train_style_model(
                content, style, 10, out, config=TrainConfig(crop_size=48, batch_size=2)
            )
        assert path.exists()
        assert any("loss" in r.message for r in caplog.records)
        _, _, iteration = load_checkpoint(path)
        assert iteration == 10

    def test_resume_continues_iteration_counter(self, train_dirs, tmp_path):
        content, style = train_dirs
        first = tmp_path / "first.pt"
        train_style_model(content, style, 5, first,
                          config=TrainConfig(crop_size=48, batch_size=2))
        second = tmp_path / "second.pt"
        train_style_model(content, style, 5, second, resume=first)
        _, _, iteration = load_checkpoint(second)
        assert iteration == 10

    def test_empty_directories_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(FileNotFoundError):
            train_style_model(tmp_path / "empty", tmp_path / "empty", 1, tmp_path / "x.pt")

    def test_checkpoint_carries_hyperparameters(self, train_dirs, tmp_path):
        content, style = train_dirs
        config = TrainConfig(crop_size=48, batch_size=2, style_weight=2.5, seed=9)
        path = train_style_model(content, style, 2, tmp_path / "m.pt", config=config)
        _, loaded, _ = load_checkpoint(path)
        assert loaded == config


@pytest.fixture(scope="module")
def model():
    model = StyleTransferModel(encoder_seed=0)
    model.eval()
    return model


class TestStylize:
    def test_shape_preserved_on_assorted_sizes(self, model):
        style = torch.rand(3, 48, 48)
        for h, w in [(64, 64), (96, 128), (100, 100), (67, 93), (31, 45), (128, 96)]:
            out = stylize_tensor(model, torch.rand(3, h, w), style)
            assert out.shape == (3, h, w)

    def test_empty_content_gives_near_uniform_output(self, model, tmp_path):
        rng = np.random.default_rng(1)
        Image.fromarray(np.zeros((64, 64), np.uint8)).save(tmp_path / "c.png")
        Image.fromarray(make_style(rng)).save(tmp_path / "s.png")
        out = stylize(
            model, StyleJob(str(tmp_path / "c.png"), str(tmp_path / "s.png"),
                            str(tmp_path / "o.png"))
        )
        assert out.shape == (64, 64, 3)
        spatial_std = out.reshape(-1, 3).astype(np.float64).std(axis=0)
        assert spatial_std.max() < 2.0  # no foreground structure

    def test_declared_size_mismatch_rejected(self, model, tmp_path):
        rng = np.random.default_rng(2)
        Image.fromarray(make_content(rng, size=64)).save(tmp_path / "c.png")
        Image.fromarray(make_style(rng)).save(tmp_path / "s.png")
        with pytest.raises(ValueError, match="expected"):
            stylize(
                model,
                StyleJob(str(tmp_path / "c.png"), str(tmp_path / "s.png"),
                         str(tmp_path / "o.png"), expected_size=(128, 128)),
            )

    def test_missing_content_rejected(self, model, tmp_path):
        with pytest.raises(FileNotFoundError):
            stylize(model, StyleJob(str(tmp_path / "nope.png"), str(tmp_path / "nope.png"),
                                    str(tmp_path / "o.png")))


class TestRunManifest:
    def test_one_image_per_entry(self, model, tmp_path):
        manifest_path = write_manifest_tree(tmp_path, n_entries=3)
        result = run_manifest(manifest_path, model)
        assert len(result.outputs) == 3
        assert not result.failures
        for i in range(3):
            assert (tmp_path / "images" / f"image_{i:04d}.png").exists()
        from cellstyle import read_manifest

        data = read_manifest(manifest_path)
        assert [e["image_path"] for e in data["entries"]] == [
            f"images/image_{i:04d}.png" for i in range(3)
        ]

    def test_partial_failure_accounting(self, model, tmp_path):
        manifest_path = write_manifest_tree(tmp_path, n_entries=3)
        (tmp_path / "tiles" / "tile_0001.png").unlink()
        result = run_manifest(manifest_path, model)
        assert len(result.outputs) == 2
        assert len(result.failures) == 1
        assert "content_0001" in result.failures[0][0]
        from cellstyle import read_manifest

        data = read_manifest(manifest_path)
        assert "image_path" not in data["entries"][1]
        assert data["entries"][0]["image_path"]

    def test_rerun_is_idempotent_unless_forced(self, model, tmp_path):
        manifest_path = write_manifest_tree(tmp_path, n_entries=2)
        first = run_manifest(manifest_path, model)
        assert len(first.outputs) == 2
        stamp = (tmp_path / "images" / "image_0000.png").stat().st_mtime_ns
        again = run_manifest(manifest_path, model)
        assert len(again.outputs) == 0
        assert len(again.skipped) == 2
        assert (tmp_path / "images" / "image_0000.png").stat().st_mtime_ns == stamp
        forced = run_manifest(manifest_path, model, force=True)
        assert len(forced.outputs) == 2

    def test_unsupported_schema_rejected(self, model, tmp_path):
        import json

        manifest_path = write_manifest_tree(tmp_path, n_entries=1)
        data = json.loads(manifest_path.read_text())
        data["schema_version"] = 99
        manifest_path.write_text(json.dumps(data))
        from cellstyle import ManifestError

        with pytest.raises(ManifestError, match="schema_version"):
            run_manifest(manifest_path, model)
