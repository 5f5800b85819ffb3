"""Run-coordination tests: config parsing, the k-worker map step, the
reduce and eval wrappers, and failure reporting via the manifest."""
import json
import os

import numpy as np
import pytest

import convelm
from convelm import orchestrator


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    train = convelm.make_dataset(400, seed=21, num_classes=10)
    test = convelm.make_dataset(150, seed=22, num_classes=10)
    paths = {
        "train_images": str(root / "train-images.idx3-ubyte"),
        "train_labels": str(root / "train-labels.idx1-ubyte"),
        "test_images": str(root / "test-images.idx3-ubyte"),
        "test_labels": str(root / "test-labels.idx1-ubyte"),
    }
    convelm.save_idx(train, paths["train_images"], paths["train_labels"])
    convelm.save_idx(test, paths["test_images"], paths["test_labels"])
    return paths


def _config(corpus, out_dir, **kw):
    base = dict(
        train_images=corpus["train_images"],
        train_labels=corpus["train_labels"],
        out_dir=str(out_dir),
        arch="2c-2s-4c-2s",
        kernel_size=5,
        workers=3,
        iterations=0,
        batch_size=100,
        seed=6,
        lam=1.0,
    )
    base.update(kw)
    return orchestrator.RunConfig(**base)


def test_parse_config_text_grammar():
    text = "workers = 4\n# a comment\n\narch=6c-2s-12c-2s # trailing note\n"
    got = orchestrator.parse_config_text(text)
    assert got == {"workers": "4", "arch": "6c-2s-12c-2s"}
    with pytest.raises(ValueError):
        orchestrator.parse_config_text("workers 4")


def test_load_run_config_file_plus_overrides(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("workers=2\nbase_alpha=0.5\nreshuffle=false\n")
    cfg = orchestrator.load_run_config(str(cfg_path), {"workers": "5"})
    assert cfg.workers == 5  # override wins
    assert cfg.base_alpha == pytest.approx(0.5)
    assert cfg.reshuffle is False
    with pytest.raises(ValueError):
        orchestrator.load_run_config(str(cfg_path), {"no_such_key": "1"})
    with pytest.raises(ValueError):
        orchestrator.load_run_config(None, {"workers": "three"})
    with pytest.raises(ValueError):
        orchestrator.load_run_config(None, {"reshuffle": "maybe"})


def test_run_config_validation():
    with pytest.raises(ValueError):
        orchestrator.RunConfig(workers=0)
    with pytest.raises(ValueError):
        orchestrator.RunConfig(eval_mode="sometimes")
    cfg = orchestrator.RunConfig(eval_mode="kfold-6")
    assert cfg.eval_mode == "kfold-6"


def test_run_config_text_round_trip(tmp_path):
    cfg = orchestrator.RunConfig(workers=4, base_alpha=0.25, reshuffle=False)
    path = tmp_path / "resolved.cfg"
    path.write_text(cfg.to_text())
    back = orchestrator.load_run_config(str(path))
    assert back == cfg


def test_run_training_writes_everything(corpus, tmp_path, capsys):
    out = tmp_path / "run"
    cfg = _config(corpus, out)
    manifest = orchestrator.run_training(cfg)
    assert manifest["status"] == "ok"
    assert manifest["workers"] == 3
    # 400 examples over 3 workers leaves one unassigned
    assert manifest["unassigned_examples"] == 1
    assert "unassigned" in capsys.readouterr().err
    for i in range(3):
        assert os.path.exists(out / f"checkpoint-p{i}.celm")
        assert os.path.exists(out / f"report-p{i}.csv")
        header = (out / f"report-p{i}.csv").read_text().splitlines()[0]
        assert header == "iteration,cost,train_accuracy,seconds"
    disk = json.loads((out / "manifest.json").read_text())
    assert disk == manifest
    resolved = orchestrator.load_run_config(str(out / "run-config.txt"))
    assert resolved == cfg
    # each worker trained its own slice: partition ids are distinct
    ids = set()
    for i in range(3):
        ck = convelm.read_checkpoint(str(out / f"checkpoint-p{i}.celm"))
        ids.update(ck.partition_ids)
    assert ids == {0, 1, 2}


def test_run_training_failure_keeps_survivors(corpus, tmp_path, monkeypatch):
    real = orchestrator.train_partition

    def sabotage(images, labels, config, init, partition_id=0):
        if partition_id == 1:
            raise RuntimeError("injected worker failure")
        return real(images, labels, config, init, partition_id)

    monkeypatch.setattr(orchestrator, "train_partition", sabotage)
    out = tmp_path / "run"
    with pytest.raises(orchestrator.TrainingRunError):
        orchestrator.run_training(_config(corpus, out))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert manifest["failures"] == [
        {"partition": 1, "error": "RuntimeError: injected worker failure"}
    ]
    assert os.path.exists(out / "checkpoint-p0.celm")
    assert os.path.exists(out / "checkpoint-p2.celm")
    assert not os.path.exists(out / "checkpoint-p1.celm")


def test_run_average_and_eval(corpus, tmp_path):
    out = tmp_path / "run"
    orchestrator.run_training(_config(corpus, out))
    paths = [str(out / f"checkpoint-p{i}.celm") for i in range(3)]
    merged = str(out / "merged.celm")
    orchestrator.run_average(paths, merged)
    ck = convelm.read_checkpoint(merged)
    assert ck.partition_ids == (0, 1, 2)
    result, csv_text = orchestrator.run_eval(
        merged, corpus["test_images"], corpus["test_labels"],
        csv_path=str(out / "metrics.csv"),
    )
    assert set(result) >= {"accuracy", "kappa", "kappa_se"}
    lines = csv_text.strip().splitlines()
    assert lines[0] == "model_id,trial,accuracy,kappa,kappa_se"
    row = lines[1].split(",")
    assert row[0] == "merged"
    assert 0.0 <= float(row[2]) <= 100.0
    assert (out / "metrics.csv").read_text() == csv_text


def test_run_eval_rejects_mismatched_geometry(corpus, tmp_path):
    out = tmp_path / "run"
    orchestrator.run_training(_config(corpus, out, workers=1))
    small = convelm.make_dataset(10, seed=1, num_classes=3, side=12)
    ip, lp = str(tmp_path / "s.idx3"), str(tmp_path / "s.idx1")
    convelm.save_idx(small, ip, lp)
    with pytest.raises(ValueError):
        orchestrator.run_eval(str(out / "checkpoint-p0.celm"), ip, lp)


def test_apply_model_chunking_matches_single_shot(corpus, tmp_path, monkeypatch):
    out = tmp_path / "run"
    orchestrator.run_training(_config(corpus, out, workers=1))
    ck = convelm.read_checkpoint(str(out / "checkpoint-p0.celm"))
    images = convelm.load_idx(corpus["test_images"], corpus["test_labels"]).images
    whole = orchestrator.apply_model(ck, images)
    monkeypatch.setattr(orchestrator, "EVAL_BATCH", 7)
    chunked = orchestrator.apply_model(ck, images)
    np.testing.assert_array_equal(whole, chunked)
