"""Command-line interface tests, run in process through cli.main."""
import json
import struct

import numpy as np
import pytest

import convelm
from convelm import cli


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("clicorpus")
    train = convelm.make_dataset(300, seed=31, num_classes=10)
    test = convelm.make_dataset(120, seed=32, num_classes=10)
    paths = {
        "root": root,
        "train_images": str(root / "train-images.idx3-ubyte"),
        "train_labels": str(root / "train-labels.idx1-ubyte"),
        "test_images": str(root / "test-images.idx3-ubyte"),
        "test_labels": str(root / "test-labels.idx1-ubyte"),
    }
    convelm.save_idx(train, paths["train_images"], paths["train_labels"])
    convelm.save_idx(test, paths["test_images"], paths["test_labels"])
    return paths


def test_augment_command_writes_named_outputs(corpus, tmp_path, capsys):
    out = tmp_path / "aug"
    rc = cli.main([
        "augment",
        "--train-images", corpus["train_images"],
        "--train-labels", corpus["train_labels"],
        "--out-dir", str(out), "--seed", "3",
    ])
    assert rc == 0
    ext = convelm.load_idx(str(out / "extended-train-images.idx3-ubyte"),
                           str(out / "extended-train-labels.idx1-ubyte"))
    assert len(ext) == 1200
    assert "1200" in capsys.readouterr().out


def test_augment_command_rejects_corrupt_input(tmp_path, capsys):
    bad_img = tmp_path / "bad.idx3-ubyte"
    bad_lab = tmp_path / "bad.idx1-ubyte"
    bad_img.write_bytes(struct.pack(">IIII", 0x999, 1, 2, 2) + b"\x00" * 4)
    bad_lab.write_bytes(struct.pack(">II", 0x801, 1) + b"\x00")
    out = tmp_path / "aug"
    rc = cli.main([
        "augment",
        "--train-images", str(bad_img),
        "--train-labels", str(bad_lab),
        "--out-dir", str(out),
    ])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["command"] == "augment"
    assert "error" in err
    assert not out.exists()  # no partial outputs


def _train(corpus, out_dir, extra=()):
    args = [
        "train",
        "--set", f"train_images={corpus['train_images']}",
        "--set", f"train_labels={corpus['train_labels']}",
        "--set", f"out_dir={out_dir}",
        "--set", "arch=2c-2s-4c-2s",
        "--set", "workers=2",
        "--set", "iterations=0",
        "--set", "batch_size=100",
        "--set", "seed=9",
        "--set", "lam=1.0",
    ]
    for pair in extra:
        args += ["--set", pair]
    return cli.main(args)


def test_train_average_eval_pipeline(corpus, tmp_path, capsys):
    out = tmp_path / "run"
    assert _train(corpus, out) == 0
    merged = str(tmp_path / "merged.celm")
    rc = cli.main([
        "average",
        str(out / "checkpoint-p0.celm"), str(out / "checkpoint-p1.celm"),
        "--out", merged,
    ])
    assert rc == 0
    rc = cli.main([
        "eval", merged,
        "--test-images", corpus["test_images"],
        "--test-labels", corpus["test_labels"],
        "--out", str(tmp_path / "m.csv"),
        "--trial", "holdout-3",
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "model_id,trial,accuracy,kappa,kappa_se" in stdout
    assert ",holdout-3," in stdout
    saved = (tmp_path / "m.csv").read_text()
    assert saved.splitlines()[0] == "model_id,trial,accuracy,kappa,kappa_se"


def test_train_with_config_file(corpus, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"train_images={corpus['train_images']}\n"
        f"train_labels={corpus['train_labels']}\n"
        f"out_dir={tmp_path / 'run'}\n"
        "arch=2c-2s\nworkers=2\niterations=0\nbatch_size=50\nlam=1.0\n"
    )
    assert cli.main(["train", "--config", str(cfg)]) == 0
    assert (tmp_path / "run" / "manifest.json").exists()


def test_train_reports_failure_as_json(corpus, tmp_path, capsys):
    # kernel 5 on 28px leaves side 24, and 7 does not divide 24
    rc = _train(corpus, tmp_path / "run2", extra=["arch=2c-7s"])
    assert rc == 1
    err_lines = [l for l in capsys.readouterr().err.splitlines() if l.strip()]
    err = json.loads(err_lines[-1])
    assert err["command"] == "train"


def test_gradcheck_command(capsys):
    assert cli.main(["gradcheck", "1c-2s"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert cli.main(["gradcheck", "1c-2s-1c-2s-1c-2s"]) == 1  # guardrail
    err = json.loads(capsys.readouterr().err.strip())
    assert err["command"] == "gradcheck"


def test_argparse_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        cli.main(["augment"])  # missing required arguments
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        cli.main([])  # no subcommand
