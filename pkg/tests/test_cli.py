import json

import pytest

from soundseg.cli import main
from soundseg import synthesis

from conftest import TINY_OVERRIDES


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """fixtures -> synthesize -> train, shared across the CLI tests."""
    ws = tmp_path_factory.mktemp("cli")
    corpus = ws / "corpus"
    assert main([
        "fixtures", "--out", str(corpus), "--n", "8", "--seed", "0",
        "--classes", "disk", "square", "--clips-per-class", "3",
    ]) == 0

    manifest = ws / "manifest.jsonl"
    assert main([
        "synthesize",
        "--visual", str(corpus / "visual_annotations.json"),
        "--audio", str(corpus / "audio_annotations.csv"),
        "--test-frac", "0.25", "--seed", "0", "--out", str(manifest),
    ]) == 0

    ckpt = ws / "model.ckpt"
    args = ["train", "--manifest", str(manifest), "--root", str(corpus),
            "--steps", "3", "--out", str(ckpt)]
    for override in TINY_OVERRIDES:
        args += ["--set", override]
    assert main(args) == 0
    return ws, corpus, manifest, ckpt


def test_synthesize_writes_manifest(workspace):
    _, _, manifest, _ = workspace
    loaded = synthesis.read_manifest(manifest)
    assert len(loaded.samples) == 8
    assert set(loaded.class_counts) == {"disk", "square"}
    assert loaded.split_samples("test")


def test_train_writes_checkpoint(workspace):
    _, _, _, ckpt = workspace
    assert ckpt.exists() and ckpt.stat().st_size > 0


def test_eval_emits_report_artifacts(workspace):
    ws, corpus, manifest, ckpt = workspace
    out = ws / "eval"
    assert main([
        "eval", "--checkpoint", str(ckpt), "--manifest", str(manifest),
        "--root", str(corpus), "--out-dir", str(out),
    ]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["num_samples"] > 0
    assert "miou" in report and "per_class" in report
    table = (out / "report.txt").read_text()
    assert "mean" in table
    csv_lines = (out / "report.csv").read_text().strip().splitlines()
    assert csv_lines[0].startswith("class,")
    assert len(csv_lines) >= 2
    png = (out / "report.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_zero_shot_emits_artifacts(workspace):
    ws, corpus, manifest, ckpt = workspace
    out = ws / "zs"
    assert main([
        "zero-shot", "--checkpoint", str(ckpt), "--manifest", str(manifest),
        "--root", str(corpus), "--out-dir", str(out),
    ]) == 0
    for suffix in (".json", ".txt", ".csv", ".png"):
        assert (out / f"zero_shot{suffix}").exists()


def test_split_openset_command(workspace):
    ws, _, manifest, _ = workspace
    seen_path, unseen_path = ws / "seen.jsonl", ws / "unseen.jsonl"
    assert main([
        "split-openset", "--manifest", str(manifest), "--n-seen", "1",
        "--out-seen", str(seen_path), "--out-unseen", str(unseen_path),
    ]) == 0
    seen = synthesis.read_manifest(seen_path)
    unseen = synthesis.read_manifest(unseen_path)
    assert not set(seen.class_counts) & set(unseen.class_counts)


def test_cli_surfaces_errors_as_exit_code(tmp_path, capsys):
    code = main([
        "eval", "--checkpoint", str(tmp_path / "missing.ckpt"),
        "--manifest", str(tmp_path / "missing.jsonl"),
        "--root", str(tmp_path), "--out-dir", str(tmp_path / "out"),
    ])
    assert code == 1
    assert "error:" in capsys.readouterr().err
