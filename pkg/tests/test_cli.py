import os
import subprocess
import sys

from vardim3d import build_reference_2d, save_checkpoint
from vardim3d.cli import run_command


def _run(argv):
    return subprocess.run(
        [sys.executable, "-m", "vardim3d.cli"] + argv,
        capture_output=True, text=True,
    )


def _fields(stdout):
    out = {}
    for line in stdout.splitlines():
        parts = line.split("\t")
        if len(parts) >= 2:
            out[parts[0]] = parts[1]
    return out


def test_no_arguments_exits_with_usage():
    proc = _run([])
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()


def test_inspect_reports_params_flops_shapes():
    proc = _run(["inspect", "--arch", "resnet3d18", "--depth-preserve",
                 "--input", "1x3x224x224"])
    assert proc.returncode == 0
    fields = _fields(proc.stdout)
    assert abs(float(fields["params_million"]) - 33.67) < 0.5
    assert abs(float(fields["flops_giga"]) - 15.99) < 1.6
    assert fields["shape_stage4"] == "512x3x7x7"


def test_inspect_unknown_arch_fails_cleanly():
    proc = _run(["inspect", "--arch", "resnet3d99"])
    assert proc.returncode == 1
    assert "unknown 3D architecture" in proc.stderr


def test_synth_writes_dataset_container(tmp_path):
    out = tmp_path / "ds.ckpt"
    proc = _run(["synth", "--kind", "cls3d", "--classes", "2", "--samples", "4",
                 "--shape", "8x12x12", "--seed", "1", "--out", str(out)])
    assert proc.returncode == 0
    assert out.exists()


def test_synth_corpus_writes_image_folder(tmp_path):
    out = tmp_path / "corpus"
    proc = _run(["synth", "--kind", "corpus2d", "--classes", "2", "--samples", "4",
                 "--image-size", "16", "--out", str(out)])
    assert proc.returncode == 0
    classes = sorted(os.listdir(out))
    assert classes == ["class000", "class001"]


def test_convert_writes_report_sidecar(tmp_path):
    src = tmp_path / "r2d.ckpt"
    save_checkpoint(build_reference_2d("resnet18", num_classes=4, seed=0).to_checkpoint(), src)
    out = tmp_path / "r3d.ckpt"
    proc = _run(["convert", "--rule", "i3d", "--in", str(src), "--out", str(out), "--k", "3"])
    assert proc.returncode == 0
    assert out.exists()
    report = (tmp_path / "r3d.ckpt.report.txt").read_text()
    assert report.startswith("matched\t")
    assert "transform\t" in report


def test_convert_missing_input_fails_cleanly(tmp_path):
    proc = _run(["convert", "--rule", "acs", "--in", str(tmp_path / "nope.ckpt"),
                 "--out", str(tmp_path / "x.ckpt")])
    assert proc.returncode == 1


def test_train_and_evaluate_pipeline(tmp_path):
    ds = tmp_path / "ds.ckpt"
    assert run_command([
        "synth", "--kind", "cls3d", "--classes", "2", "--samples", "8",
        "--shape", "8x16x16", "--seed", "1", "--out", str(ds),
    ]) == 0

    pre = tmp_path / "pre.ckpt"
    assert run_command([
        "pretrain", "--arch", "resnet3d18", "--epochs", "1", "--batch-size", "8",
        "--synth-classes", "2", "--synth-samples", "8", "--image-size", "16",
        "--lr", "0.01", "--seed", "0", "--out", str(pre),
        "--out-dir", str(tmp_path / "reports"),
    ]) == 0
    assert (tmp_path / "reports" / "pretrain_log.csv").exists()
    assert (tmp_path / "reports" / "pretrain_curves.png").exists()

    ft = tmp_path / "ft.ckpt"
    assert run_command([
        "finetune", "--arch", "resnet3d18", "--no-depth-preserve", "--epochs", "1",
        "--batch-size", "4", "--data", str(ds), "--init", str(pre), "--seed", "0",
        "--out", str(ft), "--out-dir", str(tmp_path / "reports"),
    ]) == 0
    assert (tmp_path / "reports" / "finetune_curves.png").exists()
    assert (tmp_path / "reports" / "finetune_metrics.csv").exists()

    assert run_command([
        "evaluate", "--arch", "resnet3d18", "--no-depth-preserve",
        "--ckpt", str(ft), "--data", str(ds),
        "--out-dir", str(tmp_path / "reports"),
    ]) == 0
    assert (tmp_path / "reports" / "evaluate_metrics.csv").exists()
