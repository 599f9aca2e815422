import json
import subprocess
import sys

import pytest

from latentdp.cli import main
from latentdp.corpus import generate_synthetic, write_jsonl

TINY = {
    "model": {"d_tok": 8, "layers": 1, "heads": 2, "embed_dim": 16, "hidden": 16, "ffn_mult": 2},
    "training": {"pretrain_steps": 30, "batch_size": 16, "eval_every": 15},
    "data": {"downstream_count": 60, "public_count": 300},
    "schedule": {"total_iterations": 2, "retrain_steps": 5},
    "prplus": {"steps_per_epoch": 5, "max_epochs": 2},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "cfg.json").write_text(json.dumps(TINY))
    write_jsonl(d / "docs.jsonl", (doc.to_json() for doc in generate_synthetic("sentiment", 12, seed=9)))
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 else None)


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "latentdp.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("pretrain", "prune", "train-noisy", "rewrite", "evaluate", "calibrate", "estimate-clip", "run"):
        assert cmd in res.stdout


def test_calibrate_gaussian(capsys):
    code, out = run(capsys, "calibrate", "--dimension", 15360, "--clip-c", 0.1, "--epsilon", 500, "--delta", 1e-5,
                    "--mechanism", "gaussian")
    assert code == 0
    assert out["sigma"] == pytest.approx(0.2402, abs=1e-4)


def test_calibrate_infinite(capsys):
    code, out = run(capsys, "calibrate", "--dimension", 640, "--epsilon", "inf")
    assert code == 0 and out["noise_scale"] == 0.0 and out["epsilon"] == "inf"


def test_invalid_privacy_flags(capsys):
    assert main(["calibrate", "--dimension", "4", "--epsilon", "1", "--mechanism", "gaussian"]) == 2
    assert "delta" in capsys.readouterr().err


def test_bad_dataset_reports_lines(capsys, workdir, tmp_path):
    code, _ = run(capsys, "pretrain", "--config", workdir / "cfg.json", "--out", workdir / "ck")
    assert code == 0
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"text": "ok", "label": "a"}\n{"label": "b"}\n')
    assert main(["rewrite", "--checkpoint", str(workdir / "ck"), "--input", str(bad), "--output", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_staged_workflow(capsys, workdir):
    cfg = workdir / "cfg.json"
    if not (workdir / "ck").exists():
        assert run(capsys, "pretrain", "--config", cfg, "--out", workdir / "ck")[0] == 0
    code, out = run(capsys, "prune", "--config", cfg, "--checkpoint", workdir / "ck", "--out", workdir / "pr")
    assert code == 0 and out["pruned"] > 0
    code, out = run(capsys, "train-noisy", "--config", cfg, "--checkpoint", workdir / "pr", "--epsilon", 50,
                    "--out", workdir / "prp")
    assert code == 0 and out["epochs"] >= 1
    code, out = run(capsys, "estimate-clip", "--config", cfg, "--checkpoint", workdir / "ck", "--limit", 50)
    assert code == 0 and out["recommended_c"] > 0
    code, out = run(capsys, "calibrate", "--checkpoint", workdir / "pr", "--epsilon", 5)
    assert code == 0 and out["dimension"] < 8 * 20

    rw = workdir / "rw.jsonl"
    code, out = run(capsys, "rewrite", "--checkpoint", workdir / "prp", "--input", workdir / "docs.jsonl",
                    "--output", rw, "--epsilon", 50, "--beam", 2, "--audit")
    assert code == 0 and out["documents"] == 12
    rows = [json.loads(s) for s in rw.read_text().splitlines()]
    assert all("original_text" in r for r in rows)
    code, out = run(capsys, "evaluate", "--input", rw, "--test", workdir / "docs.jsonl")
    assert code == 0 and 0 <= out["bleu"]["score"] <= 100 and 0 <= out["macro_f1"] <= 1


def test_rewrite_repeatable(capsys, workdir):
    if not (workdir / "ck").exists():
        run(capsys, "pretrain", "--config", workdir / "cfg.json", "--out", workdir / "ck")
    outs = []
    for name in ("r1.jsonl", "r2.jsonl"):
        run(capsys, "rewrite", "--checkpoint", workdir / "ck", "--input", workdir / "docs.jsonl",
            "--output", workdir / name, "--epsilon", 20, "--seed", 5, "--beam", 1)
        outs.append((workdir / name).read_bytes())
    assert outs[0] == outs[1]


def test_run_writes_report(capsys, workdir):
    out_dir = workdir / "run"
    code, out = run(capsys, "run", "--config", workdir / "cfg.json", "--variant", "pr", "--epsilon", 30,
                    "--output-dir", out_dir)
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["variant"] == "pr" and report["calibration"]["epsilon"] == 30
