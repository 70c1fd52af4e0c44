import json
import re
import shutil
from pathlib import Path

import pytest
from click.testing import CliRunner

from mando.cli import main
from mando.detector.synthetic import generate_corpus
from mando.topoembed import read_features

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--coarse-epochs", "15", "--fine-epochs", "30"]
OUTPUTS = ("model.ckpt", "history.json", "metrics.json", "config.json")


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return generate_corpus(root, n_clean=12, n_planted=12, motifs=("Reentrancy",), seed=1)


@pytest.fixture(scope="module")
def trained(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    res = run("train", "--manifest", corpus, "--seed", 4, *FAST, "-o", out)
    assert res.exit_code == 0, res.output
    return out


def test_help_lists_every_flag():
    for cmd, flags in {
        "train": ["--config", "--manifest", "--category", "--task", "--feature-method", "--seed", "--coarse-epochs", "--fine-epochs", "--out-dir"],
        "eval": ["--seeds", "--manifest", "--out-dir"],
        "detect": ["--model", "--format", "--output", "--threshold"],
        "embed": ["--method", "--output", "--seed", "--dim"],
        "build-graph": ["--out-dir", "--fused"],
        "extract-metapaths": ["--output"],
    }.items():
        res = run(cmd, "--help")
        assert res.exit_code == 0
        for flag in flags:
            assert flag in res.output, (cmd, flag)


def test_unknown_flag_is_error():
    res = run("train", "--bogus")
    assert res.exit_code == 2


def test_build_graph_matches_golden(tmp_path):
    res = run("build-graph", GOLDEN / "private_bank.sol", "-o", tmp_path)
    assert res.exit_code == 0, res.output
    assert (tmp_path / "private_bank.json").read_text() == (GOLDEN / "private_bank.json").read_text()


def test_build_graph_fused_and_metapaths(tmp_path):
    assert run("build-graph", "--fused", GOLDEN / "private_bank.sol", "-o", tmp_path).exit_code == 0
    fused = json.loads((tmp_path / "private_bank.json").read_text())
    assert fused["kind"] == "FUSED"
    assert any(e["type"] == "CFG_OF" for e in fused["edges"])
    res = run("extract-metapaths", tmp_path / "private_bank.json", "-o", tmp_path / "cat.json")
    assert res.exit_code == 0
    paths = [p["path"] for p in json.loads((tmp_path / "cat.json").read_text())["paths"]]
    assert ["ENTRY_POINT", "NEXT", "IF", "back", "ENTRY_POINT"] in paths


def test_build_graph_parse_error(tmp_path):
    bad = tmp_path / "bad.sol"
    bad.write_text("contract A { function f() public { ")
    res = run("build-graph", bad, "-o", tmp_path)
    assert res.exit_code == 2 and "error:" in res.output


def test_embed_deterministic(tmp_path):
    for name in ("a.bin", "b.bin"):
        res = run("embed", GOLDEN / "private_bank.sol", "--method", "node2vec", "--seed", 3, "-o", tmp_path / name)
        assert res.exit_code == 0, res.output
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert read_features(tmp_path / "a.bin").shape[1] == 128


def test_train_writes_outputs(trained):
    for name in OUTPUTS:
        assert (trained / name).exists()
    echo = json.loads((trained / "config.json").read_text())
    assert echo["seed"] == 4 and echo["category"] == "Reentrancy" and echo["fine_epochs"] == 30
    hist = json.loads((trained / "history.json").read_text())
    assert len(hist["coarse"]["loss"]) == 15 and len(hist["fine"]["loss"]) == 30


def test_train_rerun_byte_identical(corpus, trained, tmp_path):
    first = {n: (trained / n).read_bytes() for n in OUTPUTS}
    res = run("train", "--manifest", corpus, "--seed", 4, *FAST, "-o", trained)
    assert res.exit_code == 0
    assert {n: (trained / n).read_bytes() for n in OUTPUTS} == first


def test_rerun_from_config_echo(trained, tmp_path):
    first = {n: (trained / n).read_bytes() for n in OUTPUTS}
    echo = tmp_path / "echo.json"
    shutil.copy(trained / "config.json", echo)
    res = run("train", "--config", echo)
    assert res.exit_code == 0, res.output
    assert {n: (trained / n).read_bytes() for n in OUTPUTS} == first


def test_seed_from_environment(corpus, tmp_path):
    res = run("train", "--manifest", corpus, "--task", "coarse", "--coarse-epochs", 2, "-o", tmp_path, env={"MANDO_SEED": "9"})
    assert res.exit_code == 0, res.output
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 9


def test_detect_flags_planted_and_reports(corpus, trained, tmp_path):
    planted = sorted(corpus.parent.glob("R0*.sol"))[:3]
    res = run("detect", "--model", trained / "model.ckpt", *planted, "-o", tmp_path / "r.json")
    assert res.exit_code == 1, res.output
    report = json.loads((tmp_path / "r.json").read_text())
    assert len(report["contracts"]) == 3
    res = run("detect", "--model", trained / "model.ckpt", "--format", "csv", *planted)
    assert res.exit_code == 1
    assert "contract,file,line_start,line_end,category,confidence" in res.output


def test_detect_reports_identical_across_runs(corpus, trained, tmp_path):
    files = sorted(corpus.parent.glob("*.sol"))[:6]
    for name in ("a.json", "b.json"):
        run("detect", "--model", trained / "model.ckpt", *files, "-o", tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_detect_clean_exit_zero(corpus, trained, tmp_path):
    split = json.loads((trained / "metrics.json").read_text())["split"]
    lines = corpus.read_text().splitlines()
    clean_test = [corpus.parent / json.loads(lines[i])["path"] for i in split["test"] if json.loads(lines[i])["label"] == "clean"]
    res = run("detect", "--model", trained / "model.ckpt", clean_test[0])
    assert res.exit_code == 0, res.output
    assert json.loads(res.stdout)["findings"] == []


def test_detect_corrupt_checkpoint(tmp_path):
    bad = tmp_path / "m.ckpt"
    bad.write_bytes(b"nope")
    res = run("detect", "--model", bad, GOLDEN / "private_bank.sol")
    assert res.exit_code == 2 and "error:" in res.output


def test_eval_empty_manifest(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    cfg = tmp_path / "default.toml"
    cfg.write_text(f'manifest = "{tmp_path / "empty.jsonl"}"\n')
    res = run("eval", "--config", cfg, "--seeds", 1)
    assert res.exit_code == 2
    assert "empty manifest" in res.output


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("learning_rate = 3\n")
    res = run("eval", "--config", cfg)
    assert res.exit_code == 2 and "unknown config keys" in res.output


def test_eval_writes_metrics(corpus, tmp_path):
    res = run("eval", "--manifest", corpus, "--seeds", 2, *FAST, "-o", tmp_path)
    assert res.exit_code == 0, res.output
    data = json.loads((tmp_path / "metrics.json").read_text())["Reentrancy"]
    assert data["seeds"] == [0, 1]
    assert data["coarse"]["n_runs"] == 2 and len(data["fine"]["per_run"]) == 2
    assert re.search(r"Reentrancy\s+fine\s", res.output)
