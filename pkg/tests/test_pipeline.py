import json
import shutil
import subprocess
import sys

import pytest

from tablenet import cli
from tablenet.pipeline import STAGES, PipelineConfig, read_stamp, run_all

SMALL = {
    "seed": 1, "workdir": "w",
    "synth": {"num_articles": 30, "dim": 16},
    "embeddings": {"dim": 16},
    "candgen": {"num_trees": 10},
    "align": {"epochs": 3, "hidden": 8, "batch_size": 16},
}


def write_config(path, obj=SMALL):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def done(tmp_path_factory):
    """A finished small run; tests copy it before changing anything."""
    d = tmp_path_factory.mktemp("run")
    cfg = write_config(d / "cfg.json")
    assert cli.main(["--config", cfg, "--stage", "all"]) == 0
    return d


@pytest.fixture
def run(done, tmp_path):
    d = tmp_path / "run"
    shutil.copytree(done, d)
    # manifests record absolute paths, so rebuild them for the copy
    assert cli.main(["--config", str(d / "cfg.json"), "all", "--force"]) == 0
    return d


def test_every_stage_writes_stamped_outputs(done):
    w = done / "w"
    for name in ("graph.json", "features.tsv", "filtered.tsv", "rf_model.json", "candidates.tsv",
                 "baselines.json", "align_model.json", "predictions.tsv", "report.json", "report.txt"):
        st = read_stamp(w / name)
        assert st is not None and set(st) >= {"config_hash", "tool_version", "stage"}, name
    assert len({read_stamp(w / n)["config_hash"] for n in ("graph.json", "report.txt")}) == 1
    assert sorted(p.stem for p in (w / "manifests").iterdir()) == sorted(STAGES)


def test_rerun_is_a_noop(run, capsys):
    before = {p: p.read_bytes() for p in (run / "w").glob("*.*")}
    assert cli.main(["--config", str(run / "cfg.json"), "--stage", "all"]) == 0
    out = capsys.readouterr().out
    assert out.count("up to date") == len(STAGES)
    assert {p: p.read_bytes() for p in (run / "w").glob("*.*")} == before


def test_tampered_output_is_regenerated(run):
    cfg = PipelineConfig.load(run / "cfg.json")
    edges = run / "w" / "inputs" / "edges.tsv"
    original = edges.read_bytes()
    edges.write_text(edges.read_text() + "\n")
    by = {r.stage: r.skipped for r in run_all(cfg)}
    # synth restores identical bytes, so nothing downstream reruns
    assert not by["synth"] and all(by[s] for s in STAGES if s != "synth")
    assert edges.read_bytes() == original


def test_changed_upstream_artifact_reruns_stage(run):
    cfg = PipelineConfig.load(run / "cfg.json")
    p = run / "w" / "filtered.tsv"
    p.write_text(p.read_text() + "\n")
    by = {r.stage: r.skipped for r in run_all(cfg)}
    assert not by["filter"] and by["featurize"] and by["baseline"]


def test_missing_upstream_names_the_stage(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    assert cli.main(["filter", "--config", cfg]) == 2
    assert "'featurize'" in capsys.readouterr().err


def test_missing_inputs_hint_synth(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    assert cli.main(["normalize-graph", "--config", cfg]) == 2
    assert "synth" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    with pytest.raises(SystemExit) as e:
        cli.main(["--config", cfg, "--stage", "bogus"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["--stage", "all"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["--config", cfg])
    assert e.value.code == 1
    assert cli.main(["--config", str(tmp_path / "nope.json"), "all"]) == 1
    assert cli.main(["--config", cfg, "all", "--tau", "1.5"]) == 1
    (tmp_path / "bad.json").write_text("{")
    assert cli.main(["--config", str(tmp_path / "bad.json"), "all"]) == 1
    no_corpus = dict(SMALL)
    del no_corpus["synth"]
    assert cli.main(["--config", write_config(tmp_path / "nc.json", no_corpus), "all"]) == 1


def test_hash_mismatch_exit_3(run, capsys):
    cfg = str(run / "cfg.json")
    assert cli.main(["classify-pairs", "--config", cfg, "--tau", "0.3"]) == 3
    assert "rerun stage" in capsys.readouterr().err
    assert cli.main(["classify-pairs", "--config", cfg, "--tau", "0.3", "--force"]) == 0


def test_evaluate_refuses_mixed_hashes(run, capsys):
    cfg = str(run / "cfg.json")
    assert cli.main(["predict", "--config", cfg, "--tau", "0.3", "--force"]) == 0
    capsys.readouterr()
    assert cli.main(["evaluate", "--config", cfg]) == 3
    assert "predictions.tsv" in capsys.readouterr().err


def test_unstamped_artifact_exit_3(run):
    p = run / "w" / "features.tsv"
    p.write_text("\n".join(p.read_text().splitlines()[1:]) + "\n")
    assert cli.main(["filter", "--config", str(run / "cfg.json")]) == 3


def test_corrupt_corpus_is_a_data_error(run, capsys):
    corpus = run / "w" / "inputs" / "corpus.jsonl"
    corpus.write_text("not json\n")
    assert cli.main(["featurize", "--config", str(run / "cfg.json")]) == 2
    assert "corpus" in capsys.readouterr().err


def test_workers_do_not_change_the_hash(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    a = PipelineConfig.load(cfg, {"workers": 1}).config_hash()
    b = PipelineConfig.load(cfg, {"workers": 3, "workdir": str(tmp_path / "x")}).config_hash()
    c = PipelineConfig.load(cfg, {"seed": 2}).config_hash()
    assert a == b != c


def test_console_script(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    r = subprocess.run([sys.executable, "-m", "tablenet.cli", "filter", "--config", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "featurize" in r.stderr
