import json

import pytest

from topobias.cli import main
from topobias.pipeline import RunConfig, emit_summary
from topobias.schemas import validate

SMALL = ["--nodes", "60", "--per-gen", "12", "--radii", "20,50,100", "--seed", "5", "--k", "4"]
ARTIFACTS = {"manifest.json": "manifest", "bias_report.json": "bias",
             "classification_report.json": "classification", "fss.json": "fss"}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["-q", "pipeline", "--out", str(out), *SMALL]) == 0
    return out


def test_pipeline_artifacts_schema_valid(run_dir):
    for name, which in ARTIFACTS.items():
        doc = json.loads((run_dir / name).read_text())
        validate(doc, which)
        if which != "manifest":
            assert doc["tool"] == "topobias" and doc["config"]["experiment"]["seed"] == 5
            assert doc["catalogue_version"] and doc["tool_version"]
    assert (run_dir / "features.csv").exists() and (run_dir / "summary.md").exists()
    cfg = RunConfig.load(run_dir / "run_config.json")
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_rerun_is_byte_identical(run_dir, tmp_path):
    assert main(["-q", "pipeline", "--out", str(tmp_path), *SMALL, "--stages", "gen,extract"]) == 0
    assert (tmp_path / "features.csv").read_bytes() == (run_dir / "features.csv").read_bytes()


def test_reports_differ_only_in_timestamp(run_dir, tmp_path):
    assert main(["-q", "pipeline", "--out", str(tmp_path), *SMALL]) == 0
    for name in ARTIFACTS:
        if name == "manifest.json":
            assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes()
            continue
        a, b = (json.loads((d / name).read_text()) for d in (run_dir, tmp_path))
        a.pop("metadata"), b.pop("metadata")
        a.pop("config"), b.pop("config")  # output directory differs
        assert a == b


def test_summary_has_four_tables(run_dir):
    text = (run_dir / "summary.md").read_text()
    separators = [line for line in text.splitlines() if line.startswith("|") and set(line) <= set("|:-")]
    assert len(separators) == 4
    assert "not run" not in text


def test_report_to_stdout(run_dir, capsys):
    assert main(["-q", "report", "--dir", str(run_dir), "--out", "-"]) == 0
    assert capsys.readouterr().out == (run_dir / "summary.md").read_text()


def test_summary_sections_without_reports(run_dir):
    bias = json.loads((run_dir / "bias_report.json").read_text())
    fss = json.loads((run_dir / "fss.json").read_text())
    fss["steps"], fss["best_size"] = [], 0
    text = emit_summary(bias=bias, fss=fss)
    assert "Feature selection not run." in text and "Classification not run." in text
    single = [e for e in bias["entries"] if e["subset_size"] == 1]
    assert len(single) == 3
    body = text.split("## Classification")[0]
    rows = [line for line in body.splitlines() if line.startswith("| ") and "generator" not in line]
    shown = [float(r.split("|")[2]) for r in rows][:3]
    assert shown == sorted(shown)


def test_bias_missing_features_names_prerequisite(tmp_path, capsys):
    missing = tmp_path / "features.csv"
    assert main(["-q", "bias", "--features", str(missing), "--out", str(tmp_path / "b.json")]) == 1
    err = capsys.readouterr().err
    assert "missing prerequisite" in err and str(missing) in err and "bias" in err


def test_rank_prints_tsv(run_dir, capsys):
    assert main(["-q", "rank", "--features", str(run_dir / "features.csv"), "--subset-size", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "subset_size\trank\tgenerators\tbias_index"
    assert [line.split("\t")[1] for line in lines[1:]] == ["1", "2", "3"]


def test_classify_pair_and_fss_fold(run_dir, tmp_path):
    out = tmp_path / "pair.json"
    assert main(["-q", "classify", "--features", str(run_dir / "features.csv"), "--pair", "heavy,uniform",
                 "--kind", "gaussian", "--kind", "bernoulli", "--k", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [r["kind"] for r in doc["results"]] == ["gaussian", "bernoulli"]
    assert all(r["pair"] == ["heavy", "uniform"] and r["k"] == 3 for r in doc["results"])
    fss = tmp_path / "fss.json"
    assert main(["-q", "fss", "--features", str(run_dir / "features.csv"), "--mode", "fold", "--fold", "1",
                 "--max-features", "3", "--full-trace", "--out", str(fss)]) == 0
    doc = json.loads(fss.read_text())
    assert doc["mode"] == "fold" and doc["fold"] == 1 and len(doc["steps"]) == 3


def test_classify_unknown_pair_label(run_dir, tmp_path, capsys):
    rc = main(["-q", "classify", "--features", str(run_dir / "features.csv"), "--pair", "heavy,nope",
               "--out", str(tmp_path / "x.json")])
    assert rc == 1 and "unknown label" in capsys.readouterr().err


def test_import_then_extract(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for i in range(3):
        (src / f"t{i}.csv").write_text("".join(f"{10 * i + j},{5 * j}\n" for j in range(1, 6)))
    corpus = tmp_path / "corpus"
    files = [str(src / f"t{i}.csv") for i in range(3)]
    assert main(["-q", "import", *files, "--area", "100", "--label", "ext", "--headerless",
                 "--out", str(corpus)]) == 0
    manifest = json.loads((corpus / "manifest.json").read_text())
    validate(manifest, "manifest")
    assert [e["id"] for e in manifest["topologies"]] == ["ext-00000", "ext-00001", "ext-00002"]
    assert main(["-q", "extract", "--in", str(corpus), "--radii", "5,10"]) == 0
    header = (corpus / "features.csv").read_text().splitlines()[0]
    assert header.endswith("clustering.avg@10")


def test_import_reports_bad_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nabc,5\n")
    rc = main(["-q", "import", str(bad), "--area", "1000", "--label", "ext", "--headerless",
               "--out", str(tmp_path / "c")])
    assert rc == 1 and ":2" in capsys.readouterr().err


def test_gen_with_config_file(tmp_path):
    cfg = {"area_side": 500, "nodes": 15, "per_generator": 2, "radii": [10, 20], "seed": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["-q", "gen", "--config", str(path), "--out", str(tmp_path / "g"), "--nodes", "9"]) == 0
    manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
    assert manifest["config"]["nodes"] == 9 and manifest["config"]["area_side"] == 500
    assert len(manifest["topologies"]) == 6
