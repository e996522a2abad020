import csv
import json

import pytest

from formpred.cli import main


@pytest.fixture(scope="module")
def ofdf_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--task", "ofdf", "--records", "131", "--groups", "13", "--seed", "0",
                 "--manifest", "--out", str(out)]) == 0
    return out / "ofdf.csv", out / "ofdf.schema.json"


@pytest.fixture(scope="module")
def srmt_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("sdata")
    assert main(["synth", "--task", "srmt", "--seed", "0", "--out", str(out)]) == 0
    return out / "srmt.csv", out / "srmt.schema.json"


def manifest(path):
    return json.loads(path.read_text())


def test_synth_outputs(ofdf_files):
    csv_path, schema_path = ofdf_files
    d = csv_path.parent
    assert (d / "ofdf.synth.json").exists()
    m = manifest(d / "manifest.synth.json")
    assert m["status"] == "ok" and str(csv_path) in m["artifacts"]
    assert {"config", "artifacts", "tool_version", "timings"} <= set(m)
    with open(csv_path) as fh:
        assert sum(1 for _ in fh) == 132


def test_synth_byte_identical(tmp_path, ofdf_files):
    assert main(["synth", "--task", "ofdf", "--seed", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ofdf.csv").read_bytes() == ofdf_files[0].read_bytes()


def test_synth_unknown_task(tmp_path, capsys):
    assert main(["synth", "--task", "capsule", "--out", str(tmp_path)]) == 2
    assert "capsule" in capsys.readouterr().err
    assert manifest(tmp_path / "manifest.synth.json")["status"] == "error"


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FORMPRED_OUTPUT_DIR", str(tmp_path))
    assert main(["synth", "--task", "srmt", "--records", "20", "--groups", "4"]) == 0
    assert (tmp_path / "srmt.csv").exists()


def test_split_mdfis(tmp_path, ofdf_files):
    out = tmp_path / "split.json"
    args = ["split", "--data", str(ofdf_files[0]), "--schema", str(ofdf_files[1]), "--strategy", "mdfis",
            "--val", "20", "--test", "20", "--initial-candidates", "1000", "--out", str(out)]
    assert main(args) == 0
    doc = json.loads(out.read_text())
    assert len(doc["validation"]) == 20 and len(doc["test"]) == 20
    assert not set(doc["validation"]) & set(doc["test"])
    assert manifest(tmp_path / "manifest.split.json")["status"] == "ok"


def test_split_random_repeats(tmp_path, ofdf_files):
    out = tmp_path / "r.json"
    assert main(["split", "--data", str(ofdf_files[0]), "--schema", str(ofdf_files[1]), "--strategy", "random",
                 "--fraction", "0.3", "--repeats", "1000", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc) == 1000 and len(doc[0]["validation"]) == 39


def test_split_manual(tmp_path, ofdf_files):
    ids = {"validation": ["OFDF-001", "OFDF-050"], "test": ["OFDF-131"]}
    (tmp_path / "ids.json").write_text(json.dumps(ids))
    out = tmp_path / "m.json"
    assert main(["split", "--data", str(ofdf_files[0]), "--schema", str(ofdf_files[1]), "--strategy", "manual",
                 "--ids", str(tmp_path / "ids.json"), "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == ids


def test_split_errors(tmp_path, ofdf_files):
    base = ["split", "--data", str(ofdf_files[0]), "--schema", str(ofdf_files[1]), "--out", str(tmp_path / "s.json")]
    assert main(base + ["--strategy", "random", "--fraction", "1.5"]) == 2
    assert main(base + ["--strategy", "manual"]) == 2
    assert main(base + ["--val", "115", "--test", "5"]) == 3  # 119 eligible records after filtering
    assert main(["split", "--data", str(tmp_path / "missing.csv"), "--schema", str(ofdf_files[1]),
                 "--out", str(tmp_path / "s.json")]) == 3
    assert manifest(tmp_path / "manifest.split.json")["status"] == "error"


@pytest.fixture(scope="module")
def trained(tmp_path_factory, ofdf_files):
    d = tmp_path_factory.mktemp("run")
    data, schema = map(str, ofdf_files)
    split = d / "split.json"
    assert main(["split", "--data", data, "--schema", schema, "--initial-candidates", "500", "--out", str(split)]) == 0
    assert main(["train", "--data", data, "--schema", schema, "--split", str(split), "--model", "knn", "--k", "5",
                 "--model", "dnn-ofdf", "--epochs", "20", "--model", "mlr", "--out", str(d / "models")]) == 0
    return d, data, schema, split


def test_train_outputs(trained):
    d = trained[0] / "models"
    knn = json.loads((d / "model_knn.json").read_text())
    assert knn["hyperparameters"]["k"] == 5
    dnn = json.loads((d / "model_dnn-ofdf.json").read_text())
    assert dnn["hyperparameters"]["layer_widths"][1:] == [50] * 9 + [1]
    assert len(dnn["params"]["network"]["layers"]) == 10
    with open(d / "loss_dnn-ofdf.csv") as fh:
        assert sum(1 for _ in fh) == 22
    assert manifest(d / "manifest.train.json")["status"] == "ok"


def test_train_errors(tmp_path, trained):
    _, data, schema, split = trained
    base = ["train", "--data", data, "--schema", schema, "--split", str(split), "--out", str(tmp_path)]
    assert main(base + ["--model", "svm"]) == 2
    assert main(base + ["--model", "mlr", "--k", "3"]) == 2
    assert main(base + ["--model", "knn", "--k", "500"]) == 2


def test_train_jobs_identical(tmp_path, trained):
    _, data, schema, split = trained
    base = ["train", "--data", data, "--schema", schema, "--split", str(split), "--model", "rf", "--trees", "10",
            "--model", "plsr"]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    for name in ("model_rf.json", "model_plsr.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_evaluate_outputs(tmp_path, trained):
    d, data, schema, split = trained
    out = tmp_path / "reports"
    assert main(["evaluate", "--data", data, "--schema", schema, "--split", str(split), "--plots",
                 "--model-file", str(d / "models" / "model_knn.json"),
                 "--model-file", str(d / "models" / "model_mlr.json"), "--out", str(out)]) == 0
    rep = json.loads((out / "report_knn.json").read_text())
    for s in ("train", "validation", "test"):
        assert set(rep[s]) == {"accuracy", "rmse", "mae", "records"}
    table = (out / "results.txt").read_text()
    assert "knn" in table and "SVM" in table
    svg = (out / "plots" / "knn_disintegration_time_s.svg").read_text()
    assert svg.count('class="band"') == 2 and 'stroke-dasharray' in svg
    with open(out / "scatter_knn.csv") as fh:
        assert next(csv.reader(fh)) == ["record_id", "target", "experimental", "predicted"]


def test_evaluate_missing_artifact(tmp_path, trained):
    _, data, schema, split = trained
    assert main(["evaluate", "--data", data, "--schema", schema, "--split", str(split),
                 "--model-file", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 3
    assert manifest(tmp_path / "manifest.evaluate.json")["status"] == "error"


def test_predict_reproduces_evaluate(tmp_path, trained):
    d, data, schema, split = trained
    model = d / "models" / "model_mlr.json"
    assert main(["predict", "--model", str(model), "--input", data, "--out", str(tmp_path / "p.csv")]) == 0
    assert main(["evaluate", "--data", data, "--schema", schema, "--split", str(split), "--model-file", str(model),
                 "--out", str(tmp_path / "r")]) == 0
    with open(tmp_path / "p.csv") as fh:
        preds = {r["record_id"]: float(r["disintegration_time_s"]) for r in csv.DictReader(fh)}
    rep = json.loads((tmp_path / "r" / "report_mlr.json").read_text())
    for s in ("train", "validation", "test"):
        for rec in rep[s]["records"]:
            assert preds[rec["record_id"]] == rec["predicted"][0]


def test_predict_srmt_columns(tmp_path, srmt_files):
    data, schema = map(str, srmt_files)
    assert main(["split", "--data", data, "--schema", schema, "--strategy", "random", "--out",
                 str(tmp_path / "s.json")]) == 0
    assert main(["train", "--data", data, "--schema", schema, "--split", str(tmp_path / "s.json"),
                 "--model", "dnn-srmt", "--epochs", "3", "--out", str(tmp_path)]) == 0
    assert main(["predict", "--model", str(tmp_path / "model_dnn-srmt.json"), "--input", data,
                 "--out", str(tmp_path / "p.csv")]) == 0
    with open(tmp_path / "p.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["record_id", "release_2h", "release_4h", "release_6h", "release_8h"]


def test_predict_errors(tmp_path, trained):
    d, data, _, _ = trained
    model = str(d / "models" / "model_mlr.json")
    lines = open(data).read().splitlines()
    header = lines[0].split(",")
    col = header.index("film_former")
    row = lines[1].split(",")
    row[col] = "gelatin"
    (tmp_path / "odd.csv").write_text("\n".join([lines[0], ",".join(row)]) + "\n")
    assert main(["predict", "--model", model, "--input", str(tmp_path / "odd.csv"),
                 "--out", str(tmp_path / "p.csv")]) == 4
    assert "gelatin" in manifest(tmp_path / "manifest.predict.json")["error"]
    bad = [h if h != "thickness_um" else "thick" for h in header]
    (tmp_path / "hdr.csv").write_text("\n".join([",".join(bad)] + lines[1:3]) + "\n")
    assert main(["predict", "--model", model, "--input", str(tmp_path / "hdr.csv"),
                 "--out", str(tmp_path / "p.csv")]) == 2


def test_pipeline_config_file(tmp_path):
    cfg = {"seed": 1, "synth": {"task": "srmt", "records": 60, "groups": 8},
           "split": {"strategy": "random", "val": 10, "test": 10},
           "models": [{"name": "knn", "k": 2}, "mlr"]}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["pipeline", "--config", str(tmp_path / "run.json"), "--out", str(out)]) == 0
    assert json.loads((out / "models" / "model_knn.json").read_text())["hyperparameters"]["k"] == 2
    assert (out / "reports" / "report_mlr.json").exists()
    m = manifest(out / "manifest.pipeline.json")
    assert m["status"] == "ok" and set(m["timings"]) >= {"split", "train", "evaluate"}


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as e:
        main(["split"])
    assert e.value.code == 2
