import json

import numpy as np
import pytest

from fcvae.cli import main
from fcvae.detector import load_score_csv

SMALL = ["--window", "24", "--small-window", "8", "--small-window-stride", "8",
         "--cond-dim", "6", "--latent-dim", "3", "--epochs", "4",
         "--batch-size", "128", "--seed", "0"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run synth -> train -> score -> eval -> plot once; tests inspect the files."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    model = root / "model.json"
    scores = root / "scores"
    report = root / "report.json"
    svg = root / "curve_00.svg"

    assert main(["synth", "--out", str(data), "--curves", "2", "--length", "400",
                 "--anomaly-rate", "0.02", "--seed", "0"]) == 0
    assert main(["train", "--data", str(data), "--out", str(model)] + SMALL) == 0
    assert main(["score", "--model", str(model), "--data", str(data), "--out", str(scores),
                 "--mcmc-iters", "3", "--score-samples", "4", "--seed", "0"]) == 0
    assert main(["eval", "--scores", str(scores), "--delay", "7",
                 "--out", str(report)]) == 0
    assert main(["plot", "--scores", str(scores / "curve_00.csv"),
                 "--data", str(data / "curve_00.csv"), "--out", str(svg)]) == 0
    return root


def test_synth_writes_curves(pipeline):
    names = sorted(p.name for p in (pipeline / "data").glob("*.csv"))
    assert names == ["curve_00.csv", "curve_01.csv"]


def test_train_outputs(pipeline):
    model = json.loads((pipeline / "model.json").read_text())
    assert model["config"]["window"] == 24
    assert set(model["stats"]) == {"curve_00", "curve_01"}
    history = (pipeline / "model_history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,valid_loss"
    assert len(history) == 5
    cfg = json.loads((pipeline / "model_config.json").read_text())
    assert cfg["window"] == 24 and cfg["epochs"] == 4


def test_score_outputs(pipeline):
    ss = load_score_csv(pipeline / "scores" / "curve_00.csv")
    assert len(ss) == 400
    assert int(np.isnan(ss.scores).sum()) == 23
    assert np.all(np.isfinite(ss.scores[23:]))


def test_eval_report(pipeline, capsys):
    report = json.loads((pipeline / "report.json").read_text())
    assert report["delay"] == 7
    assert set(report["curves"]) == {"curve_00", "curve_01"}
    assert 0.0 <= report["dataset"]["best_f1"]["f1"] <= 1.0
    assert report["dataset"]["delay_f1"]["f1"] <= report["dataset"]["best_f1"]["f1"] + 1e-12
    # the report also goes to stdout
    assert main(["eval", "--scores", str(pipeline / "scores")]) == 0
    out = capsys.readouterr().out
    assert json.loads(out)["delay"] == 7


def test_plot_writes_svg(pipeline):
    text = (pipeline / "curve_00.svg").read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text


def test_rerun_is_byte_identical(pipeline, tmp_path):
    model2 = tmp_path / "model.json"
    assert main(["train", "--data", str(pipeline / "data"), "--out", str(model2)]
                + SMALL) == 0
    assert model2.read_bytes() == (pipeline / "model.json").read_bytes()
    scores2 = tmp_path / "scores"
    assert main(["score", "--model", str(model2), "--data", str(pipeline / "data"),
                 "--out", str(scores2), "--mcmc-iters", "3", "--score-samples", "4",
                 "--seed", "0"]) == 0
    want = (pipeline / "scores" / "curve_01.csv").read_bytes()
    assert (scores2 / "curve_01.csv").read_bytes() == want


def test_ablation_flags_reach_model(pipeline, tmp_path):
    out = tmp_path / "ablate.json"
    assert main(["train", "--data", str(pipeline / "data"), "--out", str(out)]
                + SMALL + ["--no-gfm", "--no-lfm", "--no-augment", "--epochs", "1"]) == 0
    model = json.loads(out.read_text())
    assert model["config"]["use_gfm"] is False
    assert model["config"]["use_lfm"] is False
    cfg = json.loads((tmp_path / "ablate_config.json").read_text())
    assert cfg["augment_rate"] == 0.0


def test_config_file_and_unknown_key(pipeline, tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"window": 24, "small_window": 8,
                                    "small_window_stride": 8, "cond_dim": 6,
                                    "latent_dim": 3, "epochs": 1}))
    out = tmp_path / "m.json"
    assert main(["train", "--data", str(pipeline / "data"), "--out", str(out),
                 "--config", str(cfg_path)]) == 0
    cfg_path.write_text(json.dumps({"windw": 24}))
    assert main(["train", "--data", str(pipeline / "data"), "--out", str(out),
                 "--config", str(cfg_path)]) == 1
    assert "windw" in capsys.readouterr().err


def test_score_config_window_mismatch(pipeline, tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"window": 64}))
    code = main(["score", "--model", str(pipeline / "model.json"),
                 "--data", str(pipeline / "data"), "--out", str(tmp_path / "s"),
                 "--config", str(cfg_path)])
    assert code == 1
    assert "window" in capsys.readouterr().err


def test_exit_codes(pipeline, tmp_path, capsys):
    # config error: bad flag value
    assert main(["train", "--data", str(pipeline / "data"),
                 "--out", str(tmp_path / "m.json"), "--epochs", "0"]) == 1
    # data error: missing directories
    assert main(["train", "--data", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "m.json")] + SMALL) == 2
    assert main(["eval", "--scores", str(tmp_path / "nope")]) == 2
    capsys.readouterr()


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])  # missing required --data/--out
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    capsys.readouterr()
