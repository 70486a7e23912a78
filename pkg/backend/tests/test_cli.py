import io
import json

import numpy as np
import pandas as pd
import pytest

from app.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def regression_csv(write_csv):
    rng = np.random.default_rng(5)
    x0 = np.arange(60) % 10
    x1 = rng.integers(0, 20, size=60)
    y = np.where(x0 <= 4, 1.0, 9.0) + rng.normal(scale=0.2, size=60)
    lines = ["x0,x1,y"] + [f"{a},{b},{c:.6f}" for a, b, c in zip(x0, x1, y)]
    return write_csv("\n".join(lines) + "\n", "step.csv")


@pytest.fixture
def classification_csv(write_csv):
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(80, 2))
    labels = np.where(x[:, 0] > 0.6, "high", np.where(x[:, 1] > 0.5, "mid", "low"))
    lines = ["a,b,label"] + [f"{a:.5f},{b:.5f},{c}" for (a, b), c in zip(x, labels)]
    return write_csv("\n".join(lines) + "\n", "classes.csv")


def test_fit_writes_model_and_summary(regression_csv, tmp_path, capsys):
    out = tmp_path / "model.json"
    code = main(["fit", "--data", regression_csv, "--target", "y", "--out", str(out)])
    assert code == EXIT_OK
    document = json.loads(out.read_text())
    assert document["feature_names"] == ["x0", "x1"]
    assert document["root"]["variable"] == "x0"
    assert document["root"]["threshold"] == 4.5
    assert "R² = " in capsys.readouterr().out


def test_fit_to_stdout_keeps_summary_off_stdout(regression_csv, capsys):
    assert main(["fit", "--data", regression_csv, "--target", "y"]) == EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out)["task"] == "regression"
    assert "R² = " in captured.err


def test_fit_classification_summary(classification_csv, tmp_path, capsys):
    out = tmp_path / "model.json"
    code = main(["fit", "--data", classification_csv, "--target", "label", "--impurity", "entropy", "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["config"]["gain_kind"] == "cart_entropy"
    assert "MR = " in capsys.readouterr().out


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fit", "--target", "y"],
        ["fit", "--data", "x.csv", "--target", "y", "--penalty", "lasso"],
        ["render"],
    ],
)
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_penalty_constant_out_of_range(regression_csv, capsys):
    code = main(["fit", "--data", regression_csv, "--target", "y", "--penalty", "ema", "--k", "1.5"])
    assert code == EXIT_USAGE
    assert "--k" in capsys.readouterr().err


def test_os_extreme_needs_class(classification_csv, capsys):
    code = main(["fit", "--data", classification_csv, "--target", "label", "--criterion", "os-extreme"])
    assert code == EXIT_USAGE
    assert "--class-of-interest" in capsys.readouterr().err


def test_unknown_class_of_interest(classification_csv):
    argv = ["fit", "--data", classification_csv, "--target", "label", "--criterion", "os-extreme"]
    assert main(argv + ["--class-of-interest", "purple"]) == EXIT_USAGE
    assert main(argv + ["--class-of-interest", "high"]) == EXIT_OK


def test_unparseable_data(write_csv, capsys):
    path = write_csv("a,y\n1,2\nabc,3\n")
    assert main(["fit", "--data", path, "--target", "y"]) == EXIT_DATA
    assert "row 2, column 'a'" in capsys.readouterr().err


def test_missing_data_file(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "absent.csv"), "--target", "y"]) == EXIT_DATA


def test_missing_target_column(regression_csv):
    assert main(["fit", "--data", regression_csv, "--target", "medv"]) == EXIT_DATA


def test_non_utf8_data_exits_with_data_error(tmp_path, capsys):
    path = tmp_path / "latin.csv"
    path.write_bytes(b"x,y\n1,2\n\xff\xfe,3\n")
    assert main(["fit", "--data", str(path), "--target", "y"]) == EXIT_DATA
    assert "UTF-8" in capsys.readouterr().err


def test_directory_as_data_exits_with_data_error(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path), "--target", "y"]) == EXIT_DATA
    assert "cannot read" in capsys.readouterr().err


def test_missing_model_file(tmp_path, capsys):
    assert main(["render", "--model", str(tmp_path / "absent.json")]) == EXIT_DATA
    assert "absent.json" in capsys.readouterr().err


def test_negative_seed_is_a_usage_error(regression_csv, capsys):
    argv = ["oob", "--data", regression_csv, "--target", "y", "--bootstrap", "2", "--fixed-k"]
    assert main(argv + ["--seed", "-1"]) == EXIT_USAGE
    assert "--seed" in capsys.readouterr().err


def test_negative_seed_setting_is_a_usage_error(regression_csv, monkeypatch, capsys):
    monkeypatch.setenv("TREEPEN_SEED", "-1")
    argv = ["oob", "--data", regression_csv, "--target", "y", "--bootstrap", "2", "--fixed-k"]
    assert main(argv) == EXIT_USAGE
    assert "TREEPEN_SEED" in capsys.readouterr().err


def test_missing_config_file_is_a_usage_error(regression_csv, tmp_path, capsys):
    config = str(tmp_path / "typo.env")
    assert main(["fit", "--data", regression_csv, "--target", "y", "--config", config]) == EXIT_USAGE
    assert "--config" in capsys.readouterr().err


def test_tune_writes_trace(regression_csv, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code = main([
        "tune", "--data", regression_csv, "--target", "y", "--penalty", "new-variable",
        "--k-grid", "0.1,0.2,0.4", "--c", "0.1", "--trace", str(trace), "--out", str(tmp_path / "model.json"),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(trace)
    assert list(frame.columns) == ["k", "loss", "r2", "eligible", "n_terminals", "total_predictors"]
    assert frame["k"].tolist() == [0.0, 0.1, 0.2, 0.4]
    assert "k* = " in capsys.readouterr().out


def test_tune_rejects_bad_grid(regression_csv, capsys):
    code = main(["tune", "--data", regression_csv, "--target", "y", "--penalty", "ema", "--k-grid", "0.3,0.1"])
    assert code == EXIT_USAGE
    assert "--k-grid" in capsys.readouterr().err


def test_oob_report(regression_csv, capsys):
    code = main([
        "oob", "--data", regression_csv, "--target", "y", "--penalty", "ema",
        "--bootstrap", "3", "--k-grid", "0.1,0.2", "--seed", "4",
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "dataset,criterion,penalty,oob_loss,avg_k_star,mean_holdout_frac,oob_r2,replicates,dropped"
    assert lines[1].startswith("step,cart,ema,")


def test_oob_settings_from_config_file(regression_csv, write_csv, capsys):
    config = write_csv("TREEPEN_BOOTSTRAP_REPLICATES=2\nTREEPEN_SEED=9\n", "treepen.env")
    code = main(["oob", "--data", regression_csv, "--target", "y", "--config", config, "--format", "json"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report[0]["replicates"] == 2


def test_compare_rows(regression_csv, tmp_path):
    out = tmp_path / "compare.csv"
    code = main([
        "compare", "--data", regression_csv, "--target", "y", "--bootstrap", "2",
        "--k-grid", "0.1,0.3", "--dataset-name", "step", "--out", str(out),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["penalty"].tolist() == ["none", "new-variable", "ema"]
    assert frame.loc[0, "loss_increase_pct"] == 0.0


def test_compare_classes_of_interest(classification_csv, tmp_path):
    out = tmp_path / "compare.csv"
    code = main([
        "compare", "--data", classification_csv, "--target", "label", "--criterion", "os-extreme",
        "--class-of-interest", "high", "--classes-of-interest", "high,low", "--penalties", "none,ema",
        "--bootstrap", "2", "--fixed-k", "--k", "0.2", "--out", str(out),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["class_of_interest"].tolist() == ["high", "high", "low", "low"]
    assert frame["criterion"].unique().tolist() == ["os-extreme"]


def test_render_and_predict(regression_csv, write_csv, tmp_path, capsys):
    model = tmp_path / "model.json"
    assert main(["fit", "--data", regression_csv, "--target", "y", "--out", str(model)]) == EXIT_OK
    capsys.readouterr()

    assert main(["render", "--model", str(model)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("digraph tree {")

    assert main(["render", "--model", str(model), "--format", "text"]) == EXIT_OK
    assert "Rules:" in capsys.readouterr().out

    new_rows = write_csv("x1,x0\n3,1\n3,8\n", "new.csv")
    assert main(["predict", "--model", str(model), "--data", new_rows]) == EXIT_OK
    predictions = pd.read_csv(io.StringIO(capsys.readouterr().out))["prediction"].tolist()
    assert predictions[0] == pytest.approx(1.0, abs=0.3)
    assert predictions[1] == pytest.approx(9.0, abs=0.3)

    assert main(["predict", "--model", str(model), "--data", regression_csv, "--target", "y"]) == EXIT_OK


def test_predict_column_mismatch(regression_csv, write_csv, tmp_path, capsys):
    model = tmp_path / "model.json"
    main(["fit", "--data", regression_csv, "--target", "y", "--out", str(model)])
    capsys.readouterr()
    renamed = write_csv("x0,z\n1,2\n", "renamed.csv")
    assert main(["predict", "--model", str(model), "--data", renamed]) == EXIT_DATA
    assert "x1" in capsys.readouterr().err


def test_render_rejects_csv(regression_csv, tmp_path):
    model = tmp_path / "model.json"
    main(["fit", "--data", regression_csv, "--target", "y", "--out", str(model)])
    assert main(["render", "--model", str(model), "--format", "csv"]) == EXIT_USAGE


def test_corrupt_model(write_csv):
    path = write_csv("{}", "model.json")
    assert main(["render", "--model", path]) == EXIT_DATA
