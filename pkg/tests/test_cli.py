import csv
import io

import numpy as np
import pytest

from dml_ensemble.cli import PREDICT_COLUMNS, main
from dml_ensemble.csvio import read_dataset

SMALL = """\
gbrt.n_estimators = 20
gbrt.max_depth = 3
mlp.hidden_sizes = 16,8
mlp.epochs = 20
gate_hidden = 16,8
gate_epochs = 20
mc_samples = 10
attribution.steps = 10
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def config_file(workdir):
    path = workdir / "small.cfg"
    path.write_text("# fast settings for tests\n" + SMALL)
    return path


@pytest.fixture(scope="module")
def trained(workdir, config_file):
    data = workdir / "two.csv"
    assert main(["synth", "--kind", "two-regime", "--n-rows", "300", "--noise-std", "0.1",
                 "--seed", "4", "--out", str(data)]) == 0
    model = workdir / "model.json"
    assert main(["train", str(data), "--config", str(config_file), "--model", str(model)]) == 0
    return data, model


def test_synth_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        code, _, _ = run(capsys, "synth", "--kind", "two-regime", "--n-rows", 50, "--noise-std", 0.1,
                         "--seed", 3, "--out", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(rows(a.read_text())) == 51


def _lstsq_r2(data):
    A = np.column_stack([data.features, np.ones(data.n_samples)])
    coef, *_ = np.linalg.lstsq(A, data.targets, rcond=None)
    resid = data.targets - A @ coef
    return 1 - resid @ resid / np.sum((data.targets - data.targets.mean()) ** 2)


def test_synth_linear_is_linear(tmp_path, capsys):
    path = tmp_path / "lin.csv"
    run(capsys, "synth", "--kind", "linear", "--n-rows", 200, "--noise-std", 0.01, "--seed", 1, "--out", path)
    assert _lstsq_r2(read_dataset(path)) > 0.999


def test_unknown_kind_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "synth", "--kind", "spiral", "--n-rows", 10, "--out", tmp_path / "x.csv")
    assert code == 1 and "spiral" in err


def test_train_writes_summary_and_is_reproducible(trained, workdir, config_file, capsys):
    data, model = trained
    again = workdir / "again.json"
    code, out, err = run(capsys, "train", data, "--config", config_file, "--model", again)
    assert code == 0
    assert again.read_bytes() == model.read_bytes()
    summary = dict(rows(out)[1:])
    assert summary["rows"] == "300" and summary["meta_rows"] == "75"
    assert summary["meta_feature_dim"] == str(2 * 9 + 4)
    assert summary["config.gbrt.n_estimators"] == "20"
    assert "config" in err


def test_missing_target_column(trained, tmp_path, capsys):
    code, out, err = run(capsys, "train", trained[0], "--target-col", "price", "--model", tmp_path / "m.json")
    assert code == 2 and "price" in err and out == ""


def test_bad_cell_names_row_and_column(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,target\n1,2,3\n4,oops,6\n")
    code, _, err = run(capsys, "train", path, "--model", tmp_path / "m.json")
    assert code == 2 and "row 3" in err and "'b'" in err


def test_unknown_config_key(trained, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gbrt.n_trees = 5\n")
    code, _, err = run(capsys, "train", trained[0], "--config", cfg, "--model", tmp_path / "m.json")
    assert code == 2 and "gbrt.n_trees" in err


def test_missing_config_file_is_usage_error(trained, tmp_path, capsys):
    code, _, err = run(capsys, "train", trained[0], "--config", tmp_path / "nope.cfg",
                       "--model", tmp_path / "m.json")
    assert code == 1 and "nope.cfg" in err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    capsys.readouterr()


def test_predict_rows_and_recombination(trained, capsys):
    data, model = trained
    code, out, _ = run(capsys, "predict", data, "--model", model)
    assert code == 0
    table = rows(out)
    assert tuple(table[0]) == PREDICT_COLUMNS
    assert len(table) == 301
    M = np.array(table[1:], dtype=float)
    col = {name: M[:, i] for i, name in enumerate(PREDICT_COLUMNS)}
    recombined = col["w_xgb"] * col["y_xgb"] + col["w_nn"] * col["y_nn"]
    assert np.max(np.abs(recombined - col["prediction"])) <= 1e-9
    np.testing.assert_allclose(col["p_xgb"] + col["p_nn"] + col["p_hybrid"], 1.0, atol=1e-9)
    np.testing.assert_allclose(col["w_xgb"] + col["w_nn"], 1.0, atol=1e-9)


def test_predict_header_only_and_out_file(trained, tmp_path, capsys):
    data, model = trained
    header = data.read_text().splitlines()[0]
    empty = tmp_path / "empty.csv"
    empty.write_text(header + "\n")
    target = tmp_path / "pred.csv"
    code, out, _ = run(capsys, "predict", empty, "--model", model, "--out", target)
    assert code == 0 and out == ""
    assert rows(target.read_text()) == [list(PREDICT_COLUMNS)]


def test_predict_arity_mismatch(trained, tmp_path, capsys):
    path = tmp_path / "narrow.csv"
    path.write_text("a,b\n1,2\n")
    code, _, err = run(capsys, "predict", path, "--model", trained[1])
    assert code == 2 and "D=9" in err


def test_predict_bad_model_file(trained, tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_bytes(trained[1].read_bytes()[:100])
    code, _, err = run(capsys, "predict", trained[0], "--model", broken)
    assert code == 4 and "byte offset" in err
    code, _, _ = run(capsys, "predict", trained[0], "--model", tmp_path / "absent.json")
    assert code == 4


def test_inspect_contract(trained, tmp_path, capsys):
    data, model = trained
    code, out, _ = run(capsys, "inspect", data, "--model", model)
    assert code == 0
    table = rows(out)
    assert table[0] == ["section", "name", "mean", "std", "argmax_share", "reference_mean"]
    sel = [r for r in table[1:] if r[0] == "selection"]
    assert [r[1] for r in sel] == ["xgb", "nn", "hybrid"]
    assert abs(sum(float(r[2]) for r in sel) - 1.0) <= 1e-9
    assert abs(sum(float(r[4]) for r in sel) - 1.0) <= 1e-9
    assert len([r for r in table[1:] if r[0] == "importance"]) == 9

    one = tmp_path / "one.csv"
    one.write_text("\n".join(data.read_text().splitlines()[:2]) + "\n")
    code, out, _ = run(capsys, "inspect", one, "--model", model)
    sel = [r for r in rows(out)[1:] if r[0] == "selection"]
    assert all(float(r[3]) == 0.0 for r in sel)


def test_inspect_rejects_empty_input(trained, tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text(trained[0].read_text().splitlines()[0] + "\n")
    code, _, _ = run(capsys, "inspect", empty, "--model", trained[1])
    assert code == 2


def test_compare_table_shape(trained, config_file, capsys):
    code, out, _ = run(capsys, "compare", trained[0], "--config", config_file, "--seed", 9)
    assert code == 0
    table = rows(out)
    assert table[0] == ["model", "rmse", "mae", "r2"]
    assert [r[0] for r in table[1:]] == ["gbrt", "nn", "simple_average", "dml"]
    assert all(len(r) == 4 for r in table)
    assert all(len(v.split(".")[1]) == 6 for r in table[1:] for v in r[1:])


def test_compare_fits_noiseless_tree_data(tmp_path, capsys):
    data = tmp_path / "tree.csv"
    run(capsys, "synth", "--kind", "tree", "--n-rows", 500, "--seed", 2, "--out", data)
    cfg = tmp_path / "tree.cfg"
    cfg.write_text(SMALL.replace("gbrt.n_estimators = 20", "gbrt.n_estimators = 60")
                   + "gbrt.learning_rate = 0.3\n")
    code, out, _ = run(capsys, "compare", data, "--config", cfg)
    assert code == 0
    gbrt_row = rows(out)[1]
    assert gbrt_row[0] == "gbrt" and float(gbrt_row[1]) < 0.05
