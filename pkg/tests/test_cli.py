import json
import time
from pathlib import Path

import numpy as np
import pytest

from pogit.cli import main
from pogit.config import ModelConfig, load_config, parse_config, sweep_config, synthetic_config
from pogit.data import read_csv, write_csv
from pogit.exceptions import ConfigError

DATA = Path(__file__).parent / "data"
CONFIG = DATA / "two_covariate.json"
CSV = DATA / "two_covariate.csv"
GOLDEN = DATA / "two_covariate_golden.json"


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def base_config():
    return json.loads(CONFIG.read_text())


def test_fit_matches_golden(tmp_path):
    out = tmp_path / "fit.json"
    assert main(["fit", "--config", str(CONFIG), "--data", str(CSV), "--out", str(out)]) == 0
    got = json.loads(out.read_text())
    gold = json.loads(GOLDEN.read_text())
    assert got["theta"].keys() == gold["theta"].keys()
    for k, v in gold["theta"].items():
        assert abs(got["theta"][k] - v) <= 1e-8
    assert got["convergence"]["converged"]
    assert got["warnings"] == []
    assert set(got["intervals"]) == {"level", "lam", "lam_lo", "lam_hi", "p", "p_lo", "p_hi", "mu", "mu_lo", "mu_hi"}
    assert len(got["intervals"]["mu"]) == 500
    assert got["covariance"]["names"] == ["lambda.x_lambda", "p.x_p"]
    h = got["header"]
    assert h["seed"] == 7 and len(h["config_sha256"]) == 64 and h["version"]


def test_fit_golden_is_consistent_with_truth():
    gold = json.loads(GOLDEN.read_text())
    se = gold["covariance"]["std_errors"]
    for k in ("lambda.x_lambda", "p.x_p"):
        assert abs(gold["theta"][k] - 1.0) <= 3 * se[k]


def test_fit_overlap_warns(tmp_path):
    out = tmp_path / "o.json"
    assert main(["fit", "--config", str(DATA / "overlap.json"), "--data", str(CSV), "--out", str(out)]) == 0
    warnings = json.loads(out.read_text())["warnings"]
    assert any("span" in w for w in warnings)


def test_fit_missing_count_column(tmp_path, capsys):
    doc = base_config()
    doc["data"]["count"] = "cases"
    cfg = write_config(tmp_path, doc)
    assert main(["fit", "--config", str(cfg), "--data", str(CSV), "--out", str(tmp_path / "x.json")]) == 1
    assert "'cases'" in capsys.readouterr().err


def test_fit_bad_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x_lambda,x_p,y,y_true\n0.1,0.2,1,2\n0.3,abc,0,0\n")
    assert main(["fit", "--config", str(CONFIG), "--data", str(bad), "--out", str(tmp_path / "x.json")]) == 1
    err = capsys.readouterr().err
    assert "row 3" in err and "x_p" in err


def test_fit_nonconvergence_exit_2(tmp_path):
    doc = base_config()
    doc["fit"]["max_iter"] = 1
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "nc.json"
    assert main(["fit", "--config", str(cfg), "--data", str(CSV), "--out", str(out)]) == 2
    assert json.loads(out.read_text())["convergence"]["converged"] is False


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["fit", "--config", str(p), "--data", str(CSV), "--out", str(tmp_path / "x.json")]) == 1
    assert "invalid JSON" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.update(extra=1), "unknown keys"),
    (lambda d: d.update(constraints=[{"type": "sign", "coef": "p.nope"}]), "p.nope"),
    (lambda d: d["lambda"]["terms"].append({"type": "cubic"}), "cubic"),
    (lambda d: d["p"].update(link={"kind": "bounded-logit", "lower": 0.9, "upper": 0.1}), "bounded-logit"),
    (lambda d: d["lambda"]["terms"].append({"type": "linear", "column": "age"}), "age"),
    (lambda d: d.update(constraints=[{"type": "convex", "block": "p", "term": "zz"}]), "zz"),
    (lambda d: d.update(seed=-3), "seed"),
    (lambda d: d["fit"].update(level=1.5), "level"),
    (lambda d: d.update(priors=[{"type": "predictor", "block": "p"}]), "weight"),
])
def test_config_validation(mutate, fragment):
    doc = base_config()
    mutate(doc)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(doc)


def test_config_full_grammar():
    doc = {
        "seed": 3,
        "data": {"count": "y", "covariates": ["age", "sex"], "exposure": "pop"},
        "lambda": {"terms": [{"type": "intercept"},
                             {"type": "spline", "column": "age", "degree": 3, "knots": [15, 40],
                              "domain": [0, 100]}]},
        "p": {"terms": [{"type": "intercept"}, {"type": "linear", "column": "sex"},
                        {"type": "spline", "column": "age", "degree": 2, "knots": [50], "domain": [0, 100],
                         "drop_first": True, "name": "page"}],
              "link": {"kind": "bounded-logit", "lower": 0.05, "upper": 0.95}},
        "constraints": [
            {"type": "sign", "coef": "p.sex", "sign": "positive"},
            {"type": "monotone", "block": "p", "term": "page", "direction": "decreasing", "interval": [25, 60]},
            {"type": "convex", "block": "lambda", "term": "age", "n_points": 10},
            {"type": "linear", "coefs": {"p.intercept": 1, "p.sex": 1}, "upper": 3},
            {"type": "bound", "coef": "lambda.intercept", "lower": -10},
        ],
        "priors": [{"type": "predictor", "block": "p", "functional": "mean", "weight": 5, "target_value": 0.3},
                   {"type": "coef", "coef": "p.sex", "weight": 1}],
        "fit": {"tol": 1e-7, "max_iter": 100, "bounds": [-15, 15], "level": 0.95},
    }
    cfg = parse_config(doc)
    assert isinstance(cfg, ModelConfig)
    spec = cfg.spec
    assert spec.offset_column == "pop" and spec.bounds == (-15.0, 15.0)
    assert spec.p_link.range == (0.05, 0.95)
    assert len(spec.constraints) == 5 and len(spec.priors) == 2
    assert cfg.level == 0.95 and cfg.fit_options.tol == 1e-7
    assert cfg.with_seed(9).seed == 9 and cfg.with_seed(None).seed == 3


def test_section_configs():
    cfg = parse_config({"seed": 4, "simulate_bound": {"fixed": {"name": "theta_p", "value": 1},
                                                        "replicates": 5},
                        "simulate_synthetic": {"n": 200, "realizations": 2, "variants": ["prior"]}})
    sc = sweep_config(cfg)
    assert sc.swept[0] == "theta_lambda" and len(sc.swept[1]) == 17 and sc.seed == 4
    sy = synthetic_config(cfg)
    assert sy.variants == ("prior",) and sy.n == 200
    bad = parse_config({"simulate_bound": {"replicates": 0}})
    with pytest.raises(ConfigError):
        sweep_config(bad)


def tiny_sweep(tmp_path):
    return write_config(tmp_path, {"seed": 5, "simulate_bound": {
        "fixed": {"name": "theta_lambda", "value": 1.0},
        "swept": {"name": "theta_p", "grid": [-1, 0, 1]}, "replicates": 10}}, "sweep.json")


def test_simulate_bound_smoke_and_determinism(tmp_path):
    cfg = tiny_sweep(tmp_path)
    t0 = time.perf_counter()
    assert main(["simulate-bound", "--config", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert time.perf_counter() - t0 < 5.0
    assert main(["simulate-bound", "--config", str(cfg), "--out-dir", str(tmp_path / "b"), "--threads", "2"]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0].startswith("# command: simulate-bound")
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.split(",")[:9] == ["swept_param", "value", "mean_theta_lambda", "sd_theta_lambda", "mean_theta_p",
                                      "sd_theta_p", "crlb_sd_lambda", "crlb_sd_p", "n_converged"]


def test_simulate_bound_seed_override(tmp_path):
    cfg = tiny_sweep(tmp_path)
    main(["simulate-bound", "--config", str(cfg), "--out-dir", str(tmp_path / "a")])
    main(["simulate-bound", "--config", str(cfg), "--out-dir", str(tmp_path / "c"), "--seed", "6"])
    a = (tmp_path / "a" / "sweep.csv").read_text()
    c = (tmp_path / "c" / "sweep.csv").read_text()
    assert "# seed: 6" in c and "# seed: 5" in a and a != c


def test_simulate_synthetic_files(tmp_path):
    cfg = write_config(tmp_path, {"seed": 2, "simulate_synthetic": {"n": 300, "realizations": 2, "n_grid": 11}})
    out = tmp_path / "syn"
    assert main(["simulate-synthetic", "--config", str(cfg), "--out-dir", str(out)]) == 0
    files = sorted(p.name for p in out.glob("*.csv"))
    assert len(files) == 12
    assert "prior_mu.csv" in files and "convex_lam.csv" in files
    tab = read_csv(out / "bounded_p.csv")
    assert list(tab) == ["x", "true_value", "fit_mean", "fit_lo", "fit_hi"]
    assert np.all((tab["fit_lo"] > 0.2) & (tab["fit_hi"] < 0.8))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["header"]["seed"] == 2
    out2 = tmp_path / "syn2"
    main(["simulate-synthetic", "--config", str(cfg), "--out-dir", str(out2)])
    for f in files + ["summary.json"]:
        assert (out / f).read_bytes() == (out2 / f).read_bytes()


def test_crlb_command(capsys, tmp_path):
    assert main(["crlb"]) == 0
    doc = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(np.diag(doc["crlb"]), [0.012131, 0.024261], atol=1e-6)
    assert main(["crlb", "--n", "100", "--theta-p", "0", "--out", str(tmp_path / "c.json")]) == 0
    doc2 = json.loads(capsys.readouterr().out)
    assert doc2["crlb"][0][0] == pytest.approx(doc["crlb"][0][0] / 2, rel=1e-15)
    assert doc2["crlb"][1][1] == 0.0
    assert json.loads((tmp_path / "c.json").read_text()) == doc2


def test_compare_ordering_and_determinism(tmp_path):
    out = tmp_path / "cmp" / "report.json"
    assert main(["compare", "--config", str(CONFIG), "--data", str(CSV), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    aics = {m["name"]: m["aic"] for m in doc["models"]}
    assert aics["oracle"] <= aics["pogit"] <= aics["naive"]
    assert (tmp_path / "cmp" / "report.csv").exists()
    out2 = tmp_path / "cmp2" / "report.json"
    main(["compare", "--config", str(CONFIG), "--data", str(CSV), "--out", str(out2)])
    assert out.read_bytes() == out2.read_bytes()
    assert out.with_suffix(".csv").read_bytes() == out2.with_suffix(".csv").read_bytes()


def test_compare_fully_reported(tmp_path):
    cols = read_csv(CSV)
    cols["y"] = cols["y_true"]
    path = tmp_path / "full.csv"
    write_csv(path, cols)
    doc = base_config()
    doc["priors"] = [{"type": "predictor", "block": "p", "weight": 100, "target": 8}]
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "r.json"
    assert main(["compare", "--config", str(cfg), "--data", str(path), "--out", str(out)]) == 0
    aics = {m["name"]: m["aic"] for m in json.loads(out.read_text())["models"]}
    assert aics["oracle"] == aics["naive"]


def test_compare_missing_truth(tmp_path, capsys):
    doc = base_config()
    doc["data"].pop("true_count")
    cfg = write_config(tmp_path, doc)
    assert main(["compare", "--config", str(cfg), "--data", str(CSV), "--out", str(tmp_path / "r.json")]) == 1
    assert "true" in capsys.readouterr().err


def test_load_config_hash_stable():
    a, b = load_config(CONFIG), load_config(CONFIG)
    assert a.sha256 == b.sha256
