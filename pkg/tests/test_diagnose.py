import json

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import expit

from pogit.constraints import PredictorPrior, Sign
from pogit.data import Dataset
from pogit.design import Design, Intercept, Linear
from pogit.diagnose import aic, identifiability_check, lrt, oracle_protocol
from pogit.exceptions import OrderingError, ProtocolError
from pogit.model import Link, PogitSpec
from pogit.rng import stream
from pogit.simulate import generate_pogit


def test_aic_examples():
    assert aic(3, -10.0) == 26.0
    assert aic(0, 0.0) == 0.0
    assert aic(2, -5.0) < aic(2, -6.0)
    assert aic(4, -7.25) - aic(4, -3.5) == -2 * (-7.25 + 3.5)
    with pytest.raises(ValueError):
        aic(-1, 0.0)


def test_lrt_examples():
    r = lrt(-5.0, -5.0, 1)
    assert r.statistic == 0.0 and r.p_value == 1.0
    assert lrt(3.841459 / 2, 0.0, 1).p_value == pytest.approx(0.05, abs=1e-4)
    assert lrt(50.0, 0.0, 1).p_value < 1e-20
    assert lrt(3.0, 0.0, 3).p_value == pytest.approx(0.1116102, abs=1e-6)
    with pytest.raises(OrderingError):
        lrt(-6.0, -5.0, 1)
    with pytest.raises(ValueError):
        lrt(0.0, 0.0, 0)


def underreported(mean_p: float, n: int = 2000, seed: int = 0):
    """Linear lambda and p in independent covariates with the p intercept tuned to ``mean_p``."""
    rng = stream(seed, "cov")
    x_l, x_p = rng.normal(size=n), rng.normal(size=n)
    a = brentq(lambda c: expit(c + 2.0 * x_p).mean() - mean_p, -30, 30)
    spec = PogitSpec(Design([Intercept(), Linear("x_lambda")]), Design([Intercept(), Linear("x_p")]))
    data = generate_pogit(spec, [1.0, 0.5, a, 2.0], {"x_lambda": x_l, "x_p": x_p}, seed=seed)
    return spec, data


def test_protocol_requires_truth():
    spec, data = underreported(0.3, n=100)
    with pytest.raises(ProtocolError):
        oracle_protocol(spec, Dataset(data.covariates, data.y))


def test_protocol_ordering_and_report(tmp_path):
    spec, data = underreported(0.3, seed=1)
    rep = oracle_protocol(spec, data)
    o, p, nv = (rep.entry(k) for k in ("oracle", "pogit", "naive"))
    assert o.aic < p.aic < nv.aic
    assert o.loglik >= max(p.loglik, nv.loglik)
    for e in rep.models:
        assert e.aic == 2 * e.k - 2 * e.loglik
    assert (o.k, p.k, nv.k) == (2, 4, 2)
    assert all(t["statistic"] >= 0 for t in rep.tests)
    doc = json.loads(rep.to_json(tmp_path / "r.json", {"header": {"seed": 1}}))
    assert doc["header"]["seed"] == 1 and len(doc["models"]) == 3
    rep.to_csv(tmp_path / "r.csv", ["seed: 1"])
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "# seed: 1" and text[1] == "model,k,loglik,aic,converged"


def test_protocol_no_underreporting_oracle_equals_naive():
    rng = np.random.default_rng(2)
    x = rng.normal(size=300)
    y = rng.poisson(np.exp(0.4 + 0.6 * x))
    data = Dataset({"x": x, "z": rng.normal(size=300)}, y, y_true=y)
    spec = PogitSpec(Design([Intercept(), Linear("x")]), Design([Intercept()]),
                     priors=(PredictorPrior("p", 100.0, target=8.0),))
    rep = oracle_protocol(spec, data)
    assert rep.entry("oracle").aic == rep.entry("naive").aic


def test_naive_penalty_larger_when_reporting_is_rare():
    gaps = {}
    for mp in (0.1, 0.9):
        spec, data = underreported(mp, seed=3)
        rep = oracle_protocol(spec, data)
        gaps[mp] = rep.entry("naive").aic - rep.entry("pogit").aic
    assert gaps[0.1] > gaps[0.9]


def shared_spec(**kw):
    return PogitSpec(Design([Intercept(), Linear("a"), Linear("b")]), Design([Linear("b")]), **kw)


def test_identifiability_warning_for_subset():
    rng = np.random.default_rng(0)
    data = Dataset({"a": rng.normal(size=50), "b": rng.normal(size=50)}, np.zeros(50, int))
    w = identifiability_check(shared_spec(), data)
    assert len(w) == 1 and "expit" in w[0]
    assert identifiability_check(shared_spec()) == w


def test_identifiability_distinct_covariates_clean():
    spec = PogitSpec(Design([Intercept(), Linear("a")]), Design([Intercept(), Linear("b")]))
    rng = np.random.default_rng(0)
    data = Dataset({"a": rng.normal(size=50), "b": rng.normal(size=50)}, np.zeros(50, int))
    assert identifiability_check(spec, data) == []
    assert identifiability_check(spec) == []


def test_identifiability_silenced_by_sign_prior_or_bounded_link():
    assert identifiability_check(shared_spec(constraints=(Sign("p.b", "negative"),))) == []
    assert identifiability_check(shared_spec(priors=(PredictorPrior("p", 1.0),))) == []
    assert identifiability_check(shared_spec(p_link=Link.bounded(0.1, 0.9))) == []


def test_identifiability_span_not_just_names():
    rng = np.random.default_rng(1)
    a = rng.normal(size=40)
    data = Dataset({"a": a, "b": 2.0 * a - 1.0}, np.zeros(40, int))
    spec = PogitSpec(Design([Intercept(), Linear("a")]), Design([Linear("b")]))
    assert identifiability_check(spec, data) != []
    assert identifiability_check(spec) == []
