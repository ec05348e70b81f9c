"""Declarative JSON model configuration.

A config is one JSON object.  Sections (all optional unless a command needs them)::

    {
      "seed": 0,
      "data": {"count": "y", "covariates": ["x"], "exposure": null, "true_count": null},
      "lambda": {"terms": [TERM, ...]},
      "p": {"terms": [TERM, ...], "link": {"kind": "logit"}},
      "constraints": [CONSTRAINT, ...],
      "priors": [PRIOR, ...],
      "fit": {"tol": 1e-6, "max_iter": 500, "bounds": [-20, 20], "feas_tol": 1e-8, "level": 0.9},
      "simulate_bound": {...},
      "simulate_synthetic": {...},
      "crlb": {...}
    }

TERM is ``{"type": "intercept"}``, ``{"type": "linear", "column": c}`` or
``{"type": "spline", "column": c, "degree": 3, "knots": [...], "domain": [lo, hi]}``
(optional ``name`` and ``drop_first``).  See README.md for the rest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import Bound, CoefficientPrior, LinearInequality, PredictorPrior, Shape, Sign
from .design import Design, Intercept, Linear, Spline
from .estimate import FitOptions
from .exceptions import ConfigError, PogitError
from .model import Link, PogitSpec
from .simulate import VARIANTS, SweepConfig, SyntheticConfig
from .splines import SplineSpec
from .theory import TwoCovariateSetting

_TOP_KEYS = {"seed", "data", "lambda", "p", "constraints", "priors", "fit", "simulate_bound",
             "simulate_synthetic", "crlb", "threads", "description"}


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object, got {type(section).__name__}")
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}; allowed: {sorted(allowed)}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


@dataclass(frozen=True)
class DataSchema:
    count: str = "y"
    covariates: tuple[str, ...] | None = None
    exposure: str | None = None
    true_count: str | None = None


@dataclass(frozen=True)
class ModelConfig:
    """Parsed configuration; ``raw`` keeps the JSON object and ``sha256`` its canonical hash."""

    raw: dict
    sha256: str
    seed: int = 0
    schema: DataSchema = field(default_factory=DataSchema)
    spec: PogitSpec | None = None
    fit_options: FitOptions = field(default_factory=FitOptions)
    level: float = 0.90

    def with_seed(self, seed: int | None) -> "ModelConfig":
        if seed is None:
            return self
        return ModelConfig(self.raw, self.sha256, int(seed), self.schema, self.spec, self.fit_options, self.level)

    def require_spec(self) -> PogitSpec:
        if self.spec is None:
            raise ConfigError("config has no 'lambda' section; a model is required for this command")
        return self.spec

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name) or {})


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _term(t: dict, where: str):
    _check_keys(t, {"type", "column", "name", "degree", "knots", "domain", "drop_first"}, where)
    kind = _require(t, "type", where)
    if kind == "intercept":
        return Intercept(t.get("name", "intercept"))
    if kind == "linear":
        return Linear(_require(t, "column", where), t.get("name"))
    if kind == "spline":
        try:
            sp = SplineSpec(int(_require(t, "degree", where)), tuple(float(k) for k in t.get("knots", ())),
                            tuple(float(d) for d in _require(t, "domain", where)))
        except PogitError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return Spline(_require(t, "column", where), sp, t.get("name"), bool(t.get("drop_first", False)))
    raise ConfigError(f"{where}: unknown term type {kind!r} (intercept, linear, spline)")


def _design(section: dict, where: str) -> Design:
    terms = [_term(t, f"{where}.terms[{i}]") for i, t in enumerate(section.get("terms", []))]
    try:
        return Design(terms)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _link(section: dict | None) -> Link:
    if not section:
        return Link("logit")
    _check_keys(section, {"kind", "lower", "upper"}, "p.link")
    kind = section.get("kind", "logit")
    try:
        if kind == "logit":
            return Link("logit")
        if kind in ("bounded-logit", "bounded_logit"):
            return Link.bounded(float(_require(section, "lower", "p.link")), float(_require(section, "upper", "p.link")))
    except ValueError as exc:
        raise ConfigError(f"p.link: {exc}") from None
    raise ConfigError(f"p.link: unknown kind {kind!r} (logit, bounded-logit)")


def _interval(v):
    return None if v is None else (float(v[0]), float(v[1]))


def _constraint(c: dict, where: str):
    kind = _require(c, "type", where)
    try:
        if kind == "sign":
            _check_keys(c, {"type", "coef", "sign"}, where)
            return Sign(_require(c, "coef", where), c.get("sign", "positive"))
        if kind == "monotone":
            _check_keys(c, {"type", "block", "term", "direction", "interval", "n_points"}, where)
            return Shape(_require(c, "block", where), _require(c, "term", where),
                         c.get("direction", "increasing"), _interval(c.get("interval")), int(c.get("n_points", 20)))
        if kind in ("convex", "concave"):
            _check_keys(c, {"type", "block", "term", "interval", "n_points"}, where)
            return Shape(_require(c, "block", where), _require(c, "term", where), kind,
                         _interval(c.get("interval")), int(c.get("n_points", 20)))
        if kind == "linear":
            _check_keys(c, {"type", "coefs", "upper", "label"}, where)
            return LinearInequality(dict(_require(c, "coefs", where)), float(c.get("upper", 0.0)), c.get("label"))
        if kind == "bound":
            _check_keys(c, {"type", "coef", "lower", "upper"}, where)
            lo = c.get("lower")
            hi = c.get("upper")
            return Bound(_require(c, "coef", where), -np.inf if lo is None else float(lo),
                         np.inf if hi is None else float(hi))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown constraint type {kind!r} (sign, monotone, convex, concave, linear, bound)")


def _prior(p: dict, where: str):
    kind = _require(p, "type", where)
    try:
        if kind == "predictor":
            _check_keys(p, {"type", "block", "functional", "weight", "target", "target_value"}, where)
            tv = p.get("target_value")
            return PredictorPrior(_require(p, "block", where), float(_require(p, "weight", where)),
                                  float(p.get("target", 0.0)), p.get("functional", "rows"),
                                  None if tv is None else float(tv))
        if kind == "coef":
            _check_keys(p, {"type", "coef", "weight", "target"}, where)
            return CoefficientPrior(_require(p, "coef", where), float(_require(p, "weight", where)),
                                    float(p.get("target", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown prior type {kind!r} (predictor, coef)")


def _check_references(spec: PogitSpec, schema: DataSchema):
    names = set(spec.coef_names)
    if schema.covariates is not None:
        declared = set(schema.covariates)
        for block in ("lambda", "p"):
            for cov in spec.design(block).covariates:
                if cov not in declared:
                    raise ConfigError(f"{block} block uses column {cov!r}, not listed in data.covariates")
    for c in spec.constraints:
        coefs = []
        if isinstance(c, (Sign, Bound)):
            coefs = [c.coef]
        elif isinstance(c, LinearInequality):
            coefs = list(c.coefs)
        elif isinstance(c, Shape):
            if c.block not in ("lambda", "lam", "p"):
                raise ConfigError(f"constraint block must be 'lambda' or 'p', got {c.block!r}")
            if c.term not in spec.design(c.block).term_names:
                raise ConfigError(f"shape constraint names unknown {c.block} term {c.term!r}; "
                                  f"terms: {spec.design(c.block).term_names}")
        for k in coefs:
            if k not in names:
                raise ConfigError(f"constraint references unknown coefficient {k!r}; coefficients: {sorted(names)}")
    for p in spec.priors:
        if isinstance(p, CoefficientPrior) and p.coef not in names:
            raise ConfigError(f"prior references unknown coefficient {p.coef!r}")
        if isinstance(p, PredictorPrior) and p.block not in ("lambda", "lam", "p"):
            raise ConfigError(f"prior block must be 'lambda' or 'p', got {p.block!r}")


def parse_config(raw: dict) -> ModelConfig:
    _check_keys(raw, _TOP_KEYS, "config")
    data = raw.get("data") or {}
    _check_keys(data, {"count", "covariates", "exposure", "true_count"}, "data")
    covs = data.get("covariates")
    schema = DataSchema(data.get("count", "y"), None if covs is None else tuple(covs), data.get("exposure"),
                        data.get("true_count"))
    fit_sec = raw.get("fit") or {}
    _check_keys(fit_sec, {"tol", "max_iter", "bounds", "feas_tol", "level"}, "fit")
    opts = FitOptions(tol=float(fit_sec.get("tol", 1e-6)), max_iter=int(fit_sec.get("max_iter", 500)),
                      feas_tol=float(fit_sec.get("feas_tol", 1e-8)))
    level = float(fit_sec.get("level", 0.90))
    if not 0 < level < 1:
        raise ConfigError(f"fit.level must lie in (0, 1), got {level}")
    spec = None
    if "lambda" in raw:
        lam_sec = raw["lambda"]
        _check_keys(lam_sec, {"terms"}, "lambda")
        p_sec = raw.get("p") or {}
        _check_keys(p_sec, {"terms", "link"}, "p")
        bounds = tuple(float(b) for b in fit_sec.get("bounds", (-20.0, 20.0)))
        constraints = tuple(_constraint(c, f"constraints[{i}]") for i, c in enumerate(raw.get("constraints", [])))
        priors = tuple(_prior(p, f"priors[{i}]") for i, p in enumerate(raw.get("priors", [])))
        try:
            spec = PogitSpec(_design(lam_sec, "lambda"), _design(p_sec, "p"), _link(p_sec.get("link")),
                             constraints, priors, schema.exposure, bounds)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        _check_references(spec, schema)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    return ModelConfig(raw, config_hash(raw), seed, schema, spec, opts, level)


def load_config(path) -> ModelConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(raw)


def sweep_config(cfg: ModelConfig) -> SweepConfig:
    sec = cfg.section("simulate_bound")
    _check_keys(sec, {"fixed", "swept", "n", "replicates", "mu_lambda", "sigma_lambda", "sigma_p", "bounds",
                      "tol", "max_iter"}, "simulate_bound")
    kw = {}
    if "fixed" in sec:
        f = sec["fixed"]
        kw["fixed"] = (_require(f, "name", "simulate_bound.fixed"), float(_require(f, "value", "simulate_bound.fixed")))
    if "swept" in sec:
        s = sec["swept"]
        name = _require(s, "name", "simulate_bound.swept")
        if "grid" in s:
            grid = tuple(float(v) for v in s["grid"])
        else:
            grid = tuple(np.linspace(float(_require(s, "start", "simulate_bound.swept")),
                                     float(_require(s, "stop", "simulate_bound.swept")),
                                     int(_require(s, "num", "simulate_bound.swept"))))
        kw["swept"] = (name, grid)
    elif "fixed" in sec and kw["fixed"][0] == "theta_p":
        kw["swept"] = ("theta_lambda", tuple(np.linspace(-2, 2, 17)))
    for k in ("n", "replicates", "max_iter"):
        if k in sec:
            kw[k] = int(sec[k])
    for k in ("mu_lambda", "sigma_lambda", "sigma_p", "tol"):
        if k in sec:
            kw[k] = float(sec[k])
    if "bounds" in sec:
        kw["bounds"] = tuple(float(b) for b in sec["bounds"])
    try:
        return SweepConfig(seed=cfg.seed, **kw)
    except ValueError as exc:
        raise ConfigError(f"simulate_bound: {exc}") from None


def synthetic_config(cfg: ModelConfig) -> SyntheticConfig:
    sec = cfg.section("simulate_synthetic")
    ints = {"n", "realizations", "degree", "n_knots", "n_constraint_points", "n_grid", "max_iter"}
    pairs = {"link_bounds", "convex_lambda", "convex_p", "interior", "bounds", "envelope"}
    floats = {"tol", "prior_weight"}
    _check_keys(sec, ints | pairs | floats | {"variants"}, "simulate_synthetic")
    kw = {}
    for k, v in sec.items():
        if k in ints:
            kw[k] = int(v)
        elif k in pairs:
            kw[k] = (float(v[0]), float(v[1]))
        elif k in floats:
            kw[k] = None if v is None else float(v)
        elif k == "variants":
            kw[k] = tuple(v)
    try:
        return SyntheticConfig(seed=cfg.seed, **kw)
    except ValueError as exc:
        raise ConfigError(f"simulate_synthetic: {exc}; variants: {VARIANTS}") from None


def crlb_setting(cfg: ModelConfig | None = None, **overrides) -> TwoCovariateSetting:
    sec = cfg.section("crlb") if cfg is not None else {}
    allowed = {"theta_lambda", "theta_p", "mu_lambda", "sigma_lambda", "sigma_p", "n"}
    _check_keys(sec, allowed, "crlb")
    vals = {k: v for k, v in {**sec, **overrides}.items() if v is not None}
    try:
        return TwoCovariateSetting(**{k: (int(v) if k == "n" else float(v)) for k, v in vals.items()})
    except ValueError as exc:
        raise ConfigError(f"crlb: {exc}") from None
