"""Command-line front end: ``pogit {fit,simulate-bound,simulate-synthetic,crlb,compare}``.

Exit codes: 0 success, 1 input error, 2 non-convergence (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ModelConfig, crlb_setting, load_config, sweep_config, synthetic_config
from .data import Dataset, read_csv, write_csv
from .diagnose import identifiability_check, oracle_protocol
from .estimate import fit
from .exceptions import ConfigError, PogitError, RankDeficiencyError
from .simulate import run_sweep, run_synthetic
from .theory import crlb, crlb_sd
from .uq import intervals, sandwich

log = logging.getLogger("pogit")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class InputError(Exception):
    pass


def _header(cfg: ModelConfig | None, command: str) -> dict:
    return {
        "command": command,
        "config_sha256": None if cfg is None else cfg.sha256,
        "seed": None if cfg is None else cfg.seed,
        "version": __version__,
    }


def _header_lines(header: dict) -> list[str]:
    return [f"{k}: {header[k]}" for k in sorted(header)]


def _dump(doc: dict, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _threads(n: int | None) -> int:
    if n is None:
        return 1
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _load(args) -> ModelConfig:
    if args.config is None:
        raise InputError("--config is required")
    return load_config(args.config).with_seed(args.seed)


def _dataset(cfg: ModelConfig, path, need_truth: bool = False) -> Dataset:
    if path is None:
        raise InputError("--data is required")
    cols = read_csv(path)
    s = cfg.schema
    if need_truth and s.true_count is None:
        raise InputError("config data.true_count must name the true-count column for this command")
    return Dataset.from_columns(cols, s.count, s.covariates, s.exposure, s.true_count)


def _tolist(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def cmd_fit(args) -> int:
    cfg = _load(args)
    spec = cfg.require_spec()
    data = _dataset(cfg, args.data)
    res = fit(spec, data, cfg.fit_options)
    warnings = identifiability_check(spec, data)
    cov = None
    rows = None
    try:
        S = sandwich(spec, res, data)
        cov = {
            "names": list(S.names),
            "sandwich": S.V.tolist(),
            "model_based": S.model_based.tolist(),
            "std_errors": dict(zip(S.names, _tolist(S.std_errors))),
            "constraints_active": S.constraints_active,
        }
        rows = {k: _tolist(v) for k, v in intervals(spec, res.theta, S, data, cfg.level).as_columns().items()}
    except RankDeficiencyError as exc:
        warnings.append(f"no covariance: {exc}")
    doc = {
        "header": _header(cfg, "fit"),
        "theta": res.theta.as_dict(),
        "convergence": {
            "converged": res.converged,
            "n_iterations": res.n_iterations,
            "kkt_residual": res.kkt_residual,
            "objective": res.objective,
            "nll": res.nll,
            "active_constraints": list(res.active_constraints),
            "message": res.message,
        },
        "covariance": cov,
        "intervals": None if rows is None else {"level": cfg.level, **rows},
        "warnings": warnings,
    }
    _dump(doc, Path(args.out))
    for w in warnings:
        log.warning(w)
    if not res.converged:
        log.error("fit did not converge: %s", res.message)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_simulate_bound(args) -> int:
    cfg = _load(args)
    sc = sweep_config(cfg)
    table = run_sweep(sc, _threads(args.threads))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", table, _header_lines(_header(cfg, "simulate-bound")))
    return EXIT_NONCONVERGED if int(np.sum(table["n_converged"])) == 0 else EXIT_OK


def cmd_simulate_synthetic(args) -> int:
    cfg = _load(args)
    sc = synthetic_config(cfg)
    curves = run_synthetic(sc, _threads(args.threads))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, "simulate-synthetic")
    summary = {"header": header, "variants": {}}
    for name, vc in curves.items():
        for q in ("p", "lam", "mu"):
            write_csv(out / f"{name}_{q}.csv", vc.table(q), _header_lines(header))
        summary["variants"][name] = {
            "n_converged": int(vc.converged.sum()),
            "realizations": int(vc.converged.size),
            "mean_ise_p": float(vc.ise("p").mean()),
            "mean_ise_lam": float(vc.ise("lam").mean()),
            "mean_ise_mu": float(vc.ise("mu").mean()),
        }
    _dump(summary, out / "summary.json")
    return EXIT_OK


def cmd_crlb(args) -> int:
    cfg = load_config(args.config).with_seed(args.seed) if args.config else None
    setting = crlb_setting(cfg, theta_lambda=args.theta_lambda, theta_p=args.theta_p, mu_lambda=args.mu_lambda,
                          sigma_lambda=args.sigma_lambda, sigma_p=args.sigma_p, n=args.n)
    doc = {
        "header": _header(cfg, "crlb"),
        "setting": {k: getattr(setting, k) for k in
                    ("theta_lambda", "theta_p", "mu_lambda", "sigma_lambda", "sigma_p", "n")},
        "crlb": crlb(setting).tolist(),
        "crlb_sd": _tolist(crlb_sd(setting)),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        _dump(doc, Path(args.out))
    print(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    spec = cfg.require_spec()
    data = _dataset(cfg, args.data, need_truth=True)
    report = oracle_protocol(spec, data, cfg.fit_options)
    header = _header(cfg, "compare")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.to_json(out, {"header": header})
    report.to_csv(out.with_suffix(".csv"), _header_lines(header))
    if not all(m.converged for m in report.models):
        return EXIT_NONCONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pogit", description="Poisson-logit models for under-reported counts.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=False, out="out", threads=False):
        p.add_argument("--config", help="JSON model config")
        if data:
            p.add_argument("--data", help="CSV with a header row")
        if out == "out":
            p.add_argument("--out", required=True, help="output JSON path")
        elif out == "out-dir":
            p.add_argument("--out-dir", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
        return p

    common(sub.add_parser("fit", help="fit a model to data"), data=True).set_defaults(func=cmd_fit)
    common(sub.add_parser("simulate-bound", help="variance sweep against the Cramer-Rao bound"),
           out="out-dir", threads=True).set_defaults(func=cmd_simulate_bound)
    common(sub.add_parser("simulate-synthetic", help="nonlinear deconvolution study"),
           out="out-dir", threads=True).set_defaults(func=cmd_simulate_synthetic)
    c = common(sub.add_parser("crlb", help="closed-form Cramer-Rao bound"), out=None)
    c.add_argument("--out", default=None, help="optional JSON output path")
    for flag in ("theta-lambda", "theta-p", "mu-lambda", "sigma-lambda", "sigma-p"):
        c.add_argument(f"--{flag}", type=float, default=None)
    c.add_argument("--n", type=int, default=None)
    c.set_defaults(func=cmd_crlb)
    common(sub.add_parser("compare", help="oracle / Pogit / naive AIC comparison"), data=True).set_defaults(
        func=cmd_compare)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="pogit: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError, PogitError, OSError, ValueError) as exc:
        print(f"pogit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
