"""Command-line front end.

Subcommands: ``verify``, ``certify``, ``sample``, ``settle``, ``growth``,
``lambda-sweep``.  Settings come from an INI file (``--config``) with the
sections below; command-line flags override file values.  Every run
writes ``manifest.ini`` (the resolved configuration, usable again as
``--config``) and ``manifest.json`` next to its outputs.

.. code-block:: ini

    [model]
    kind = fgn              ; fgn | explicit
    hurst = 0.25
    variance_scale = 1.0
    file =                  ; one-column covariance table for kind = explicit
    compact = false         ; zero-extend the table beyond its last lag

    [market]
    alpha = 2.0
    lambda = 0.01

    [strategy]
    kind = contrarian       ; contrarian | zero | hold-liquidate | random

    [experiment]
    seed = 0
    n_paths = 10000
    sampler = circulant     ; circulant | durbin-levinson | cholesky
    workers = 1
    T = 600
    horizons = 300, 600, 1200, 2400, 4800, 9600
    lambdas = 0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1
    lag_min = 10
    lag_max = 100000
    certify_horizon = 10000
    bootstrap = 0

    [output]
    directory =             ; defaults to $NEGMEM_OUTPUT_DIR or ./negmem-out
    formats = json, csv

Exit codes: 0 success, 1 configuration error, 2 assumption or lemma
failure, 3 runtime error.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import AssumptionReport, CovarianceModel, verify_assumption
from .market import MarketParams, settle
from .moments import LemmaViolation, certify_lemmas
from .montecarlo import DEFAULT_HORIZONS, fit_growth_exponent, lambda_sweep
from .paths import RNG_ALGORITHM, SpectrumError, sample_paths
from .strategies import Strategy

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_RUNTIME = 0, 1, 2, 3
OUTPUT_ENV = "NEGMEM_OUTPUT_DIR"

DEFAULTS = {
    "model": {"kind": "fgn", "hurst": "0.25", "variance_scale": "1.0", "file": "", "compact": "false"},
    "market": {"alpha": "2.0", "lambda": "0.01"},
    "strategy": {"kind": "contrarian"},
    "experiment": {
        "seed": "0",
        "n_paths": "10000",
        "sampler": "circulant",
        "workers": "1",
        "T": "600",
        "horizons": ", ".join(str(h) for h in DEFAULT_HORIZONS),
        "lambdas": "0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1",
        "lag_min": "10",
        "lag_max": "100000",
        "certify_horizon": "10000",
        "bootstrap": "0",
    },
    "output": {"directory": "", "formats": "json, csv"},
}

# flag dest -> (section, key)
FLAG_KEYS = {
    "model": ("model", "kind"),
    "hurst": ("model", "hurst"),
    "variance_scale": ("model", "variance_scale"),
    "file": ("model", "file"),
    "compact": ("model", "compact"),
    "alpha": ("market", "alpha"),
    "lam": ("market", "lambda"),
    "strategy": ("strategy", "kind"),
    "seed": ("experiment", "seed"),
    "n_paths": ("experiment", "n_paths"),
    "sampler": ("experiment", "sampler"),
    "workers": ("experiment", "workers"),
    "T": ("experiment", "T"),
    "horizons": ("experiment", "horizons"),
    "lambdas": ("experiment", "lambdas"),
    "lag_min": ("experiment", "lag_min"),
    "lag_max": ("experiment", "lag_max"),
    "certify_horizon": ("experiment", "certify_horizon"),
    "bootstrap": ("experiment", "bootstrap"),
    "output": ("output", "directory"),
    "formats": ("output", "formats"),
}

# Keys that do not change numerical results; left out of manifest.json's run key.
_NON_RESULT_KEYS = {("experiment", "workers"), ("output", "directory"), ("output", "formats")}


class ConfigError(Exception):
    pass


def load_config(path, overrides: dict) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cfg.optionxform = str
    cfg.read_dict(DEFAULTS)
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    for dest, value in overrides.items():
        if value is None or dest not in FLAG_KEYS:
            continue
        section, key = FLAG_KEYS[dest]
        if isinstance(value, bool):
            value = "true" if value else "false"
        cfg[section][key] = str(value)
    if not cfg["output"]["directory"]:
        cfg["output"]["directory"] = os.environ.get(OUTPUT_ENV, "negmem-out")
    return cfg


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4g}"


def _get(cfg, section, key, conv):
    raw = cfg[section][key]
    try:
        if conv is bool:
            return cfg.getboolean(section, key)
        if conv is list:
            return [float(v) for v in raw.replace(",", " ").split()]
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def build_model(cfg) -> CovarianceModel:
    kind = cfg["model"]["kind"]
    try:
        if kind == "fgn":
            return CovarianceModel.fgn(
                _get(cfg, "model", "hurst", float), _get(cfg, "model", "variance_scale", float)
            )
        if kind == "explicit":
            path = cfg["model"]["file"]
            if not path:
                raise ConfigError("[model] kind = explicit needs a covariance file")
            return CovarianceModel.from_file(path, compact=_get(cfg, "model", "compact", bool))
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def build_params(cfg) -> MarketParams:
    try:
        return MarketParams(_get(cfg, "market", "alpha", float), _get(cfg, "market", "lambda", float))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _outdir(cfg) -> Path:
    d = Path(cfg["output"]["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _formats(cfg) -> set:
    return {f.strip() for f in cfg["output"]["formats"].split(",") if f.strip()}


def write_manifest(cfg, command: str, outdir: Path, extra: dict | None = None) -> None:
    buf = io.StringIO()
    buf.write(f"; negmem {command} run manifest; rerun with: negmem {command} --config manifest.ini\n")
    cfg.write(buf)
    (outdir / "manifest.ini").write_text(buf.getvalue())
    doc = {
        "command": command,
        "version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "config": {
            s: {k: v for k, v in cfg[s].items() if (s, k) not in _NON_RESULT_KEYS}
            for s in cfg.sections()
        },
    }
    if extra:
        doc.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _verify(cfg, model):
    lo = _get(cfg, "experiment", "lag_min", int)
    hi = _get(cfg, "experiment", "lag_max", int)
    if model.max_lag is not None and hi > model.max_lag:
        hi = model.max_lag
        if hi < 100 * lo:
            return AssumptionReport(
                chi_fit=float("nan"), j1=float("nan"), j2=float("nan"), t0=0, passed=False,
                window=(lo, hi),
                diagnostics=[f"explicit table ends at lag {hi}; cannot span two decades from {lo}"],
            )
    try:
        return verify_assumption(model, (lo, hi))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _tailed_model(cfg, model):
    """Model with tail metadata attached, or ``None`` if verification fails."""
    report = _verify(cfg, model)
    if not report.passed:
        for d in report.diagnostics:
            print(f"assumption failed: {d}", file=sys.stderr)
        return None
    return model.with_tail(report)


def cmd_verify(cfg) -> int:
    model = build_model(cfg)
    out = _outdir(cfg)
    report = _verify(cfg, model)
    report.write(out / "assumption_report.json")
    write_manifest(cfg, "verify", out)
    status = "pass" if report.passed else "fail"
    print(f"verify: {status}, chi_fit={report.chi_fit:.6g}, window={list(report.window)}")
    for d in report.diagnostics:
        print(f"  {d}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_ASSUMPTION


def cmd_certify(cfg) -> int:
    model = _tailed_model(cfg, build_model(cfg))
    if model is None:
        return EXIT_ASSUMPTION
    out = _outdir(cfg)
    horizon = _get(cfg, "experiment", "certify_horizon", int)
    try:
        cert = certify_lemmas(model, horizon, raise_on_failure=False)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cert.write(out / "certificate.json")
    if "csv" in _formats(cfg):
        from .moments import SecondOrderTable

        table = SecondOrderTable(model, horizon)
        table.variance_csv(cert.H, out / "variance.csv")
        table.rho_csv(out / "rho.csv")
    write_manifest(cfg, "certify", out)
    print(
        f"certify: {'pass' if cert.passed else 'fail'}, B1={cert.B1:.12g}, B2={cert.B2:.12g}, "
        f"K={cert.K}, epsilon={cert.epsilon:.6g}, R={cert.R:.6g}"
    )
    for d in cert.diagnostics:
        print(f"  {d}", file=sys.stderr)
    return EXIT_OK if cert.passed else EXIT_ASSUMPTION


def cmd_sample(cfg) -> int:
    model = build_model(cfg)
    out = _outdir(cfg)
    T = _get(cfg, "experiment", "T", int)
    try:
        batch = sample_paths(
            model, T, _get(cfg, "experiment", "n_paths", int), _get(cfg, "experiment", "seed", int),
            cfg["experiment"]["sampler"], workers=_get(cfg, "experiment", "workers", int),
        )
    except SpectrumError as exc:
        print(f"sample: {exc}", file=sys.stderr)
        (out / "spectrum.json").write_text(json.dumps(exc.diagnostic.to_dict(), indent=2) + "\n")
        return EXIT_ASSUMPTION
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    batch.save(out / "paths.bin")
    if "csv" in _formats(cfg) and batch.n_paths * (T + 1) <= 1_000_000:
        batch.to_csv(out / "paths.csv")
    write_manifest(cfg, "sample", out)
    print(f"sample: {batch.n_paths} paths of length {T} with {batch.sampler}")
    return EXIT_OK


def cmd_settle(cfg, prices_file, phi_file) -> int:
    if not prices_file:
        raise ConfigError("settle needs --prices")
    params = build_params(cfg)
    try:
        S = np.loadtxt(prices_file, ndmin=1, comments="#")
        if phi_file:
            phi = np.loadtxt(phi_file, ndmin=1, comments="#")
        else:
            T = S.size - 1
            phi = Strategy(cfg["strategy"]["kind"], T, params.alpha,
                           _get(cfg, "experiment", "seed", int)).speeds(S[: T + 1])
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        ledger = settle(S, phi, params)
    except ValueError as exc:
        print(f"settle: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _outdir(cfg)
    ledger.to_csv(out / "ledger.csv")
    summary = {
        "gross_pnl": ledger.gross_pnl,
        "friction": ledger.friction,
        "terminal_cash": ledger.terminal_cash,
        "gstar_bound": ledger.gstar_bound,
    }
    (out / "ledger.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_manifest(cfg, "settle", out, {"prices": str(prices_file), "phi": str(phi_file or "")})
    print(f"settle: X_T={ledger.terminal_cash:.12g}, bound={ledger.gstar_bound:.12g}")
    return EXIT_OK


def cmd_growth(cfg) -> int:
    model = _tailed_model(cfg, build_model(cfg))
    if model is None:
        return EXIT_ASSUMPTION
    params = build_params(cfg)
    out = _outdir(cfg)
    try:
        report = fit_growth_exponent(
            model,
            cfg["strategy"]["kind"],
            [int(h) for h in _get(cfg, "experiment", "horizons", list)],
            _get(cfg, "experiment", "n_paths", int),
            _get(cfg, "experiment", "seed", int),
            params,
            cfg["experiment"]["sampler"],
            _get(cfg, "experiment", "workers", int),
            _get(cfg, "experiment", "bootstrap", int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    (out / "growth_report.json").write_text(report.to_json(indent=2) + "\n")
    if "csv" in _formats(cfg):
        report.to_csv(out / "growth.csv")
    write_manifest(cfg, "growth", out)
    if report.fitted_slope is None:
        print(f"growth: slope not fitted (theory {report.theory_exponent:.6g})")
    else:
        lo, hi = report.slope_ci
        print(f"growth: slope={report.fitted_slope:.4f} [{lo:.4f}, {hi:.4f}], "
              f"theory={report.theory_exponent:.4f}, analytic lower slope={_fmt(report.lower_slope)}")
    if report.nonpositive:
        print(f"growth: NonPositiveMean at horizons {report.nonpositive}", file=sys.stderr)
    return EXIT_OK


def cmd_lambda_sweep(cfg) -> int:
    model = build_model(cfg)
    if model.kind != "fgn":
        model = _tailed_model(cfg, model)
        if model is None:
            return EXIT_ASSUMPTION
    out = _outdir(cfg)
    try:
        rep = lambda_sweep(
            model,
            cfg["strategy"]["kind"],
            _get(cfg, "experiment", "T", int),
            _get(cfg, "experiment", "lambdas", list),
            _get(cfg, "experiment", "n_paths", int),
            _get(cfg, "experiment", "seed", int),
            alpha=_get(cfg, "market", "alpha", float),
            sampler=cfg["experiment"]["sampler"],
            workers=_get(cfg, "experiment", "workers", int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    (out / "lambda_sweep.json").write_text(rep.to_json(indent=2) + "\n")
    if "csv" in _formats(cfg):
        rep.to_csv(out / "lambda_sweep.csv")
    write_manifest(cfg, "lambda-sweep", out)
    print(f"lambda-sweep: threshold={rep.threshold}, epsilon/3={_fmt(rep.epsilon_over_3)}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration or a previous manifest.ini")
    g = common.add_argument_group("model")
    g.add_argument("--model", choices=["fgn", "explicit"])
    g.add_argument("--hurst", type=float)
    g.add_argument("--variance-scale", type=float)
    g.add_argument("--file", help="one-column covariance table r(0), r(1), ...")
    g.add_argument("--compact", action="store_true", default=None)
    g = common.add_argument_group("market")
    g.add_argument("--alpha", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--strategy", choices=["contrarian", "zero", "hold-liquidate", "random"])
    g = common.add_argument_group("experiment")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-paths", type=int)
    g.add_argument("--sampler", choices=["circulant", "durbin-levinson", "cholesky"])
    g.add_argument("--workers", type=int)
    g.add_argument("-T", "--horizon", dest="T", type=int)
    g.add_argument("--horizons", help="comma-separated list")
    g.add_argument("--lambdas", help="comma-separated list")
    g.add_argument("--lag-min", type=int)
    g.add_argument("--lag-max", type=int)
    g.add_argument("--certify-horizon", type=int)
    g.add_argument("--bootstrap", type=int)
    g = common.add_argument_group("output")
    g.add_argument("--output", "-o", help=f"output directory (default ${OUTPUT_ENV} or ./negmem-out)")
    g.add_argument("--formats")

    p = argparse.ArgumentParser(prog="negmem", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"negmem {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check negative memory of the covariance")
    sub.add_parser("certify", parents=[common], help="certify variance/covariance bounds")
    sub.add_parser("sample", parents=[common], help="sample price paths")
    sp = sub.add_parser("settle", parents=[common], help="settle a trade sequence on a price path")
    sp.add_argument("--prices", help="one-column prices S_0..S_T (optionally S_{T+1})")
    sp.add_argument("--phi", help="one-column trades phi_0..phi_T (default: --strategy)")
    sub.add_parser("growth", parents=[common], help="Monte Carlo growth-exponent experiment")
    sub.add_parser("lambda-sweep", parents=[common], help="mean terminal cash across lambda")
    return p




def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, vars(args))
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "settle":
            return cmd_settle(cfg, args.prices, args.phi)
        if args.command == "growth":
            return cmd_growth(cfg)
        return cmd_lambda_sweep(cfg)
    except ConfigError as exc:
        print(f"negmem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LemmaViolation as exc:
        print(f"negmem: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except Exception as exc:  # noqa: BLE001
        print(f"negmem: runtime error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
