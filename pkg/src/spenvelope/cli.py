"""Command-line interface.

Subcommands
-----------
transform  censoring replacement, subcomposition normalization, log-ratio
           predictors and the ppm response transform; raw CSV in, modeling
           CSV out
fit        envelope fit at a fixed dimension; writes a JSON artifact and a
           coefficient/SE/Z CSV
select     per-dimension fit table under AIC/BIC/CV; writes the table CSV
predict    kriging at new sites from a stored fit artifact
cv         repeated k-fold cross-validation of envelope vs GLS predictions
simulate   run one of the preset Monte-Carlo scenarios and write its
           replicate, summary and histogram CSVs

All numeric output is written with 17 significant digits so reruns with the
same seed are byte-identical.  Numerical failures exit 1 after printing a
machine-readable JSON error record to stderr; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .compositions import (
    CompositionTable,
    log_ratio_transform,
    replace_below_threshold,
    response_transform,
    subcomposition_normalize,
)
from .envelope import EnvelopeBasis, SpeFit, fit_spe, select_dimension
from .errors import DimensionError, SpenvelopeError
from .gls import OptimOptions, fit_full_model
from .prediction import ModelSpec, PredictionRequest, cross_validate, krige_predict
from .asymptotics import avar_beta
from .simulate import preset_fingerprint, run_scenario, scenario_config
from .spatial import CorrelationParams, SiteSet, SpatialDataset

FLOAT_FMT = "%.17g"


def _fmt(x: float) -> float:
    """Round-trip a float through its 17-significant-digit decimal form."""
    return float(format(float(x), ".17g"))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _fmt(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")


# ---------------------------------------------------------------------------
# shared option groups
# ---------------------------------------------------------------------------


def _default_jobs() -> int:
    return int(os.environ.get("SPENVELOPE_JOBS", "1"))


def _add_optim_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--budget", type=int, default=5000, help="objective evaluation budget")
    sp.add_argument("--theta-budget", type=int, default=2000, help="simplex budget for theta profiles")
    sp.add_argument("--tol", type=float, default=1e-8, help="relative objective tolerance")
    sp.add_argument("--multistart", type=int, default=3, help="basis initializations (1-3)")
    sp.add_argument("--seed", type=int, default=0, help="seed for randomized pieces")
    sp.add_argument("--n-jobs", type=int, default=None,
                    help="parallel workers (default: SPENVELOPE_JOBS env var or 1)")


def _optim_options(args) -> OptimOptions:
    return OptimOptions(
        budget=args.budget,
        theta_budget=args.theta_budget,
        tol=args.tol,
        multistart=args.multistart,
        seed=args.seed,
        n_jobs=args.n_jobs if args.n_jobs is not None else _default_jobs(),
    )


def _add_data_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--input", required=True, help="input CSV with header")
    sp.add_argument("--coords", default="sx,sy", help="coordinate column names, e.g. sx,sy")
    sp.add_argument("--response", default="Y", help="response column name(s), comma separated")
    sp.add_argument("--predictors", default=None,
                    help="predictor column names (default: every remaining column)")


def _load_dataset(args) -> tuple[SpatialDataset, dict]:
    frame = pd.read_csv(args.input)
    coord_cols = args.coords.split(",")
    resp_cols = args.response.split(",")
    if args.predictors:
        pred_cols = args.predictors.split(",")
    else:
        pred_cols = [c for c in frame.columns if c not in coord_cols + resp_cols]
    roles = coord_cols + resp_cols + pred_cols
    if len(set(roles)) != len(roles):
        raise DimensionError("coordinate, response and predictor columns must be disjoint")
    missing = [c for c in roles if c not in frame.columns]
    if missing:
        raise DimensionError(f"columns not in {args.input}: {missing}")
    data = SpatialDataset(
        sites=SiteSet(frame[coord_cols].to_numpy(dtype=float)),
        Y=frame[resp_cols].to_numpy(dtype=float),
        X=frame[pred_cols].to_numpy(dtype=float),
    )
    echo = {"input": args.input, "coords": coord_cols, "response": resp_cols,
            "predictors": pred_cols}
    return data, echo


# ---------------------------------------------------------------------------
# artifact serialization
# ---------------------------------------------------------------------------


def fit_to_payload(fit: SpeFit, echo: dict) -> dict:
    return {
        "kind": "spe_fit",
        "version": __version__,
        "u": fit.u,
        "n": fit.n,
        "p": fit.basis.p,
        "r": int(fit.Sigma_YgX.shape[0]),
        "spatial": fit.spatial,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "param_count": fit.param_count,
        "objective": fit.objective,
        "theta": {"tau": fit.theta.tau, "lambda": fit.theta.lam},
        "mu_YgX": fit.mu_YgX,
        "mu_X": fit.mu_X,
        "mu_Y": fit.mu_Y,
        "beta": fit.beta,
        "eta": fit.eta,
        "Omega1": fit.Omega1,
        "Omega0": fit.Omega0,
        "Sigma_YgX": fit.Sigma_YgX,
        "Gamma1": fit.basis.Gamma1,
        "Gamma0": fit.basis.Gamma0,
        "config": echo,
    }


def payload_to_fit(payload: dict) -> SpeFit:
    basis = EnvelopeBasis(
        Gamma1=np.asarray(payload["Gamma1"], dtype=float).reshape(payload["p"], payload["u"]),
        Gamma0=np.asarray(payload["Gamma0"], dtype=float).reshape(
            payload["p"], payload["p"] - payload["u"]
        ),
    )
    r = payload["r"]
    return SpeFit(
        basis=basis,
        eta=np.asarray(payload["eta"], dtype=float).reshape(payload["u"], r),
        Omega1=np.asarray(payload["Omega1"], dtype=float).reshape(payload["u"], payload["u"]),
        Omega0=np.asarray(payload["Omega0"], dtype=float).reshape(
            payload["p"] - payload["u"], payload["p"] - payload["u"]
        ),
        beta=np.asarray(payload["beta"], dtype=float).reshape(payload["p"], r),
        mu_YgX=np.asarray(payload["mu_YgX"], dtype=float).reshape(r),
        mu_X=np.asarray(payload["mu_X"], dtype=float).reshape(payload["p"]),
        mu_Y=np.asarray(payload["mu_Y"], dtype=float).reshape(r),
        Sigma_YgX=np.asarray(payload["Sigma_YgX"], dtype=float).reshape(r, r),
        theta=CorrelationParams(tau=payload["theta"]["tau"], lam=payload["theta"]["lambda"]),
        u=payload["u"],
        loglik=payload["loglik"],
        aic=payload["aic"],
        bic=payload["bic"],
        param_count=payload["param_count"],
        n=payload["n"],
        objective=payload["objective"],
        spatial=payload["spatial"],
    )


def coefficient_table(fit: SpeFit, pred_names: list[str], resp_names: list[str]) -> pd.DataFrame:
    """Coefficient / SE / Z rows, one column per predictor."""
    p, r = fit.beta.shape
    if fit.u >= 1:
        av = avar_beta(fit)
        se = np.sqrt(np.diag(av) / fit.n).reshape(p, r, order="F")
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, fit.beta / se, 0.0)
    else:
        se = np.zeros((p, r))
        z = np.zeros((p, r))
    rows = []
    for j, resp in enumerate(resp_names):
        for name, vals in (("coefficient", fit.beta), ("se", se), ("z", z)):
            rows.append([name, resp] + [vals[i, j] for i in range(p)])
    return pd.DataFrame(rows, columns=["quantity", "response"] + list(pred_names))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_transform(args) -> int:
    frame = pd.read_csv(args.input)
    coord_cols = args.coords.split(",")
    components = args.components.split(",")
    thresholds = None
    if args.thresholds:
        thresholds = {}
        for item in args.thresholds.split(","):
            name, _, value = item.partition("=")
            thresholds[name.strip()] = float(value)
    table = CompositionTable(
        components=frame[components].copy(),
        coords=frame[coord_cols].to_numpy(dtype=float),
        thresholds=thresholds,
    )
    count = 0
    if thresholds:
        table, count = replace_below_threshold(table)
    table = subcomposition_normalize(table, components)
    X = log_ratio_transform(table, args.denominator)
    Y = response_transform(frame[args.response_column].to_numpy(dtype=float))

    out = pd.DataFrame({coord_cols[0]: table.coords[:, 0], coord_cols[1]: table.coords[:, 1]})
    out["Y"] = Y
    for col in X.columns:
        out[f"X_{col}"] = X[col].to_numpy()
    _write_csv(args.output, out)
    print(f"replaced {count} below-threshold values; wrote {args.output}")
    return 0


def _cmd_fit(args) -> int:
    data, echo = _load_dataset(args)
    opts = _optim_options(args)
    echo["seed"] = args.seed
    echo["u"] = args.u
    fit = fit_spe(data, args.u, opts)
    _write_json(args.output_json, fit_to_payload(fit, echo))
    if args.output_csv:
        tab = coefficient_table(fit, echo["predictors"], echo["response"])
        _write_csv(args.output_csv, tab)
    print(f"u={fit.u} loglik={fit.loglik:.6f} bic={fit.bic:.6f} "
          f"tau={fit.theta.tau:.6f} lambda={fit.theta.lam:.6f}")
    return 0


def _cmd_select(args) -> int:
    data, echo = _load_dataset(args)
    opts = _optim_options(args)
    sel = select_dimension(
        data, args.criterion, opts, cv_k=args.cv_k, cv_reps=args.cv_reps
    )
    rows = []
    for u in sorted(sel.fits):
        fit = sel.fits[u]
        rows.append(
            {
                "u": u,
                "loglik": fit.loglik,
                "param_count": fit.param_count,
                "aic": fit.aic,
                "bic": fit.bic,
                "score": sel.scores[u],
                "selected": int(u == sel.u_hat),
            }
        )
    _write_csv(args.output_csv, pd.DataFrame(rows))
    if args.output_json:
        echo["seed"] = args.seed
        echo["criterion"] = args.criterion
        _write_json(args.output_json, fit_to_payload(sel.fits[sel.u_hat], echo))
    for u, err in sorted(sel.failures.items()):
        print(f"u={u} failed: {err}", file=sys.stderr)
    print(f"selected u={sel.u_hat} by {sel.criterion}")
    return 0


def _cmd_predict(args) -> int:
    with open(args.fit_json) as fh:
        payload = json.load(fh)
    fit = payload_to_fit(payload)
    cfg = payload["config"]
    coord_cols, pred_cols = cfg["coords"], cfg["predictors"]
    resp_cols = cfg["response"]

    train_frame = pd.read_csv(args.train)
    train = SpatialDataset(
        sites=SiteSet(train_frame[coord_cols].to_numpy(dtype=float)),
        Y=train_frame[resp_cols].to_numpy(dtype=float),
        X=train_frame[pred_cols].to_numpy(dtype=float),
    )
    new_frame = pd.read_csv(args.sites)
    req = PredictionRequest(
        train=train,
        test_sites=SiteSet(new_frame[coord_cols].to_numpy(dtype=float)),
        test_X=new_frame[pred_cols].to_numpy(dtype=float),
    )
    pred = krige_predict(fit, req)
    out = pd.DataFrame(
        {coord_cols[0]: req.test_sites.coords[:, 0], coord_cols[1]: req.test_sites.coords[:, 1]}
    )
    for j, name in enumerate(resp_cols):
        out[f"pred_{name}"] = pred[:, j]
    _write_csv(args.output, out)
    print(f"wrote {len(out)} predictions to {args.output}")
    return 0


def _cmd_cv(args) -> int:
    data, echo = _load_dataset(args)
    opts = _optim_options(args)
    names = [name.strip() for name in args.models.split(",")]
    if any(n in ("spe", "pe") for n in names) and args.fix_u is None and not args.select_u:
        print("cv: envelope models need --fix-u or --select-u", file=sys.stderr)
        return 2
    models = {}
    for name in names:
        if name == "gls":
            models["gls"] = ModelSpec("gls")
        elif name in ("spe", "pe"):
            if args.select_u:
                models[name] = ModelSpec(name, select=args.select_u)
            else:
                models[name] = ModelSpec(name, u=args.fix_u)
        else:
            raise DimensionError(f"unknown model {name!r}")
    report = cross_validate(data, k=args.k, reps=args.reps, seed=args.seed,
                            models=models, opts=opts)
    payload = {
        "kind": "cv_report",
        "k": report.k,
        "reps": report.reps,
        "seed": report.seed,
        "response_variance": report.response_variance,
        "mean_mspe": report.mean_mspe,
        "per_rep": report.per_rep,
        "config": {**echo, "models": args.models, "fix_u": args.fix_u,
                   "select_u": args.select_u},
    }
    _write_json(args.output_json, payload)
    if args.output_csv:
        rows = pd.DataFrame(report.fold_rows, columns=["model", "rep", "fold", "mspe"])
        _write_csv(args.output_csv, rows)
    for label, value in sorted(report.mean_mspe.items()):
        print(f"{label}: mean MSPE {value:.6f}")
    print(f"response variance {report.response_variance:.6f}")
    return 0


def _cmd_simulate(args) -> int:
    opts = OptimOptions(
        budget=args.budget, theta_budget=args.theta_budget, tol=args.tol,
        multistart=args.multistart, seed=args.seed,
    )
    n_jobs = args.n_jobs if args.n_jobs is not None else _default_jobs()
    config = scenario_config(
        args.scenario, n=args.n, reps=args.reps, seed=args.seed, opts=opts, n_jobs=n_jobs
    )
    result = run_scenario(config)
    os.makedirs(args.out_dir, exist_ok=True)

    reps_frame = pd.DataFrame({"replicate": np.arange(result.n_completed)})
    for key in sorted(result.records):
        reps_frame[key] = result.records[key]
    _write_csv(os.path.join(args.out_dir, "replicates.csv"), reps_frame)

    summary_rows = [
        {"metric": key, "mean": mean, "se": se}
        for key, (mean, se) in sorted(result.summary.items())
    ]
    _write_csv(os.path.join(args.out_dir, "summary.csv"), pd.DataFrame(summary_rows))

    hist_rows = []
    for label in ("spe", "pe"):
        key = f"u_{label}"
        values = result.records[key].astype(int)
        for u in range(config.p + 1):
            hist_rows.append({"metric": key, "bin_left": u, "bin_right": u,
                              "count": int(np.sum(values == u))})
    beta1 = result.records["beta1_spe"]
    edges = np.histogram_bin_edges(beta1, bins=20)
    counts, _ = np.histogram(beta1, bins=edges)
    for left, right, c in zip(edges[:-1], edges[1:], counts):
        hist_rows.append({"metric": "beta1_spe", "bin_left": left,
                          "bin_right": right, "count": int(c)})
    _write_csv(os.path.join(args.out_dir, "histogram.csv"), pd.DataFrame(hist_rows))

    payload = {
        "kind": "simulation_run",
        "scenario": config.scenario,
        "n": config.n,
        "reps": config.reps,
        "seed": config.seed,
        "fingerprint": preset_fingerprint(config),
        "failures": result.failures,
        "overlay": result.overlay,
        "multistart": opts.multistart,
    }
    _write_json(os.path.join(args.out_dir, "config.json"), payload)
    print(f"scenario {config.scenario}: {result.n_completed}/{config.reps} replicates, "
          f"outputs in {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spenvelope",
        description="Spatial predictor envelope regression toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("transform", help="compositional pipeline: raw CSV to modeling CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--coords", default="sx,sy")
    sp.add_argument("--components", required=True, help="composition columns, comma separated")
    sp.add_argument("--denominator", required=True, help="log-ratio denominator column")
    sp.add_argument("--response-column", required=True, help="ppm response column")
    sp.add_argument("--thresholds", default=None,
                    help="detection thresholds as col=value[,col=value...]")
    sp.set_defaults(func=_cmd_transform)

    sp = sub.add_parser("fit", help="fit the envelope at a fixed dimension")
    _add_data_flags(sp)
    sp.add_argument("--u", type=int, required=True)
    sp.add_argument("--output-json", required=True)
    sp.add_argument("--output-csv", default=None)
    _add_optim_flags(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("select", help="per-dimension table and criterion minimizer")
    _add_data_flags(sp)
    sp.add_argument("--criterion", default="bic", choices=["aic", "bic", "cv"])
    sp.add_argument("--cv-k", type=int, default=10)
    sp.add_argument("--cv-reps", type=int, default=1)
    sp.add_argument("--output-csv", required=True)
    sp.add_argument("--output-json", default=None)
    _add_optim_flags(sp)
    sp.set_defaults(func=_cmd_select)

    sp = sub.add_parser("predict", help="kriging prediction at new sites")
    sp.add_argument("--fit-json", required=True)
    sp.add_argument("--train", required=True, help="training CSV (same schema as fit input)")
    sp.add_argument("--sites", required=True, help="CSV with coordinates and predictors")
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=_cmd_predict)

    sp = sub.add_parser("cv", help="repeated k-fold cross-validation")
    _add_data_flags(sp)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--models", default="spe,gls")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--fix-u", "--cv-fix-u", type=int, default=None, dest="fix_u")
    group.add_argument("--select-u", "--cv-select-u", choices=["aic", "bic"],
                       default=None, dest="select_u")
    sp.add_argument("--output-json", required=True)
    sp.add_argument("--output-csv", default=None)
    _add_optim_flags(sp)
    sp.set_defaults(func=_cmd_cv)

    sp = sub.add_parser("simulate", help="run a preset Monte-Carlo scenario")
    sp.add_argument("--scenario", type=int, required=True, choices=[1, 2, 3, 4, 5])
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--out-dir", required=True)
    _add_optim_flags(sp)
    sp.set_defaults(func=_cmd_simulate)

    return parser


def cli_main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpenvelopeError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    except OSError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
