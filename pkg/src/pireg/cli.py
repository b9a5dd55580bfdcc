"""Command-line front end: spec checking, basis/enumeration dumps,
regressions from CSV, and the three canned experiments.

Exit codes: 0 success, 2 spec or unit errors, 3 data errors, 4 fit did not
converge (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import pi, regress, sims
from .pi import FeatureSpec, Monomial, SCHEMA_VERSION
from .units import UnitError

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_DATA = 3
EXIT_NOCONV = 4


class DataError(Exception):
    pass


def load_spec_file(path):
    """Read a spec JSON file; returns (spec, label_units or None)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise DataError(f"cannot read spec file: {e}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"spec file is not valid JSON: {e}") from None
    try:
        spec = FeatureSpec.from_json_dict(data)
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed spec file: {e}") from None
    label_units = None
    if data.get("label_units") is not None:
        from .units import parse_unit

        label_units = parse_unit(data["label_units"], spec.system)
    return spec, label_units


def write_report(path, command: str, config: dict, results: dict) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "results": results,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


# ---------------------------------------------------------------------------
# subcommands

def cmd_units_check(args, config) -> int:
    spec, label_units = load_spec_file(args.spec)
    from .intlinalg import rank as int_rank

    rk = int_rank(spec.units_matrix())
    s = spec.d - rk
    print(f"d={spec.d} k={spec.k} rank={rk} s={s}")
    if label_units is not None:
        from .intlinalg import solve_diophantine

        sol = solve_diophantine(spec.units_matrix(), label_units.exps)
        print(f"label units reachable: {'yes' if sol is not None else 'no'}")
    return EXIT_OK


def cmd_basis(args, config) -> int:
    spec, _ = load_spec_file(args.spec)
    basis = pi.dimensionless_basis(spec)
    for m in basis:
        print(pi.format_monomial(m, spec))
    print(f"# {len(basis)} basis monomials")
    if args.out:
        pi.save_monomials(args.out, basis, spec)
    return EXIT_OK


def cmd_enumerate(args, config) -> int:
    spec, _ = load_spec_file(args.spec)
    monos = pi.enumerate_monomials(
        spec, args.max_degree, dimensionless_only=args.dimensionless_only
    )
    kind = "dimensionless" if args.dimensionless_only else "total"
    print(f"{len(monos)} {kind} monomials at max degree {args.max_degree}")
    if args.out:
        pi.save_monomials(args.out, monos, spec)
    return EXIT_OK


def _resolve_features(arg: str, spec: FeatureSpec) -> list[Monomial]:
    if arg == "basis":
        # constant first so a full-rank spec (empty basis) still fits C * D(x)
        return [Monomial.constant(spec.d)] + pi.dimensionless_basis(spec)
    if arg.startswith("enumerate:"):
        deg = int(arg.split(":", 1)[1])
        return pi.enumerate_monomials(spec, deg, dimensionless_only=True)
    if arg.startswith("file:"):
        return pi.load_monomials(arg.split(":", 1)[1], spec)
    raise DataError(f"unknown --features value {arg!r}")


def _resolve_decoders(arg: str, spec, label_units, max_degree) -> list[Monomial]:
    sols = pi.decoder_solutions(spec, label_units, max_degree)
    if arg == "auto":
        if not sols:
            raise DataError("no decoder monomial exists for the label units")
        return [sols[0]]
    if arg == "ensemble":
        if not sols:
            raise DataError("no decoder monomial exists for the label units")
        return sols
    if arg.startswith("index:"):
        i = int(arg.split(":", 1)[1])
        if not 0 <= i < len(sols):
            raise DataError(f"decoder index {i} out of range ({len(sols)} solutions)")
        return [sols[i]]
    if arg.startswith("expr:"):
        mono = pi.parse_monomial(arg.split(":", 1)[1], spec)
        if pi.monomial_units(mono, spec) != label_units:
            raise DataError("decoder expression does not carry the label units")
        return [mono]
    raise DataError(f"unknown --decoder value {arg!r}")


def _model_summary(model, spec, top=8) -> list:
    order = np.argsort(-np.abs(model.weights))[:top]
    return [
        {"monomial": pi.format_monomial(model.monomials[i], spec), "weight": model.weights[i]}
        for i in order
        if model.weights[i] != 0.0
    ]


def cmd_regress(args, config) -> int:
    spec, label_units = load_spec_file(args.spec)
    train = regress.load_dataset_csv(args.train, spec=spec)
    if label_units is not None and train.label_units != label_units:
        raise DataError("training label units disagree with the spec file")
    test = regress.load_dataset_csv(args.test, spec=spec) if args.test else None
    features = _resolve_features(args.features, spec)
    decoders = _resolve_decoders(args.decoder, spec, train.label_units, args.decoder_max_degree)
    loss_scale = pi.parse_monomial(args.loss_scale, spec) if args.loss_scale else None

    models = []
    noconv = False
    for dec in decoders:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = regress.fit_monomial_model(
                train,
                features,
                dec,
                method=args.method,
                ridge=args.ridge,
                lam=args.lam,
                loss_scale=loss_scale,
                metadata={"seed": args.seed, "train_csv": str(args.train)},
            )
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
            if issubclass(w.category, regress.LassoConvergenceWarning):
                noconv = True
        models.append(model)

    results = {"n_features": len(features), "n_models": len(models), "models": []}
    scale = loss_scale or models[0].decoder
    for model in models:
        entry = {
            "decoder": pi.format_monomial(model.decoder, spec),
            "train_mse": regress.mse(model, train),
            "train_dimensionless_mse": regress.dimensionless_mse(model, train, scale),
            "top_weights": _model_summary(model, spec),
            "metadata": model.metadata,
        }
        if test is not None:
            entry["test_mse"] = regress.mse(model, test)
            entry["test_dimensionless_mse"] = regress.dimensionless_mse(model, test, scale)
            entry["equivariance_residual"] = regress.equivariance_residual(
                model, test.rows[:100], n_group=100, seed=args.seed
            )
        results["models"].append(entry)
        print(
            f"decoder {entry['decoder']}: "
            + ", ".join(f"{k}={v:.3e}" for k, v in entry.items() if k.endswith("mse"))
        )
    if args.model_out:
        regress.save_model(args.model_out, models[0])
    if args.report:
        write_report(args.report, "regress", config, results)
    return EXIT_NOCONV if noconv else EXIT_OK


# ---------------------------------------------------------------------------
# experiments

def _springy_sizes(scale: str):
    if scale == "desk":
        return 2048, 512, 128
    return 8192, 1024, 128


# One fixed draw of dimensional monomials serves as the negative control; the
# degradation it causes is what makes the dimensionless restriction earn its keep.
CONTAMINATION_SEED = 19
N_CONTAMINATION = 500


def run_springy(seed: int, scale: str, out_dir, lam: float = 1e-2) -> dict:
    """Recover the pendulum Hamiltonian from dimensionless monomials: an OLS
    fit on the full training set, a LASSO fit on a small one, and the same
    fits over a feature set polluted with dimensional monomials."""
    n_train, n_test, n_lasso = _springy_sizes(scale)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = sims.sample_pendulum_dataset(n_train + n_test, seed)
    spec = data.spec
    train = regress.Dataset(spec, data.rows[:n_train], data.label_values[:n_train], data.label_units)
    test = regress.Dataset(spec, data.rows[n_train:], data.label_values[n_train:], data.label_units)
    small = regress.Dataset(spec, train.rows[:n_lasso], train.label_values[:n_lasso], data.label_units)

    features = pi.enumerate_monomials(spec, 2, dimensionless_only=True)
    decoder = pi.parse_monomial("k_s L^2", spec)
    ols = regress.fit_monomial_model(train, features, decoder, method="ols",
                                     metadata={"seed": seed, "scale": scale})
    lasso = regress.fit_monomial_model(small, features, decoder, method="lasso", lam=lam,
                                       max_sweeps=20000, metadata={"seed": seed, "scale": scale})

    polluted = features + pi.sample_dimensional_monomials(
        spec, 2, N_CONTAMINATION, seed=CONTAMINATION_SEED
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", regress.RankDeficientWarning)
        ols_bad = regress.fit_monomial_model(train, polluted, decoder, method="ols",
                                             metadata={"seed": seed, "scale": scale})
    lasso_bad = regress.fit_monomial_model(small, polluted, decoder, method="lasso", lam=lam,
                                           max_sweeps=20000, metadata={"seed": seed, "scale": scale})

    ols_mse = regress.dimensionless_mse(ols, test, decoder)
    ols_bad_mse = regress.dimensionless_mse(ols_bad, test, decoder)
    results = {
        "n_features": len(features),
        "decoder": pi.format_monomial(decoder, spec),
        "ols": {
            "n_train": train.n,
            "test_dimensionless_mse": ols_mse,
            "test_mse": regress.mse(ols, test),
            "top_weights": _model_summary(ols, spec),
            "equivariance_residual": regress.equivariance_residual(
                ols, test.rows[:100], n_group=100, seed=seed
            ),
        },
        "lasso": {
            "n_train": small.n,
            "lambda": lam,
            "support_size": int(sum(1 for w in lasso.weights if w != 0.0)),
            "test_dimensionless_mse": regress.dimensionless_mse(lasso, test, decoder),
            "top_weights": _model_summary(lasso, spec),
            "converged": lasso.metadata["converged"],
        },
        "dimensional_control": {
            "n_features": len(polluted),
            "ols_test_dimensionless_mse": ols_bad_mse,
            "ols_degradation": ols_bad_mse / ols_mse,
            "lasso_test_dimensionless_mse": regress.dimensionless_mse(lasso_bad, test, decoder),
            "lasso_support_size": int(sum(1 for w in lasso_bad.weights if w != 0.0)),
        },
    }
    regress.save_dataset_csv(train, out_dir / "train.csv")
    regress.save_dataset_csv(test, out_dir / "test.csv")
    regress.save_model(out_dir / "model_ols.json", ols)
    regress.save_model(out_dir / "model_lasso.json", lasso)
    return results


def run_blackbody(seed: int, scale: str, out_dir) -> dict:
    """Long-wavelength radiance: no dimensionless monomials exist, the
    decoder is unique, and the fit is a single constant."""
    n = 256 if scale == "desk" else 1024
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = sims.blackbody_dataset(n, seed)
    spec = data.spec
    n_train = int(0.8 * n)
    train = regress.Dataset(spec, data.rows[:n_train], data.label_values[:n_train], data.label_units)
    test = regress.Dataset(spec, data.rows[n_train:], data.label_values[n_train:], data.label_units)

    basis = pi.dimensionless_basis(spec)
    decoders = pi.decoder_solutions(spec, data.label_units, 4)
    features = [Monomial.constant(spec.d)] + basis
    models = [
        regress.fit_monomial_model(train, features, dec, method="ols",
                                   metadata={"seed": seed})
        for dec in decoders
    ]
    results = {
        "s": len(basis),
        "n_decoders": len(decoders),
        "decoders": [pi.format_monomial(d, spec) for d in decoders],
        "models": [
            {
                "decoder": pi.format_monomial(m.decoder, spec),
                "constant": m.weights[0],
                "test_mse": regress.mse(m, test),
                "test_dimensionless_mse": regress.dimensionless_mse(m, test, m.decoder),
                "equivariance_residual": regress.equivariance_residual(
                    m, test.rows, n_group=100, seed=seed
                ),
            }
            for m in models
        ],
    }
    regress.save_dataset_csv(train, out_dir / "train.csv")
    regress.save_dataset_csv(test, out_dir / "test.csv")
    regress.save_model(out_dir / "model.json", models[0])
    return results


def _with_inverses(monomials: list[Monomial]) -> list[Monomial]:
    out = []
    for m in monomials:
        out.append(m)
        out.append(Monomial(tuple(-e for e in m.exps)))
    return out


def run_rietkerk(seed: int, scale: str, out_dir, threads: int = 1,
                 n_train: int | None = None, n_test: int | None = None) -> dict:
    """Emulate mean vegetation at the horizon from the model parameters:
    a dimensionless-feature regression against a raw-parameter baseline."""
    grid = sims.GridScale.desk() if scale == "desk" else sims.GridScale.paper()
    if n_train is None:
        n_train = 200 if scale == "desk" else 1000
    if n_test is None:
        n_test = 50 if scale == "desk" else 100
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exp = sims.rietkerk_experiment(n_train, n_test, seed, grid, threads=threads)
    spec = exp.train.spec
    const = Monomial.constant(spec.d)

    table = sims.rietkerk_table_features()
    dimless_feats = [const] + _with_inverses(table)
    decoder = pi.parse_monomial("k2", spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", regress.RankDeficientWarning)
        dimless = regress.fit_monomial_model(
            exp.train, dimless_feats, decoder, method="ols",
            metadata={"seed": seed, "scale": scale},
        )
        raw = [Monomial(tuple(1 if j == i else 0 for j in range(spec.d))) for i in range(spec.d)]
        baseline_feats = [const] + _with_inverses(raw)
        baseline = regress.fit_monomial_model(
            exp.train, baseline_feats, None, method="ols",
            metadata={"seed": seed, "scale": scale},
        )

    results = {
        "metadata": exp.metadata,
        "n_features_dimensionless": len(dimless_feats),
        "n_features_baseline": len(baseline_feats),
        "decoder": pi.format_monomial(decoder, spec),
        "dimensionless": {
            "test_mse": regress.mse(dimless, exp.test),
            "test_pearson": regress.pearson(dimless, exp.test),
            "rank": dimless.metadata["rank"],
            "equivariance_residual": regress.equivariance_residual(
                dimless, exp.test.rows, n_group=100, seed=seed
            ),
        },
        "baseline": {
            "test_mse": regress.mse(baseline, exp.test),
            "test_pearson": regress.pearson(baseline, exp.test),
            "rank": baseline.metadata["rank"],
        },
    }
    regress.save_dataset_csv(exp.train, out_dir / "train.csv")
    regress.save_dataset_csv(exp.test, out_dir / "test.csv")
    regress.save_model(out_dir / "model_dimensionless.json", dimless)
    regress.save_model(out_dir / "model_baseline.json", baseline)
    return results


def cmd_experiment(args, config) -> int:
    out_dir = args.out or f"runs/{args.name}"
    t0 = time.perf_counter()
    if args.name == "springy":
        results = run_springy(args.seed, args.scale, out_dir, lam=args.lam)
    elif args.name == "blackbody":
        results = run_blackbody(args.seed, args.scale, out_dir)
    elif args.name == "rietkerk":
        results = run_rietkerk(args.seed, args.scale, out_dir, threads=args.threads)
    else:
        raise DataError(f"unknown experiment {args.name!r}")
    # report files stay byte-reproducible, so wall time goes to stdout only
    write_report(Path(out_dir) / "report.json", f"experiment {args.name}", config, results)
    print(json.dumps(results, indent=1, default=float))
    print(f"artifacts in {out_dir} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing

_HARD_DEFAULTS = {
    "units-check": {},
    "basis": {"out": None},
    "enumerate": {"max_degree": 2, "dimensionless_only": False, "out": None},
    "regress": {
        "test": None,
        "features": "basis",
        "method": "ols",
        "ridge": 0.0,
        "lam": 0.0,
        "decoder": "auto",
        "decoder_max_degree": 2,
        "loss_scale": None,
        "seed": 0,
        "report": None,
        "model_out": None,
    },
    "experiment": {
        "scale": "desk",
        "seed": 0,
        "out": None,
        "threads": 1,
        "lam": 1e-2,
    },
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pireg",
        description="dimensionless monomial features and units-equivariant regression",
    )
    ap.add_argument("--config", default=None, help="JSON file of per-command flag defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("units-check", help="validate a spec file, print d/k/rank/s")
    p.add_argument("spec")

    p = sub.add_parser("basis", help="print (and save) a dimensionless lattice basis")
    p.add_argument("spec")
    p.add_argument("--out", default=None)

    p = sub.add_parser("enumerate", help="sweep all monomials up to a degree")
    p.add_argument("spec")
    p.add_argument("--max-degree", type=int, default=None)
    p.add_argument("--dimensionless-only", action="store_true", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("regress", help="fit a monomial regression from CSV data")
    p.add_argument("train")
    p.add_argument("--spec", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--features", default=None, help="basis | enumerate:<deg> | file:<path>")
    p.add_argument("--method", choices=["ols", "lasso"], default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--decoder", default=None,
                   help="auto | index:<i> | expr:<monomial> | ensemble")
    p.add_argument("--decoder-max-degree", type=int, default=None)
    p.add_argument("--loss-scale", default=None, help="monomial with label units")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--model-out", default=None)

    p = sub.add_parser("experiment", help="run a canned experiment end to end")
    p.add_argument("name", choices=["springy", "blackbody", "rietkerk"])
    p.add_argument("--scale", choices=["desk", "paper"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)

    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge: explicit flags beat config-file values beat hard defaults.
    Returns the fully resolved per-command config that reports echo."""
    file_cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as e:
            raise DataError(f"cannot read config file: {e}") from None
        except json.JSONDecodeError as e:
            raise DataError(f"config file is not valid JSON: {e}") from None
    section = file_cfg.get(args.command, {})
    resolved = {}
    for key, hard in _HARD_DEFAULTS.get(args.command, {}).items():
        explicit = getattr(args, key, None)
        if explicit is not None:
            resolved[key] = explicit
        elif key in section:
            resolved[key] = section[key]
        elif key.replace("_", "-") in section:
            resolved[key] = section[key.replace("_", "-")]
        else:
            resolved[key] = hard
        setattr(args, key, resolved[key])
    for key in ("spec", "train", "name"):
        if hasattr(args, key):
            resolved[key] = getattr(args, key)
    return resolved


_COMMANDS = {
    "units-check": cmd_units_check,
    "basis": cmd_basis,
    "enumerate": cmd_enumerate,
    "regress": cmd_regress,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return _COMMANDS[args.command](args, config)
    except (UnitError, pi.EnumerationTooLarge) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ArithmeticError, sims.InsufficientSurvivors) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
