"""Datasets, design matrices, and the two regression fits (OLS, LASSO).

A model is trained in dimensionless space: with decoder D(x) carrying the
label units, the target per row is eta_t = y_t / D(x_t) and predictions are
y_hat = D(x) * eta_hat(x).  Because every regression feature is a
dimensionless monomial and the decoder rescales exactly like the label, a
unit change of the inputs rescales predictions by exactly the group factor,
with no retraining.  A model with decoder None is a deliberately
non-equivariant direct fit on the dimensional label; the Rietkerk baseline
uses it.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pi import (
    FeatureDef,
    FeatureSpec,
    Monomial,
    SCHEMA_VERSION,
    evaluate_monomial_rows,
    monomial_from_json_dict,
    monomial_to_json_dict,
    monomial_units,
)
from .units import (
    GroupElement,
    Quantity,
    UnitVector,
    UnitMismatch,
    format_unit,
    parse_unit,
    scale_factor,
)


class RankDeficientWarning(UserWarning):
    pass


class LassoConvergenceWarning(UserWarning):
    pass


class EmptyEnsemble(ValueError):
    pass


class ZeroScale(ZeroDivisionError):
    pass


class BothZero(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Dataset:
    """N rows of d feature values plus N labels sharing one unit vector."""

    spec: FeatureSpec
    rows: np.ndarray
    label_values: np.ndarray
    label_units: UnitVector

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.label_values, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != self.spec.d:
            raise ValueError(f"rows must be (N, {self.spec.d}), got {rows.shape}")
        if labels.shape != (rows.shape[0],):
            raise ValueError("one label per row required")
        if len(self.label_units) != self.spec.k:
            raise UnitMismatch(self.label_units, self.spec.system.names, "label units")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "label_values", labels)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_quantities(cls, spec, rows, labels: Sequence[Quantity]) -> "Dataset":
        if not labels:
            raise ValueError("empty label list")
        units = labels[0].units
        for q in labels:
            if q.units != units:
                raise UnitMismatch(units, q.units, "dataset labels")
        return cls(spec, np.asarray(rows, float), np.array([q.value for q in labels]), units)

    def labels(self) -> list[Quantity]:
        return [Quantity(float(v), self.label_units) for v in self.label_values]


def save_dataset_csv(data: Dataset, path) -> None:
    """Two-line header: feature names + "label", then one unit expression per
    column; float values below."""
    sys_ = data.spec.system
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(data.spec.names() + ["label"])
        w.writerow(
            [format_unit(f.units, sys_) for f in data.spec.features]
            + [format_unit(data.label_units, sys_)]
        )
        for row, y in zip(data.rows, data.label_values):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def load_dataset_csv(path, spec: FeatureSpec | None = None, system=None) -> Dataset:
    """Load a two-line-header CSV.  With a spec, names and units are checked
    against it; otherwise a default spec (weight 1, negatives allowed) is
    built from the header and `system` must be given."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            names = next(r)
            unit_row = next(r)
        except StopIteration:
            raise ValueError(f"{path}: missing the two header lines") from None
        if len(unit_row) != len(names):
            raise ValueError(f"{path}: header rows disagree in length")
        if not names or names[-1] != "label":
            raise ValueError(f"{path}: last column must be named `label`")
        body = [row for row in r if row]
    feature_names = names[:-1]
    if spec is not None:
        sys_ = spec.system
        if feature_names != spec.names():
            raise ValueError(
                f"{path}: feature columns {feature_names} do not match spec {spec.names()}"
            )
    else:
        if system is None:
            raise ValueError("need a spec or a base-unit system to load a dataset")
        sys_ = system
    units = [parse_unit(expr, sys_) for expr in unit_row]
    if spec is not None:
        for f, u in zip(spec.features, units[:-1]):
            if f.units != u:
                raise UnitMismatch(f.units, u, f"column {f.name!r}")
    else:
        spec = FeatureSpec(
            tuple(FeatureDef(n, u) for n, u in zip(feature_names, units[:-1])), sys_
        )
    values = np.array([[float(v) for v in row] for row in body], dtype=float)
    if values.size == 0:
        raise ValueError(f"{path}: no data rows")
    if values.shape[1] != len(names):
        raise ValueError(f"{path}: data width disagrees with header")
    return Dataset(spec, values[:, :-1], values[:, -1], units[-1])


def build_design_matrix(rows, monomials: Sequence[Monomial]) -> np.ndarray:
    """(N, p) matrix with X[t, j] = evaluate_monomial(monomials[j], rows[t])."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("rows must be 2-D")
    cols = [evaluate_monomial_rows(m, rows) for m in monomials]
    if not cols:
        return np.empty((rows.shape[0], 0))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# fits

@dataclass
class OlsFit:
    weights: np.ndarray
    rank: int
    rank_deficient: bool


def fit_ols(X: np.ndarray, y: np.ndarray, ridge: float = 0.0) -> OlsFit:
    """Least squares via orthogonal factorization (SVD), never normal equations.

    ridge > 0 solves the augmented stacked system, which is full rank by
    construction.  At ridge 0 the columns are equilibrated to unit norm
    first (monomial columns span many orders of magnitude); if that solve
    reports rank < p, the unequilibrated problem is re-solved so the
    returned solution is minimum-norm in the original weight scale, and a
    RankDeficientWarning reports the effective rank.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("label vector length mismatch")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge > 0:
        X_aug = np.vstack([X, np.sqrt(ridge) * np.eye(p)])
        y_aug = np.concatenate([y, np.zeros(p)])
        w, _, rank_, _ = np.linalg.lstsq(X_aug, y_aug, rcond=None)
        return OlsFit(w, int(rank_), False)
    norms = np.sqrt((X * X).sum(axis=0))
    norms[norms == 0.0] = 1.0
    z, _, rank_, _ = np.linalg.lstsq(X / norms, y, rcond=None)
    if rank_ < p:
        w, _, rank_, _ = np.linalg.lstsq(X, y, rcond=None)
        warnings.warn(
            f"design matrix is rank deficient: rank {int(rank_)} < {p} columns; "
            "returning the minimum-norm solution",
            RankDeficientWarning,
        )
        return OlsFit(w, int(rank_), True)
    return OlsFit(z / norms, int(rank_), False)


@dataclass
class LassoFit:
    weights: np.ndarray
    intercept: float
    converged: bool
    sweeps: int
    objectives: list[float]


def soft_threshold(rho: float, lam: float) -> float:
    if rho > lam:
        return rho - lam
    if rho < -lam:
        return rho + lam
    return 0.0


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda at which every penalized weight is exactly zero,
    computed on the internally standardized problem."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    sd = X.std(axis=0)
    live = sd > 0.0
    Xs = (X[:, live] - X[:, live].mean(axis=0)) / sd[live]
    yc = y - y.mean()
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(Xs.T @ yc)) / len(y))


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_sweeps: int = 1000,
    tol: float = 1e-10,
) -> LassoFit:
    """Cyclic coordinate descent on (1/2N)||Xw - y||^2 + lam * ||w||_1.

    Columns are standardized internally (zero mean, unit variance); constant
    columns are exempt and unpenalized: the fitted intercept is folded into
    the first constant column's weight when one exists, otherwise reported
    in `intercept`.  Weights come back in the original column scale.  Each
    coordinate update is the closed-form soft threshold, so the recorded
    per-sweep objective (standardized scale) never increases.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("label vector length mismatch")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = np.flatnonzero(sd > 0.0)
    const_cols = np.flatnonzero(sd == 0.0)
    Xs = (X[:, live] - mu[live]) / sd[live]
    y_mean = float(y.mean())
    r = y - y_mean
    w_std = np.zeros(len(live))
    objectives = []
    converged = False
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_step = 0.0
        for idx in range(len(live)):
            old = w_std[idx]
            rho = float(Xs[:, idx] @ r) / n + old
            new = soft_threshold(rho, lam)
            if new != old:
                r -= (new - old) * Xs[:, idx]
                w_std[idx] = new
                step = abs(new - old)
                if step > max_step:
                    max_step = step
        objectives.append(float(r @ r) / (2 * n) + lam * float(np.abs(w_std).sum()))
        if max_step <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"coordinate descent did not converge within {max_sweeps} sweeps "
            f"(last objective {objectives[-1]:.3e})",
            LassoConvergenceWarning,
        )
    weights = np.zeros(p)
    weights[live] = w_std / sd[live]
    intercept = y_mean - float((w_std * (mu[live] / sd[live])).sum())
    folded = 0.0
    for j in const_cols:
        cval = mu[j]
        if cval != 0.0:
            weights[j] = intercept / cval
            folded = intercept
            break
    return LassoFit(weights, intercept - folded, converged, sweeps, objectives)


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class RegressionModel:
    """Monomial features, their weights, and the unit-restoring decoder.

    decoder None means the model was fit directly on the dimensional label
    (no unit restoration; not equivariant).  Otherwise the decoder's units
    must equal the label units.
    """

    spec: FeatureSpec
    monomials: tuple[Monomial, ...]
    weights: tuple[float, ...]
    decoder: Monomial | None
    label_units: UnitVector
    intercept: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.monomials) != len(self.weights):
            raise ValueError("one weight per monomial required")
        if self.decoder is not None:
            dec_units = monomial_units(self.decoder, self.spec)
            if dec_units != self.label_units:
                raise UnitMismatch(dec_units, self.label_units, "decoder units")


def predict_rows(model: RegressionModel, rows) -> np.ndarray:
    """Predicted label values for an (N, d) array of feature rows."""
    rows = np.asarray(rows, dtype=float)
    X = build_design_matrix(rows, model.monomials)
    eta = X @ np.asarray(model.weights, dtype=float) + model.intercept
    if model.decoder is None:
        return eta
    return eta * evaluate_monomial_rows(model.decoder, rows)


def predict(model: RegressionModel, x) -> Quantity:
    value = predict_rows(model, np.asarray(x, dtype=float)[None, :])[0]
    return Quantity(float(value), model.label_units)


def ensemble_predict(models: Sequence[RegressionModel], x, combine: str = "mean") -> Quantity:
    """Combine predictions of several models sharing label units (unweighted
    mean by default, median behind the flag)."""
    if not models:
        raise EmptyEnsemble("no models to combine")
    units = models[0].label_units
    for m in models[1:]:
        if m.label_units != units:
            raise UnitMismatch(units, m.label_units, "ensemble members")
    values = [predict(m, x).value for m in models]
    if combine == "mean":
        return Quantity(float(np.mean(values)), units)
    if combine == "median":
        return Quantity(float(np.median(values)), units)
    raise ValueError(f"unknown combine mode {combine!r}")


# ---------------------------------------------------------------------------
# losses and error metrics

def dimensionless_loss(pred: Quantity, label: Quantity, scale: Quantity) -> float:
    """((pred - label) / scale)^2; all three unit vectors must agree."""
    if pred.units != label.units:
        raise UnitMismatch(pred.units, label.units, "prediction and label")
    if scale.units != label.units:
        raise UnitMismatch(scale.units, label.units, "scale and label")
    if scale.value == 0.0:
        raise ZeroScale("loss scale evaluated to zero")
    ratio = (pred.value - label.value) / scale.value
    return ratio * ratio


def state_relative_error(pred, truth) -> float:
    """||pred - truth|| / (||pred|| + ||truth||) with Euclidean norms over
    state vectors; 0 for a perfect nonzero match, 1 when pred = -truth."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"state vectors of different length: {pred.shape} vs {truth.shape}")
    denom = float(np.linalg.norm(pred) + np.linalg.norm(truth))
    if denom == 0.0:
        raise BothZero("both prediction and truth are zero vectors")
    return float(np.linalg.norm(pred - truth)) / denom


# ---------------------------------------------------------------------------
# training driver

def fit_monomial_model(
    data: Dataset,
    monomials: Sequence[Monomial],
    decoder: Monomial | None,
    method: str = "ols",
    ridge: float = 0.0,
    lam: float = 0.0,
    loss_scale: Monomial | None = None,
    max_sweeps: int = 1000,
    metadata: dict | None = None,
) -> RegressionModel:
    """Fit weights over monomial features, training in dimensionless space.

    With a decoder D the target is eta_t = y_t / D(x_t); a loss_scale
    monomial S (same units as the label, default S = D) turns the objective
    into sum_t ((y_hat_t - y_t)/S(x_t))^2 via row weights D_t/S_t.  Without
    a decoder the fit is direct on the dimensional label (loss_scale, when
    given, again weights rows).
    """
    X = build_design_matrix(data.rows, monomials)
    if decoder is not None:
        dec_units = monomial_units(decoder, data.spec)
        if dec_units != data.label_units:
            raise UnitMismatch(dec_units, data.label_units, "decoder units")
        dvals = evaluate_monomial_rows(decoder, data.rows)
        if np.any(dvals == 0.0):
            raise ZeroScale("decoder evaluated to zero on a training row")
        eta = data.label_values / dvals
    else:
        dvals = np.ones(data.n)
        eta = data.label_values.copy()
    if loss_scale is not None:
        s_units = monomial_units(loss_scale, data.spec)
        if s_units != data.label_units:
            raise UnitMismatch(s_units, data.label_units, "loss scale units")
        svals = evaluate_monomial_rows(loss_scale, data.rows)
        if np.any(svals == 0.0):
            raise ZeroScale("loss scale evaluated to zero on a training row")
        rw = dvals / svals
        X = X * rw[:, None]
        eta = eta * rw
    meta = dict(metadata or {})
    meta.update({"method": method, "n_train": data.n})
    intercept = 0.0
    if method == "ols":
        fit = fit_ols(X, eta, ridge=ridge)
        weights = fit.weights
        meta.update({"ridge": ridge, "rank": fit.rank, "rank_deficient": fit.rank_deficient})
    elif method == "lasso":
        fit = fit_lasso(X, eta, lam, max_sweeps=max_sweeps)
        weights = fit.weights
        intercept = fit.intercept
        meta.update({"lambda": lam, "converged": fit.converged, "sweeps": fit.sweeps})
    else:
        raise ValueError(f"unknown method {method!r}")
    return RegressionModel(
        data.spec,
        tuple(monomials),
        tuple(float(w) for w in weights),
        decoder,
        data.label_units,
        intercept,
        meta,
    )


def mse(model: RegressionModel, data: Dataset) -> float:
    resid = predict_rows(model, data.rows) - data.label_values
    return float(np.mean(resid * resid))


def dimensionless_mse(model: RegressionModel, data: Dataset, scale: Monomial) -> float:
    """Mean of ((pred - label)/S(x))^2 over the dataset."""
    s_units = monomial_units(scale, data.spec)
    if s_units != data.label_units:
        raise UnitMismatch(s_units, data.label_units, "loss scale units")
    svals = evaluate_monomial_rows(scale, data.rows)
    if np.any(svals == 0.0):
        raise ZeroScale("loss scale evaluated to zero")
    resid = (predict_rows(model, data.rows) - data.label_values) / svals
    return float(np.mean(resid * resid))


def pearson(model: RegressionModel, data: Dataset) -> float:
    pred = predict_rows(model, data.rows)
    truth = data.label_values
    pc = np.corrcoef(pred, truth)
    return float(pc[0, 1])


def equivariance_residual(
    model: RegressionModel,
    rows,
    n_group: int = 100,
    seed: int = 0,
    low: float = 0.1,
    high: float = 10.0,
) -> float:
    """Max relative deviation of predict(g.x) vs g.predict(x) over random
    group elements; 0 up to float roundoff for any decoder-backed model."""
    rows = np.asarray(rows, dtype=float)
    rng = np.random.default_rng(seed)
    U = np.array([f.units.exps for f in model.spec.features], dtype=float)
    v = np.array(model.label_units.exps, dtype=float)
    base = predict_rows(model, rows)
    worst = 0.0
    for _ in range(n_group):
        g = rng.uniform(low, high, size=model.spec.k)
        feat_scale = np.prod(g[None, :] ** (-U), axis=1)
        label_scale = float(np.prod(g ** (-v)))
        lhs = predict_rows(model, rows * feat_scale[None, :])
        rhs = base * label_scale
        denom = np.maximum(np.abs(lhs) + np.abs(rhs), 1e-300)
        dev = float(np.max(np.abs(lhs - rhs) / denom))
        if dev > worst:
            worst = dev
    return worst


def rescale_rows(g: GroupElement, rows, spec: FeatureSpec) -> np.ndarray:
    """Apply a group element to every feature column of an (N, d) array."""
    rows = np.asarray(rows, dtype=float)
    factors = np.array([scale_factor(g, f.units) for f in spec.features])
    return rows * factors[None, :]


# ---------------------------------------------------------------------------
# model serialization

def model_to_json_dict(model: RegressionModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "feature_spec": model.spec.to_json_dict(),
        "label_units": list(model.label_units.exps),
        "monomials": [monomial_to_json_dict(m, model.spec) for m in model.monomials],
        "weights": list(model.weights),
        "decoder": (
            monomial_to_json_dict(model.decoder, model.spec)
            if model.decoder is not None
            else None
        ),
        "intercept": model.intercept,
        "metadata": model.metadata,
    }


def model_from_json_dict(data: dict) -> RegressionModel:
    spec = FeatureSpec.from_json_dict(data["feature_spec"])
    monomials = tuple(monomial_from_json_dict(d, spec) for d in data["monomials"])
    decoder = (
        monomial_from_json_dict(data["decoder"], spec)
        if data.get("decoder") is not None
        else None
    )
    return RegressionModel(
        spec,
        monomials,
        tuple(float(w) for w in data["weights"]),
        decoder,
        UnitVector(tuple(int(u) for u in data["label_units"])),
        float(data.get("intercept", 0.0)),
        dict(data.get("metadata", {})),
    )


def save_model(path, model: RegressionModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json_dict(model), fh, indent=1)


def load_model(path) -> RegressionModel:
    with open(path) as fh:
        return model_from_json_dict(json.load(fh))
