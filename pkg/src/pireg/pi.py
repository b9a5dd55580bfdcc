"""Dimensionless monomial features and unit-restoring decoders.

A feature spec fixes d scalar features with integer unit vectors over k base
units.  Monomials are integer exponent vectors alpha; the units of x^alpha
are sum_i alpha_i u_i, so the dimensionless monomials form the integer
nullspace lattice of the d x k units matrix.  That lattice (via Smith normal
form) gives the feature basis; a Diophantine solve in the other direction
gives decoders, monomials carrying prescribed target units, which restore
dimensions to a dimensionless regression output.

Degree convention: degree(alpha) = max_i weight_i * |alpha_i|, with
per-feature weights from the spec (dot-product features are quadratic in the
raw inputs and carry weight 2).  total_degree(alpha) = sum_i |alpha_i| is
exposed separately.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import ScalarFeature
from .intlinalg import IntMatrix, nullspace_basis, smith_normal_form, solve_diophantine
from .units import (
    BaseUnitSystem,
    Quantity,
    UnitVector,
    format_unit,
    parse_unit,
)

SCHEMA_VERSION = 1


class PoleAtZero(ArithmeticError):
    def __init__(self, feature_index, name=None):
        label = f"feature {feature_index}" if name is None else f"feature {name!r}"
        super().__init__(f"negative power of a zero value at {label}")
        self.feature_index = feature_index


class NonFinite(ArithmeticError):
    pass


class EnumerationTooLarge(ValueError):
    def __init__(self, count, cap):
        super().__init__(f"enumeration would sweep {count} candidates (cap {cap})")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class FeatureDef:
    """Value-free descriptor of one scalar feature."""

    name: str
    units: UnitVector
    degree_weight: int = 1
    allow_negative_exponent: bool = True

    def __post_init__(self):
        if self.degree_weight < 1:
            raise ValueError(f"degree weight must be >= 1, got {self.degree_weight}")


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature list plus the base-unit system their units live in."""

    features: tuple[FeatureDef, ...]
    system: BaseUnitSystem

    def __post_init__(self):
        if not self.features:
            raise ValueError("feature spec needs at least one feature")
        seen = set()
        for f in self.features:
            if f.name in seen:
                raise ValueError(f"duplicate feature name: {f.name!r}")
            seen.add(f.name)
            if len(f.units) != self.system.k:
                raise ValueError(
                    f"feature {f.name!r} has a unit vector of length {len(f.units)}, "
                    f"system has {self.system.k} base units"
                )

    @property
    def d(self) -> int:
        return len(self.features)

    @property
    def k(self) -> int:
        return self.system.k

    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def units_matrix(self) -> IntMatrix:
        return IntMatrix([list(f.units.exps) for f in self.features])

    def weights(self) -> tuple[int, ...]:
        return tuple(f.degree_weight for f in self.features)

    @classmethod
    def from_scalar_features(
        cls, feats: Sequence[ScalarFeature], system: BaseUnitSystem
    ) -> "FeatureSpec":
        return cls(
            tuple(
                FeatureDef(f.name, f.units, f.degree_weight, f.allow_negative_exponent)
                for f in feats
            ),
            system,
        )

    def to_json_dict(self) -> dict:
        return {
            "base_units": list(self.system.names),
            "aliases": {
                name: format_unit(vec, BaseUnitSystem(self.system.names))
                for name, vec in self.system.aliases.items()
            },
            "features": [
                {
                    "name": f.name,
                    "units": format_unit(f.units, self.system),
                    "degree_weight": f.degree_weight,
                    "allow_negative_exponent": f.allow_negative_exponent,
                }
                for f in self.features
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeatureSpec":
        base = BaseUnitSystem(tuple(data["base_units"]))
        for name, expr in data.get("aliases", {}).items():
            base = base.with_alias(name, expr)
        feats = []
        for f in data["features"]:
            feats.append(
                FeatureDef(
                    f["name"],
                    parse_unit(f["units"], base),
                    int(f.get("degree_weight", 1)),
                    bool(f.get("allow_negative_exponent", True)),
                )
            )
        return cls(tuple(feats), base)


@dataclass(frozen=True)
class Monomial:
    """coeff * prod_i x_i ** exps_i over a feature spec's feature order."""

    exps: tuple[int, ...]
    coeff: float = 1.0

    @classmethod
    def constant(cls, d: int, coeff: float = 1.0) -> "Monomial":
        return cls((0,) * d, coeff)

    @classmethod
    def zero(cls, d: int) -> "Monomial":
        return cls((0,) * d, 0.0)

    def is_zero(self) -> bool:
        return self.coeff == 0.0


def total_degree(m: Monomial) -> int:
    return sum(abs(e) for e in m.exps)


def degree(m: Monomial, spec: FeatureSpec) -> int:
    return max((w * abs(e) for w, e in zip(spec.weights(), m.exps)), default=0)


def monomial_units(m: Monomial, spec: FeatureSpec) -> UnitVector:
    total = [0] * spec.k
    for e, f in zip(m.exps, spec.features):
        if e:
            for j, u in enumerate(f.units.exps):
                total[j] += e * u
    return UnitVector(tuple(total))


def format_monomial(m: Monomial, spec: FeatureSpec, with_coeff: bool = False) -> str:
    parts = []
    for name, e in zip(spec.names(), m.exps):
        if e == 1:
            parts.append(name)
        elif e != 0:
            parts.append(f"{name}^{e}")
    body = " ".join(parts) if parts else "1"
    if with_coeff:
        return f"{m.coeff:g} * {body}"
    return body


def parse_monomial(expr: str, spec: FeatureSpec) -> Monomial:
    """Parse "k_s L^2" style products over feature names (same grammar as
    unit expressions, names drawn from the spec)."""
    exps = [0] * spec.d
    expr = expr.strip()
    if expr in ("", "1"):
        return Monomial(tuple(exps))
    for token in expr.split():
        name, sep, exp_str = token.partition("^")
        if sep:
            try:
                e = int(exp_str)
            except ValueError:
                raise ValueError(f"malformed exponent in monomial token {token!r}") from None
        else:
            e = 1
        try:
            i = spec.index(name)
        except KeyError:
            raise ValueError(f"unknown feature {name!r} in monomial expression") from None
        exps[i] += e
    return Monomial(tuple(exps))


# ---------------------------------------------------------------------------
# evaluation

def _int_pow(base, n: int):
    """Exponentiation by squaring with an integer power.

    Works elementwise on numpy arrays as well as floats, with the identical
    multiplication sequence, so column-wise and row-wise evaluation of a
    design matrix agree bit for bit.
    """
    if n == 0:
        return base * 0.0 + 1.0
    if n < 0:
        base = 1.0 / base
        n = -n
    result = None
    while True:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if not n:
            return result
        base = base * base


def evaluate_monomial(m: Monomial, x: Sequence[float]) -> float:
    """coeff * prod x_i^e_i; PoleAtZero on 0^negative, NonFinite on overflow."""
    if len(x) != len(m.exps):
        raise ValueError(f"value vector of length {len(x)} vs {len(m.exps)} exponents")
    for i, e in enumerate(m.exps):
        if e < 0 and x[i] == 0.0:
            raise PoleAtZero(i)
    result = m.coeff
    for i, e in enumerate(m.exps):
        if e:
            result = result * _int_pow(float(x[i]), e)
    result = float(result)
    if not math.isfinite(result):
        raise NonFinite(f"monomial evaluation overflowed: exps={m.exps}")
    return result


def evaluate_monomial_rows(m: Monomial, rows: np.ndarray) -> np.ndarray:
    """Vectorized evaluate_monomial over the rows of an (N, d) array.

    Same operation order as the scalar path, so entries match exactly.
    """
    rows = np.asarray(rows, dtype=float)
    for i, e in enumerate(m.exps):
        if e < 0 and np.any(rows[:, i] == 0.0):
            raise PoleAtZero(i)
    result = np.full(rows.shape[0], m.coeff, dtype=float)
    for i, e in enumerate(m.exps):
        if e:
            result = result * _int_pow(rows[:, i], e)
    bad = ~np.isfinite(result)
    if np.any(bad):
        raise NonFinite(
            f"monomial evaluation overflowed at row {int(np.argmax(bad))}: exps={m.exps}"
        )
    return result


# ---------------------------------------------------------------------------
# lattice constructions

def dimensionless_basis(spec: FeatureSpec) -> list[Monomial]:
    """Lattice basis of the dimensionless monomials, unit coefficient each.

    len == d - rank(U).  Deterministic: the Smith decomposition of the units
    matrix is pivoted deterministically and basis vectors are sign-normalized.
    """
    return [Monomial(v) for v in nullspace_basis(spec.units_matrix())]


def _exponent_ranges(spec: FeatureSpec, max_degree: int) -> list[range]:
    ranges = []
    for f in spec.features:
        cap = max_degree // f.degree_weight
        lo = -cap if f.allow_negative_exponent else 0
        ranges.append(range(lo, cap + 1))
    return ranges


def _sweep_count(ranges: Sequence[range]) -> int:
    n = 1
    for r in ranges:
        n *= len(r)
    return n


def _iter_exp_chunks(ranges, chunk_rows: int = 1 << 18):
    """Yield (start_offset, int64 array) chunks of the full product sweep in
    lexicographic order."""
    it = itertools.product(*ranges)
    offset = 0
    while True:
        block = list(itertools.islice(it, chunk_rows))
        if not block:
            return
        yield offset, np.array(block, dtype=np.int64)
        offset += len(block)


def enumerate_monomials(
    spec: FeatureSpec,
    max_degree: int,
    dimensionless_only: bool = False,
    max_candidates: int = 10**8,
) -> list[Monomial]:
    """All monomials with degree(alpha) <= max_degree, honoring each feature's
    sign constraint, in lexicographic exponent order.

    The sweep is the full box prod_i [lo_i, hi_i] with hi_i = max_degree //
    weight_i (lo_i = 0 where negative exponents are disallowed); with
    dimensionless_only the box is filtered to the units-matrix kernel.
    Raises EnumerationTooLarge when the box exceeds max_candidates.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    ranges = _exponent_ranges(spec, max_degree)
    count = _sweep_count(ranges)
    if count > max_candidates:
        raise EnumerationTooLarge(count, max_candidates)
    U = np.array([f.units.exps for f in spec.features], dtype=np.int64)
    out = []
    for _, block in _iter_exp_chunks(ranges):
        if dimensionless_only:
            mask = ~np.any(block @ U, axis=1)
            block = block[mask]
        out.extend(Monomial(tuple(int(e) for e in row)) for row in block)
    return out


def sample_dimensional_monomials(
    spec: FeatureSpec, max_degree: int, n: int, seed: int
) -> list[Monomial]:
    """Draw n distinct monomials with nonzero units, uniformly from the same
    degree box enumerate_monomials sweeps.  Used as contamination controls
    for the dimensionless regressions.
    """
    ranges = _exponent_ranges(spec, max_degree)
    rng = np.random.default_rng(seed)
    U = np.array([f.units.exps for f in spec.features], dtype=np.int64)
    seen: set[tuple[int, ...]] = set()
    out: list[Monomial] = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise ValueError(
                f"could not find {n} distinct dimensional monomials at degree {max_degree}"
            )
        exps = tuple(int(rng.integers(r.start, r.stop)) for r in ranges)
        if exps in seen or not np.any(np.array(exps, dtype=np.int64) @ U):
            continue
        seen.add(exps)
        out.append(Monomial(exps))
    return out


def reynolds_project(m: Monomial, spec: FeatureSpec) -> Monomial:
    """Group-average a monomial: dimensionless monomials are fixed points,
    everything else averages to the zero monomial.  Idempotent by inspection."""
    if monomial_units(m, spec).is_zero():
        return m
    return Monomial.zero(spec.d)


def decoder_solutions(
    spec: FeatureSpec,
    target_units: UnitVector,
    max_degree: int,
    max_candidates: int = 10**8,
) -> list[Monomial]:
    """All monomials with the given target units and degree <= max_degree,
    sorted by (degree, total_degree, exponent tuple).

    Empty when no integer solution exists at all (Diophantine infeasibility,
    checked first) or none lands inside the degree ball.
    """
    if len(target_units) != spec.k:
        raise ValueError("target units live in a different base system")
    U = spec.units_matrix()
    if solve_diophantine(U, target_units.exps) is None:
        return []
    ranges = _exponent_ranges(spec, max_degree)
    count = _sweep_count(ranges)
    if count > max_candidates:
        raise EnumerationTooLarge(count, max_candidates)
    Ua = np.array([f.units.exps for f in spec.features], dtype=np.int64)
    target = np.array(target_units.exps, dtype=np.int64)
    hits = []
    for _, block in _iter_exp_chunks(ranges):
        mask = np.all(block @ Ua == target, axis=1)
        hits.extend(Monomial(tuple(int(e) for e in row)) for row in block[mask])
    hits.sort(key=lambda mm: (degree(mm, spec), total_degree(mm), mm.exps))
    return hits


def apply_decoder(
    decoder: Monomial, x: Sequence[float], eta: float, spec: FeatureSpec
) -> Quantity:
    """Restore units: eta_hat * decoder(x) as a Quantity with the decoder's units."""
    return Quantity(eta * evaluate_monomial(decoder, x), monomial_units(decoder, spec))


# ---------------------------------------------------------------------------
# serialization

def monomial_to_json_dict(m: Monomial, spec: FeatureSpec) -> dict:
    return {
        "exps": list(m.exps),
        "coeff": m.coeff,
        "degree": degree(m, spec),
        "units": list(monomial_units(m, spec).exps),
    }


def monomial_from_json_dict(data: dict, spec: FeatureSpec) -> Monomial:
    m = Monomial(tuple(int(e) for e in data["exps"]), float(data.get("coeff", 1.0)))
    if len(m.exps) != spec.d:
        raise ValueError(f"monomial has {len(m.exps)} exponents, spec has {spec.d} features")
    if "units" in data:
        stored = UnitVector(tuple(int(u) for u in data["units"]))
        actual = monomial_units(m, spec)
        if stored != actual:
            raise ValueError(
                f"stored units {stored.exps} disagree with computed units {actual.exps}"
            )
    return m


def save_monomials(path, monomials: Iterable[Monomial], spec: FeatureSpec) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "feature_names": spec.names(),
        "monomials": [monomial_to_json_dict(m, spec) for m in monomials],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_monomials(path, spec: FeatureSpec) -> list[Monomial]:
    with open(path) as fh:
        payload = json.load(fh)
    return [monomial_from_json_dict(d, spec) for d in payload["monomials"]]
