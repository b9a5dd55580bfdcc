"""Experiment fixtures: springy-pendulum sampling, the Rietkerk vegetation
PDE, the black-body feature set, and double-pendulum unit checklists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path

import numpy as np

from .geometry import ScalarizeRules, VectorFeature, scalarize
from .pi import FeatureDef, FeatureSpec, Monomial, monomial_units, parse_monomial
from .regress import Dataset
from .units import BaseUnitSystem, Quantity, UnitVector, parse_unit, si_system


class NonPositiveMass(ValueError):
    pass


class NumericalBlowup(ArithmeticError):
    def __init__(self, step):
        super().__init__(f"integration blew up at step {step}")
        self.step = step


class InsufficientSurvivors(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# springy pendulum

MECH_SYSTEM = si_system(("kg", "m", "s"))
ENERGY_UNITS = parse_unit("J", MECH_SYSTEM)


def hamiltonian(m: float, k_s: float, L: float, g, p, q) -> float:
    """H = |p|^2/(2m) + k_s(|q| - L)^2/2 - m g.q for a point bob on a spring
    anchored at the origin, gravity passed as the acceleration vector."""
    if m <= 0:
        raise NonPositiveMass(f"mass must be positive, got {m}")
    g = np.asarray(g, float)
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    stretch = np.sqrt(q @ q) - L
    return float(0.5 * (p @ p) / m + 0.5 * k_s * stretch * stretch - m * (g @ q))


@dataclass(frozen=True)
class PendulumRanges:
    scalar_low: float = 1.0
    scalar_high: float = 2.0
    mag_low: float = 0.5
    mag_high: float = 1.5


def pendulum_spec() -> FeatureSpec:
    """The committed 9-feature pendulum configuration.

    Feature order: m, k_s, L, |g|, |p|, |q|, g.p, g.q, p.q.  Dots carry
    degree weight 2.  Negative exponents are allowed on everything except
    the g.p and p.q dots; g.q admits them (the bob hangs below the pivot,
    so that inner product stays away from zero, while g.p and p.q swing
    through zero along any trajectory).  Under these ranges a degree-2 sweep
    yields 187,500 monomials, 286 of them dimensionless.
    """
    acc = parse_unit("m s^-2", MECH_SYSTEM)
    mom = parse_unit("kg m s^-1", MECH_SYSTEM)
    pos = parse_unit("m", MECH_SYSTEM)
    scalars = [
        ("m", Quantity(1.0, parse_unit("kg", MECH_SYSTEM))),
        ("k_s", Quantity(1.0, parse_unit("kg s^-2", MECH_SYSTEM))),
        ("L", Quantity(1.0, pos)),
    ]
    vectors = [
        VectorFeature("g", (0.0, 0.0, -1.0), acc),
        VectorFeature("p", (0.0, 0.0, 1.0), mom),
        VectorFeature("q", (0.0, 0.0, 1.0), pos),
    ]
    rules = ScalarizeRules(negative_exponent_overrides={"g.q": True})
    feats = scalarize(scalars, vectors, rules)
    return FeatureSpec.from_scalar_features(feats, MECH_SYSTEM)


def _random_directions(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def sample_pendulum_dataset(
    n: int, seed: int, ranges: PendulumRanges = PendulumRanges()
) -> Dataset:
    """Draw pendulum configurations and label them with exact Hamiltonians.

    m, k_s, L ~ Unif(scalar range); |g|, |p|, |q| magnitudes ~ Unif(mag
    range) with isotropic directions from normalized Gaussian triples.
    """
    rng = np.random.default_rng(seed)
    m = rng.uniform(ranges.scalar_low, ranges.scalar_high, n)
    k_s = rng.uniform(ranges.scalar_low, ranges.scalar_high, n)
    L = rng.uniform(ranges.scalar_low, ranges.scalar_high, n)
    mags = rng.uniform(ranges.mag_low, ranges.mag_high, (n, 3))
    g = mags[:, 0:1] * _random_directions(rng, n)
    p = mags[:, 1:2] * _random_directions(rng, n)
    q = mags[:, 2:3] * _random_directions(rng, n)

    norm_g = np.linalg.norm(g, axis=1)
    norm_p = np.linalg.norm(p, axis=1)
    norm_q = np.linalg.norm(q, axis=1)
    gp = np.einsum("ij,ij->i", g, p)
    gq = np.einsum("ij,ij->i", g, q)
    pq = np.einsum("ij,ij->i", p, q)
    rows = np.column_stack([m, k_s, L, norm_g, norm_p, norm_q, gp, gq, pq])

    stretch = norm_q - L
    labels = 0.5 * np.einsum("ij,ij->i", p, p) / m + 0.5 * k_s * stretch**2 - m * gq
    return Dataset(pendulum_spec(), rows, labels, ENERGY_UNITS)


# ---------------------------------------------------------------------------
# Rietkerk vegetation model

RIETKERK_SYSTEM = BaseUnitSystem(("l", "g", "d", "m"))

_RIETKERK_FIELDS = [
    # (name, default, unit expression)
    ("R", 0.375, "l d^-1 m^-2"),
    ("alpha", 0.2, "d^-1"),
    ("k2", 5.0, "g m^-2"),
    ("W0", 0.1, "1"),
    ("D_u", 100.0, "m^2 d^-1"),
    ("g_m", 0.05, "l g^-1 d^-1"),
    ("k1", 5.0, "l m^-2"),
    ("delta_w", 0.2, "d^-1"),
    ("D_w", 0.1, "m^2 d^-1"),
    ("c", 20.0, "g l^-1"),
    ("delta_v", 0.25, "d^-1"),
    ("D_v", 0.1, "m^2 d^-1"),
    ("T", 200.0, "d"),
    ("dt", 0.005, "d"),
    ("L", 200.0, "m"),
    ("dl", 2.0, "m"),
]

# the first 12 vary between runs; T, dt, L, dl are integration parameters
_N_PHYSICAL = 12

VEGETATION_UNITS = parse_unit("g m^-2", RIETKERK_SYSTEM)


@dataclass(frozen=True)
class RietkerkParams:
    """All 16 model and integration parameters, in the units of
    rietkerk_spec(): surface water u and soil water w in l m^-2, plant
    biomass v in g m^-2, time in days, space in meters."""

    R: float = 0.375
    alpha: float = 0.2
    k2: float = 5.0
    W0: float = 0.1
    D_u: float = 100.0
    g_m: float = 0.05
    k1: float = 5.0
    delta_w: float = 0.2
    D_w: float = 0.1
    c: float = 20.0
    delta_v: float = 0.25
    D_v: float = 0.1
    T: float = 200.0
    dt: float = 0.005
    L: float = 200.0
    dl: float = 2.0

    def feature_row(self) -> list[float]:
        return [getattr(self, name) for name, _, _ in _RIETKERK_FIELDS]


def rietkerk_spec() -> FeatureSpec:
    """16 features over base units (l, g, d, m): liters of water, grams of
    biomass, days, meters.  d=16, k=4, rank 4, so the dimensionless lattice
    has 12 dimensions."""
    feats = tuple(
        FeatureDef(name, parse_unit(expr, RIETKERK_SYSTEM))
        for name, _, expr in _RIETKERK_FIELDS
    )
    return FeatureSpec(feats, RIETKERK_SYSTEM)


def rietkerk_table_features() -> list[Monomial]:
    """The 12 dimensionless parameter combinations used by the emulation
    regression (each checks to zero units; together they span the lattice)."""
    spec = rietkerk_spec()
    exprs = [
        "c alpha^-1 g_m",
        "R^-1 alpha k1",
        "R^-1 c^-1 alpha k2",
        "alpha^-1 delta_w",
        "alpha^-1 delta_v",
        "W0",
        "alpha^-1 D_v L^-2",
        "alpha^-1 D_u L^-2",
        "alpha T",
        "alpha dt",
        "alpha^-1 D_w L^-2",
        "L^-1 dl",
    ]
    out = []
    for expr in exprs:
        mono = parse_monomial(expr, spec)
        if not monomial_units(mono, spec).is_zero():
            raise AssertionError(f"table feature {expr!r} is not dimensionless")
        out.append(mono)
    return out


@dataclass
class RietkerkState:
    """Field state on an n x n periodic grid with spacing dl, at time t."""

    u: np.ndarray
    w: np.ndarray
    v: np.ndarray
    dl: float
    t: float = 0.0


@dataclass
class RietkerkRun:
    state: RietkerkState
    steps: int
    extinction_step: int | None

    @property
    def extinct(self) -> bool:
        return self.extinction_step is not None


def random_rietkerk_state(n_cells: int, dl: float, rng) -> RietkerkState:
    """u and w uniform on (0, 5) per cell; vegetation seeded at Unif(0, 50)
    on a random 10% of cells, zero elsewhere."""
    u = rng.uniform(0.0, 5.0, (n_cells, n_cells))
    w = rng.uniform(0.0, 5.0, (n_cells, n_cells))
    v = np.zeros((n_cells, n_cells))
    n_seed = max(1, int(round(0.1 * n_cells * n_cells)))
    idx = rng.choice(n_cells * n_cells, size=n_seed, replace=False)
    v.flat[idx] = rng.uniform(0.0, 50.0, n_seed)
    return RietkerkState(u, w, v, dl)


def _laplacian(f: np.ndarray, inv_dl2: float) -> np.ndarray:
    lap = np.roll(f, 1, 0)
    lap += np.roll(f, -1, 0)
    lap += np.roll(f, 1, 1)
    lap += np.roll(f, -1, 1)
    lap -= 4.0 * f
    return lap * inv_dl2


def integrate_rietkerk(
    params: RietkerkParams,
    init: RietkerkState | None = None,
    seed: int | None = None,
    n_cells: int | None = None,
    extinction_threshold: float = 1e-3,
    stop_on_extinction: bool = False,
) -> RietkerkRun:
    """Explicit Euler with a 5-point periodic Laplacian, T/dt steps.

    When init is omitted it is drawn by random_rietkerk_state from `seed`
    (n_cells then defaults to L/dl).  Extinction (mean vegetation below the
    threshold, in g m^-2) is a labeled outcome, not an error; blowup (NaN,
    infinity, or negativity beyond the -1e-9 Euler undershoot allowance) is.
    """
    if init is None:
        if seed is None:
            raise ValueError("need an initial state or a seed to draw one")
        if n_cells is None:
            n_cells = int(round(params.L / params.dl))
        init = random_rietkerk_state(n_cells, params.dl, np.random.default_rng(seed))
    u = init.u.astype(float).copy()
    w = init.w.astype(float).copy()
    v = init.v.astype(float).copy()
    inv_dl2 = 1.0 / (init.dl * init.dl)
    dt = params.dt
    n_steps = int(round(params.T / dt))
    extinction_step = None
    for step in range(n_steps):
        infil = params.alpha * u * (v + params.k2 * params.W0) / (v + params.k2)
        uptake = params.g_m * v * w / (params.k1 + w)
        u += dt * (params.R - infil + params.D_u * _laplacian(u, inv_dl2))
        w += dt * (infil - uptake - params.delta_w * w + params.D_w * _laplacian(w, inv_dl2))
        v += dt * (params.c * uptake - params.delta_v * v + params.D_v * _laplacian(v, inv_dl2))
        low = min(u.min(), w.min(), v.min())
        if not (low >= -1e-9):  # also catches NaN
            raise NumericalBlowup(step)
        if extinction_step is None and v.mean() < extinction_threshold:
            extinction_step = step
            if stop_on_extinction:
                return RietkerkRun(
                    RietkerkState(u, w, v, init.dl, (step + 1) * dt), step + 1, extinction_step
                )
    return RietkerkRun(
        RietkerkState(u, w, v, init.dl, n_steps * dt), n_steps, extinction_step
    )


def mean_vegetation(state: RietkerkState) -> Quantity:
    return Quantity(float(state.v.mean()), VEGETATION_UNITS)


def save_state(state: RietkerkState, path) -> None:
    """Dump the three fields as one flat little-endian float64 binary next to
    a JSON shape descriptor at `path` + ".json"."""
    path = Path(path)
    stacked = np.stack([state.u, state.w, state.v]).astype("<f8")
    path.write_bytes(stacked.tobytes())
    descriptor = {
        "fields": ["u", "w", "v"],
        "shape": list(state.u.shape),
        "dtype": "<f8",
        "dl": state.dl,
        "t": state.t,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(descriptor, fh, indent=1)


def load_state(path) -> RietkerkState:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        desc = json.load(fh)
    shape = tuple(desc["shape"])
    raw = np.frombuffer(path.read_bytes(), dtype=desc["dtype"])
    fields = raw.reshape((len(desc["fields"]),) + shape)
    named = dict(zip(desc["fields"], fields))
    return RietkerkState(
        named["u"].copy(), named["w"].copy(), named["v"].copy(),
        desc["dl"], desc["t"],
    )


@dataclass(frozen=True)
class GridScale:
    """Grid extent and horizon; cell size and time step stay at the defaults."""

    n_cells: int = 100
    total_time: float = 200.0

    @classmethod
    def desk(cls) -> "GridScale":
        return cls(n_cells=50, total_time=50.0)

    @classmethod
    def paper(cls) -> "GridScale":
        return cls()


def _rietkerk_single_run(args):
    seed, run_idx, scale = args
    rng = np.random.default_rng((seed, run_idx))
    factors = rng.uniform(0.5, 1.5, _N_PHYSICAL)
    defaults = RietkerkParams()
    values = {
        name: getattr(defaults, name) * factors[i]
        for i, (name, _, _) in enumerate(_RIETKERK_FIELDS[:_N_PHYSICAL])
    }
    params = RietkerkParams(
        **values,
        T=scale.total_time,
        dt=defaults.dt,
        L=scale.n_cells * defaults.dl,
        dl=defaults.dl,
    )
    init = random_rietkerk_state(scale.n_cells, params.dl, rng)
    run = integrate_rietkerk(params, init, stop_on_extinction=True)
    label = float(run.state.v.mean())
    return run_idx, params.feature_row(), label, run.extinct


@dataclass
class RietkerkExperiment:
    train: Dataset
    test: Dataset
    metadata: dict


def rietkerk_experiment(
    n_train: int,
    n_test: int,
    seed: int,
    scale: GridScale = GridScale(),
    max_runs: int | None = None,
    threads: int = 1,
) -> RietkerkExperiment:
    """Sample parameter draws (each physical parameter Unif(0.5x, 1.5x) its
    default; integration parameters fixed by the scale), integrate each, and
    label with mean vegetation at the horizon.

    Extinct runs are excluded from both splits and counted in the metadata.
    Runs are consumed in index order (train first, then test), so results are
    deterministic in `seed` regardless of thread count.  Raises
    InsufficientSurvivors if max_runs (default 3x the requested total)
    integrations cannot fill both splits.
    """
    want = n_train + n_test
    if max_runs is None:
        max_runs = 3 * want
    spec = rietkerk_spec()
    jobs = [(seed, i, scale) for i in range(max_runs)]
    rows, labels = [], []
    n_extinct = 0
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_rietkerk_single_run, jobs, chunksize=1))
    else:
        results = []
        for job in jobs:
            results.append(_rietkerk_single_run(job))
            done = sum(1 for r in results if not r[3])
            if done >= want:
                break
    results.sort(key=lambda r: r[0])
    for _, row, label, extinct in results:
        if extinct:
            n_extinct += 1
            continue
        if len(rows) < want:
            rows.append(row)
            labels.append(label)
    if len(rows) < want:
        raise InsufficientSurvivors(
            f"{len(rows)} surviving runs from {len(results)} integrations, need {want}"
        )
    rows = np.array(rows)
    labels = np.array(labels)
    train = Dataset(spec, rows[:n_train], labels[:n_train], VEGETATION_UNITS)
    test = Dataset(spec, rows[n_train:want], labels[n_train:want], VEGETATION_UNITS)
    meta = {
        "seed": seed,
        "n_runs": len(results),
        "n_extinct": n_extinct,
        "n_cells": scale.n_cells,
        "total_time": scale.total_time,
    }
    return RietkerkExperiment(train, test, meta)


# ---------------------------------------------------------------------------
# black body

PLANCK_SYSTEM = si_system(("kg", "m", "s", "K"))
INTENSITY_UNITS = parse_unit("kg m^-1 s^-3", PLANCK_SYSTEM)


def planck_spec() -> FeatureSpec:
    """Wavelength, temperature, and the two constants of the long-wavelength
    radiance law.  Full-rank units matrix: no dimensionless monomials exist,
    and the decoder lattice point is unique."""
    feats = (
        FeatureDef("lam", parse_unit("m", PLANCK_SYSTEM)),
        FeatureDef("T", parse_unit("K", PLANCK_SYSTEM)),
        FeatureDef("c", parse_unit("m s^-1", PLANCK_SYSTEM)),
        FeatureDef("k_B", parse_unit("kg m^2 s^-2 K^-1", PLANCK_SYSTEM)),
    )
    return FeatureSpec(feats, PLANCK_SYSTEM)


def blackbody_dataset(n: int, seed: int, amplitude: float = 2.0) -> Dataset:
    """Spectral radiance samples from the long-wavelength law
    B = amplitude * c k_B T / lam^4, SI magnitudes."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(2e-6, 2e-5, n)
    T = rng.uniform(100.0, 1000.0, n)
    c = np.full(n, 299792458.0)
    k_B = np.full(n, 1.380649e-23)
    rows = np.column_stack([lam, T, c, k_B])
    labels = amplitude * c * k_B * T / lam**4
    return Dataset(planck_spec(), rows, labels, INTENSITY_UNITS)


# ---------------------------------------------------------------------------
# double pendulum checklists

@dataclass(frozen=True)
class Fixture:
    """A named monomial with a declared unit target, checked at build time.
    sqrt_flagged marks entries stored as the square of a square-root scalar."""

    name: str
    monomial: Monomial
    sqrt_flagged: bool = False


def double_pendulum_spec() -> FeatureSpec:
    """Scalarized features of the two-spring pendulum: 6 scalars, 5 norms,
    10 dots over vectors (g, p1, p2, q1, dq) where dq is the second spring's
    extension q2 - q1."""
    kg = parse_unit("kg", MECH_SYSTEM)
    spring = parse_unit("kg s^-2", MECH_SYSTEM)
    pos = parse_unit("m", MECH_SYSTEM)
    scalars = [
        ("m1", Quantity(1.0, kg)),
        ("m2", Quantity(1.0, kg)),
        ("k_s1", Quantity(1.0, spring)),
        ("k_s2", Quantity(1.0, spring)),
        ("L1", Quantity(1.0, pos)),
        ("L2", Quantity(1.0, pos)),
    ]
    acc = parse_unit("m s^-2", MECH_SYSTEM)
    mom = parse_unit("kg m s^-1", MECH_SYSTEM)
    vectors = [
        VectorFeature("g", (0.0, 0.0, -1.0), acc),
        VectorFeature("p1", (0.0, 0.0, 1.0), mom),
        VectorFeature("p2", (0.0, 0.0, 1.0), mom),
        VectorFeature("q1", (0.0, 0.0, 1.0), pos),
        VectorFeature("dq", (0.0, 0.0, 1.0), pos),
    ]
    feats = scalarize(scalars, vectors)
    return FeatureSpec.from_scalar_features(feats, MECH_SYSTEM)


def _fixture(spec, expr, target: UnitVector, sqrt_flagged=False) -> Fixture:
    mono = parse_monomial(expr, spec)
    actual = monomial_units(mono, spec)
    if actual != target:
        raise AssertionError(
            f"fixture {expr!r} has units {actual.exps}, declared {target.exps}"
        )
    return Fixture(expr, mono, sqrt_flagged)


def double_pendulum_feature_fixtures() -> tuple[list[Fixture], list[Fixture]]:
    """(dimensionless scalars, energy scaling factors) for the two-spring
    pendulum: 32 dimensionless entries of which 2 are stored as squares of
    square-root features, and 26 factors carrying energy units.
    """
    spec = double_pendulum_spec()
    zero = spec.system.zero()
    energy = ENERGY_UNITS

    dimensionless = []
    for a, b in [("m1", "m2"), ("k_s1", "k_s2"), ("L1", "L2")]:
        dimensionless.append(_fixture(spec, f"{a} {b}^-1", zero))
        dimensionless.append(_fixture(spec, f"{b} {a}^-1", zero))
    vec_names = ["g", "p1", "p2", "q1", "dq"]
    for a, b in combinations(vec_names, 2):
        dimensionless.append(_fixture(spec, f"{a}.{b} |{a}|^-1 |{b}|^-1", zero))
    for i, j in product("12", "12"):
        dimensionless.append(_fixture(spec, f"m{i} |g| k_s{j}^-1 L{j}^-1", zero))
        dimensionless.append(_fixture(spec, f"m{i}^-1 |g|^-1 k_s{j} L{j}", zero))
    dimensionless.append(_fixture(spec, "|q1| L1^-1", zero))
    dimensionless.append(_fixture(spec, "|q1|^2 L1^-2", zero))
    dimensionless.append(_fixture(spec, "|dq| L2^-1", zero))
    dimensionless.append(_fixture(spec, "|dq|^2 L2^-2", zero))
    for i in "12":
        dimensionless.append(
            _fixture(spec, f"|p{i}|^2 m{i}^-1 k_s{i}^-1 L{i}^-2", zero, sqrt_flagged=True)
        )
        dimensionless.append(_fixture(spec, f"|p{i}|^2 m{i}^-1 k_s{i}^-1 L{i}^-2", zero))

    scaling = []
    for r in "12":
        for qq in ["|q1|^2", "q1.dq", "|dq|^2"]:
            scaling.append(_fixture(spec, f"k_s{r} {qq}", energy))
    for r in "12":
        scaling.append(_fixture(spec, f"k_s{r} L1^2", energy))
        scaling.append(_fixture(spec, f"k_s{r} L1 L2", energy))
        scaling.append(_fixture(spec, f"k_s{r} L2^2", energy))
    for i, j in product("12", "12"):
        scaling.append(_fixture(spec, f"m{i} L{j} |g|", energy))
    for i, j in product("12", ["q1", "dq"]):
        scaling.append(_fixture(spec, f"m{i} g.{j}", energy))
    for pp in ["|p1|^2", "p1.p2", "|p2|^2"]:
        for r in "12":
            scaling.append(_fixture(spec, f"{pp} m{r}^-1", energy))

    assert len(dimensionless) == 32 and len(scaling) == 26
    assert sum(f.sqrt_flagged for f in dimensionless) == 2
    return dimensionless, scaling
