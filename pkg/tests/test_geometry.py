import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pireg.geometry import (
    DuplicateName,
    ScalarizeRules,
    VectorFeature,
    scalarize,
)
from pireg.units import Quantity, UnitVector, parse_unit, si_system

MECH = si_system(("kg", "m", "s"))


def q(value, expr):
    return Quantity(value, parse_unit(expr, MECH))


def pendulum_inputs():
    scalars = [("m", q(1.5, "kg")), ("k_s", q(2.0, "kg s^-2")), ("L", q(0.7, "m"))]
    vectors = [
        VectorFeature("g", (0.0, 0.0, -9.8), parse_unit("m s^-2", MECH)),
        VectorFeature("p", (1.0, 2.0, 3.0), parse_unit("kg m s^-1", MECH)),
        VectorFeature("q", (0.3, -0.1, 0.4), parse_unit("m", MECH)),
    ]
    return scalars, vectors


def test_pendulum_scalarization_order_and_count():
    scalars, vectors = pendulum_inputs()
    feats = scalarize(scalars, vectors)
    assert [f.name for f in feats] == [
        "m", "k_s", "L", "|g|", "|p|", "|q|", "g.p", "g.q", "p.q",
    ]


def test_pendulum_scalarization_values_and_units():
    scalars, vectors = pendulum_inputs()
    feats = {f.name: f for f in scalarize(scalars, vectors)}
    assert feats["m"].value == 1.5
    assert math.isclose(feats["|p|"].value, math.sqrt(14.0), rel_tol=1e-15)
    assert math.isclose(feats["g.q"].value, -9.8 * 0.4, rel_tol=1e-15)
    assert feats["|g|"].units == parse_unit("m s^-2", MECH)
    assert feats["g.p"].units == parse_unit("kg m^2 s^-3", MECH)
    assert feats["p.q"].units == parse_unit("kg m^2 s^-1", MECH)


def test_weights_and_sign_defaults():
    scalars, vectors = pendulum_inputs()
    feats = {f.name: f for f in scalarize(scalars, vectors)}
    for name in ("m", "k_s", "L", "|g|", "|p|", "|q|"):
        assert feats[name].degree_weight == 1
        assert feats[name].allow_negative_exponent
    for name in ("g.p", "g.q", "p.q"):
        assert feats[name].degree_weight == 2
        assert not feats[name].allow_negative_exponent


def test_negative_exponent_override():
    scalars, vectors = pendulum_inputs()
    rules = ScalarizeRules(negative_exponent_overrides={"g.q": True})
    feats = {f.name: f for f in scalarize(scalars, vectors, rules)}
    assert feats["g.q"].allow_negative_exponent
    assert not feats["g.p"].allow_negative_exponent


def test_scalars_only():
    feats = scalarize([("a", q(1.0, "kg")), ("b", q(2.0, "m"))], [])
    assert [f.name for f in feats] == ["a", "b"]
    assert all(f.degree_weight == 1 for f in feats)


def test_single_vector_no_dots():
    feats = scalarize([], [VectorFeature("v", (3.0, 4.0, 0.0), parse_unit("m", MECH))])
    assert [f.name for f in feats] == ["|v|"]
    assert feats[0].value == 5.0


def test_duplicate_names_rejected():
    with pytest.raises(DuplicateName):
        scalarize([("x", q(1, "kg")), ("x", q(2, "kg"))], [])
    # a scalar named like a generated norm collides too
    with pytest.raises(DuplicateName):
        scalarize(
            [("|v|", q(1, "m"))],
            [VectorFeature("v", (1.0, 0.0, 0.0), parse_unit("m", MECH))],
        )


def test_vector_must_be_three_dimensional():
    with pytest.raises(ValueError):
        VectorFeature("v", (1.0, 2.0), parse_unit("m", MECH))


unit_triples = st.tuples(
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
)


@given(unit_triples, unit_triples, st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)))
def test_rotation_invariance(u, v, axis_angles):
    # one common rotation applied to every vector leaves norms and dots alone
    rng_free = np.array(axis_angles)
    a, b, c = rng_free
    Rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    Ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    Rz = np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
    R = Rx @ Ry @ Rz
    mu = parse_unit("m", MECH)
    before = scalarize(
        [],
        [VectorFeature("u", u, mu), VectorFeature("v", v, mu)],
    )
    after = scalarize(
        [],
        [
            VectorFeature("u", tuple(R @ np.array(u)), mu),
            VectorFeature("v", tuple(R @ np.array(v)), mu),
        ],
    )
    for f, g in zip(before, after):
        assert f.name == g.name and f.units == g.units
        assert math.isclose(f.value, g.value, rel_tol=1e-12, abs_tol=1e-9)
