"""Base-unit systems, unit-expression parsing, and exact unit arithmetic.

Every quantity carries an integer vector of exponents over an ordered tuple of
base units, so "kg m^2 s^-2" over (kg, m, s) is (1, 2, -2).  The positive
rescaling group acts on a quantity by

    g . (x, u) = (prod_j g_j ** -u_j) * x

i.e. shrinking the unit of mass by 1000x multiplies a mass value by 1000.
All unit bookkeeping is exact integer arithmetic; only values are floats.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

# Exponents live comfortably in single digits; the bound exists to fail loudly
# if some degenerate input walks the lattice off to absurd powers.
MAX_EXPONENT = 2**31 - 1


class UnitError(ValueError):
    """Base class for unit-system errors."""


class UnknownUnit(UnitError):
    def __init__(self, name):
        super().__init__(f"unknown unit name: {name!r}")
        self.name = name


class MalformedExponent(UnitError):
    def __init__(self, token):
        super().__init__(f"malformed exponent in token: {token!r}")
        self.token = token


class UnitMismatch(UnitError):
    def __init__(self, left, right, what="operands"):
        super().__init__(f"{what} carry different units: {left} vs {right}")
        self.left = left
        self.right = right


class ExponentOverflow(UnitError):
    pass


@dataclass(frozen=True)
class UnitVector:
    """Integer exponents over an ordered list of base units."""

    exps: tuple[int, ...]

    def __post_init__(self):
        for e in self.exps:
            if not isinstance(e, int) or isinstance(e, bool):
                raise TypeError(f"unit exponents must be ints, got {e!r}")
            if abs(e) > MAX_EXPONENT:
                raise ExponentOverflow(f"unit exponent out of range: {e}")

    @classmethod
    def zero(cls, k: int) -> "UnitVector":
        return cls((0,) * k)

    def __len__(self):
        return len(self.exps)

    def __add__(self, other: "UnitVector") -> "UnitVector":
        if len(self.exps) != len(other.exps):
            raise UnitMismatch(self, other, "unit vectors of different length")
        return UnitVector(tuple(a + b for a, b in zip(self.exps, other.exps)))

    def scaled(self, gamma: int) -> "UnitVector":
        return UnitVector(tuple(gamma * e for e in self.exps))

    def is_zero(self) -> bool:
        return all(e == 0 for e in self.exps)


_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

# SI derived-unit definitions in terms of base-unit names.  A system built via
# si_system() gets every alias whose ingredients are all present.
_SI_ALIAS_DEFS = {
    "N": {"kg": 1, "m": 1, "s": -2},
    "J": {"kg": 1, "m": 2, "s": -2},
    "Pa": {"kg": 1, "m": -1, "s": -2},
    "W": {"kg": 1, "m": 2, "s": -3},
    "Hz": {"s": -1},
    "V": {"kg": 1, "m": 2, "s": -3, "A": -1},
}


@dataclass(frozen=True)
class BaseUnitSystem:
    """An ordered tuple of base-unit names plus an alias table.

    Aliases map a derived name ("J") to its exponent vector over the base
    units.  Base-unit ORDER matters: it fixes the meaning of every exponent
    vector in the system, and callers that mix systems must use the same
    ordered names.
    """

    names: tuple[str, ...]
    aliases: dict[str, UnitVector] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.names) == 0:
            raise UnitError("a unit system needs at least one base unit")
        seen = set()
        for n in self.names:
            if not _NAME_RE.match(n):
                raise UnitError(f"bad base unit name: {n!r}")
            if n in seen:
                raise UnitError(f"duplicate base unit name: {n!r}")
            seen.add(n)
        for alias, vec in self.aliases.items():
            if not _NAME_RE.match(alias):
                raise UnitError(f"bad alias name: {alias!r}")
            if alias in seen:
                raise UnitError(f"alias shadows a base unit: {alias!r}")
            if len(vec) != len(self.names):
                raise UnitError(
                    f"alias {alias!r} has vector length {len(vec)}, expected {len(self.names)}"
                )

    @property
    def k(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def zero(self) -> UnitVector:
        return UnitVector.zero(self.k)

    def base_vector(self, name: str) -> UnitVector:
        i = self.index(name)
        return UnitVector(tuple(1 if j == i else 0 for j in range(self.k)))

    def with_alias(self, name: str, definition) -> "BaseUnitSystem":
        """Return a copy with one more alias; definition is a UnitVector or expression string."""
        vec = definition if isinstance(definition, UnitVector) else parse_unit(definition, self)
        merged = dict(self.aliases)
        merged[name] = vec
        return BaseUnitSystem(self.names, merged)


def si_system(names: tuple[str, ...] = ("kg", "m", "s", "K")) -> BaseUnitSystem:
    """SI-style system over the given base names, with whichever of the stock
    aliases (N, J, Pa, W, Hz, V) are expressible in those names."""
    aliases = {}
    for alias, defn in _SI_ALIAS_DEFS.items():
        if all(base in names for base in defn):
            aliases[alias] = UnitVector(tuple(defn.get(n, 0) for n in names))
    return BaseUnitSystem(tuple(names), aliases)


def parse_unit(expr: str, system: BaseUnitSystem) -> UnitVector:
    """Parse a whitespace-separated product of unit factors.

    Grammar: expr := factor (SP factor)* | "1" | "";  factor := NAME ("^" INT)?.
    "kg m^2 s^-2" over (kg, m, s) parses to (1, 2, -2); "1" and "" parse to the
    zero vector.  There is no division; write negative exponents.
    """
    expr = expr.strip()
    total = [0] * system.k
    if expr in ("", "1"):
        return UnitVector(tuple(total))
    for token in expr.split():
        name, sep, exp_str = token.partition("^")
        if sep:
            try:
                exp = int(exp_str)
            except ValueError:
                raise MalformedExponent(token) from None
        else:
            exp = 1
        if name in system.names:
            i = system.index(name)
            total[i] += exp
        elif name in system.aliases:
            vec = system.aliases[name]
            for i, e in enumerate(vec.exps):
                total[i] += exp * e
        else:
            raise UnknownUnit(name)
    return UnitVector(tuple(total))


def format_unit(units: UnitVector, system: BaseUnitSystem) -> str:
    """Canonical expression for a unit vector: base units in system order,
    exponent 1 left bare, zero exponents dropped, zero vector printed as "1"."""
    if len(units) != system.k:
        raise UnitMismatch(units, system.names, "unit vector and system")
    parts = []
    for name, e in zip(system.names, units.exps):
        if e == 1:
            parts.append(name)
        elif e != 0:
            parts.append(f"{name}^{e}")
    return " ".join(parts) if parts else "1"


@dataclass(frozen=True)
class Quantity:
    """A float value tagged with an exact unit vector."""

    value: float
    units: UnitVector

    def __add__(self, other):
        return q_add(self, other)

    def __mul__(self, other):
        if isinstance(other, Quantity):
            return q_mul(self, other)
        return Quantity(self.value * other, self.units)

    __rmul__ = __mul__

    def __pow__(self, gamma: int):
        return q_pow(self, gamma)


def q_add(a: Quantity, b: Quantity) -> Quantity:
    """Add two quantities; their unit vectors must agree exactly."""
    if a.units != b.units:
        raise UnitMismatch(a.units, b.units)
    return Quantity(a.value + b.value, a.units)


def q_mul(a: Quantity, b: Quantity) -> Quantity:
    return Quantity(a.value * b.value, a.units + b.units)


def q_pow(q: Quantity, gamma: int) -> Quantity:
    if not isinstance(gamma, int) or isinstance(gamma, bool):
        raise TypeError("quantity powers must be integers")
    if gamma < 0 and q.value == 0.0:
        raise ZeroDivisionError("zero raised to a negative power")
    return Quantity(q.value**gamma, q.units.scaled(gamma))


@dataclass(frozen=True)
class GroupElement:
    """A positive rescaling factor per base unit."""

    factors: tuple[float, ...]

    def __post_init__(self):
        for f in self.factors:
            if not (f > 0 and math.isfinite(f)):
                raise ValueError(f"group factors must be positive and finite, got {f!r}")

    @classmethod
    def identity(cls, k: int) -> "GroupElement":
        return cls((1.0,) * k)

    def compose(self, other: "GroupElement") -> "GroupElement":
        if len(self.factors) != len(other.factors):
            raise UnitMismatch(self.factors, other.factors, "group elements")
        return GroupElement(tuple(a * b for a, b in zip(self.factors, other.factors)))


def scale_factor(g: GroupElement, units: UnitVector) -> float:
    """prod_j g_j ** -u_j, the multiplier the group action applies to a value
    with the given units."""
    if len(g.factors) != len(units):
        raise UnitMismatch(g.factors, units, "group element and unit vector")
    out = 1.0
    for gj, uj in zip(g.factors, units.exps):
        if uj:
            out *= gj ** (-uj)
    return out


def rescale(g: GroupElement, x: Quantity) -> Quantity:
    """Apply a unit change: the unit vector is unchanged, the value picks up
    prod_j g_j^-u_j.  Shrinking a base unit makes the number bigger."""
    return Quantity(x.value * scale_factor(g, x.units), x.units)
