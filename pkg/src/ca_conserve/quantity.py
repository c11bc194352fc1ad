"""Cell-wise valuations phi: A -> Z with exact coefficients.

Three coefficient domains are supported: the rationals, rational vectors of
fixed length K, and residues mod m.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .lattice import Configuration, TorusConfig, Window

RATIONAL = "rational"
VECTOR = "vector"
MOD = "mod"


def parse_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        raise TypeError("floats are not exact; pass a string like '1/3'")
    return Fraction(v)


def format_fraction(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class Quantity:
    domain: str
    values: tuple
    modulus: int | None = None

    def __post_init__(self):
        vals = self.values
        if self.domain == RATIONAL:
            vals = tuple(parse_fraction(v) for v in vals)
        elif self.domain == VECTOR:
            vals = tuple(tuple(parse_fraction(c) for c in v) for v in vals)
            if len({len(v) for v in vals}) > 1:
                raise ValueError("vector values must all have the same length")
        elif self.domain == MOD:
            if self.modulus is None or self.modulus < 2:
                raise ValueError("mod domain needs a modulus >= 2")
            vals = tuple(int(v) % self.modulus for v in vals)
        else:
            raise ValueError(f"unknown domain {self.domain!r}")
        if not vals:
            raise ValueError("a quantity needs one value per symbol")
        object.__setattr__(self, "values", vals)

    # constructors
    @classmethod
    def rational(cls, values: Iterable) -> "Quantity":
        return cls(RATIONAL, tuple(values))

    @classmethod
    def vector(cls, values: Iterable[Sequence]) -> "Quantity":
        return cls(VECTOR, tuple(tuple(v) for v in values))

    @classmethod
    def mod(cls, values: Iterable, m: int) -> "Quantity":
        return cls(MOD, tuple(values), m)

    @classmethod
    def identity(cls, alphabet: int, modulus: int | None = None) -> "Quantity":
        """phi(a) = a."""
        if modulus is None:
            return cls.rational(range(alphabet))
        return cls.mod(range(alphabet), modulus)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def K(self) -> int | None:
        return len(self.values[0]) if self.domain == VECTOR else None

    def zero(self):
        if self.domain == VECTOR:
            return (Fraction(0),) * self.K
        return Fraction(0) if self.domain == RATIONAL else 0

    def is_zero(self, v) -> bool:
        return v == self.zero()

    def __call__(self, symbol: int):
        return self.values[symbol]

    def add(self, u, v):
        if self.domain == VECTOR:
            return tuple(a + b for a, b in zip(u, v))
        if self.domain == MOD:
            return (u + v) % self.modulus
        return u + v

    def scale(self, k: int, v):
        if self.domain == VECTOR:
            return tuple(k * a for a in v)
        if self.domain == MOD:
            return (k * v) % self.modulus
        return k * v

    def sum(self, symbols: Iterable[int]):
        total = self.zero()
        for s in symbols:
            total = self.add(total, self.values[s])
        return total

    def dot(self, row: Sequence[int]):
        """sum_s row[s] * phi(s) for an integer coefficient row."""
        total = self.zero()
        for k, v in zip(row, self.values):
            if k:
                total = self.add(total, self.scale(int(k), v))
        return total

    def components(self) -> list[list[Fraction]]:
        """Scalar rational components, one list per coordinate (mod domain excluded)."""
        if self.domain == RATIONAL:
            return [list(self.values)]
        if self.domain == VECTOR:
            return [[v[k] for v in self.values] for k in range(self.K)]
        raise ValueError("mod-valued quantities have no rational components")

    def is_natural(self) -> bool:
        """Scalar with every value a nonnegative integer."""
        return self.domain == RATIONAL and all(v >= 0 and v.denominator == 1 for v in self.values)

    def is_nonnegative(self) -> bool:
        if self.domain == RATIONAL:
            return all(v >= 0 for v in self.values)
        if self.domain == VECTOR:
            return all(c >= 0 for v in self.values for c in v)
        return False

    def to_json(self) -> dict:
        doc: dict = {"domain": self.domain}
        if self.domain == MOD:
            doc["m"] = self.modulus
            doc["values"] = list(self.values)
        elif self.domain == VECTOR:
            doc["K"] = self.K
            doc["values"] = [[format_fraction(c) for c in v] for v in self.values]
        else:
            doc["values"] = [format_fraction(v) for v in self.values]
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "Quantity":
        domain = doc["domain"]
        vals = doc["values"]
        if not vals:
            raise ValueError("quantity file has no values")
        if domain == MOD:
            return cls.mod(vals, int(doc["m"]))
        if domain == VECTOR:
            q = cls.vector(vals)
            if "K" in doc and q.K != int(doc["K"]):
                raise ValueError("declared K does not match value length")
            return q
        if domain == RATIONAL:
            return cls.rational(vals)
        raise ValueError(f"unknown domain {domain!r}")


def format_value(q: Quantity, v):
    """JSON-ready rendering of a domain value."""
    if q.domain == VECTOR:
        return [format_fraction(c) for c in v]
    if q.domain == MOD:
        return int(v)
    return format_fraction(v)


def vacuum_set(phi: Quantity) -> frozenset[int]:
    """Symbols with phi-value zero."""
    return frozenset(s for s, v in enumerate(phi.values) if phi.is_zero(v))


def vacuum_symbol(phi: Quantity) -> int:
    """Smallest-index vacuum symbol."""
    vac = vacuum_set(phi)
    if not vac:
        raise ValueError("quantity has no vacuum state")
    return min(vac)


def total(phi: Quantity, a: Configuration):
    """Sum of phi over all sites of a finite-support configuration."""
    if not phi.is_zero(phi(a.background)):
        raise ValueError("divergent total: background symbol is not a vacuum state")
    return phi.sum(s for _, s in a.overrides)


def total_window(phi: Quantity, a, w: Iterable):
    """Sum of phi over the sites of a finite window (torus points are read mod M)."""
    w = w if isinstance(w, Window) else Window(w)
    if isinstance(a, TorusConfig):
        return phi.sum(a[p] for p in w)
    d = a.as_dict()
    return phi.sum(d.get(p, a.background) for p in w)


def load_quantity(path: str | Path) -> Quantity:
    with open(path, encoding="utf-8") as fh:
        return Quantity.from_json(json.load(fh))


def save_quantity(q: Quantity, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(q.to_json(), fh, indent=1)
