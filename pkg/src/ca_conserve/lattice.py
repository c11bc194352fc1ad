"""Lattice geometry on Z^D: neighborhoods, windows, configurations.

Points are tuples of ints, one entry per axis, even in one dimension.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Point = tuple[int, ...]


def as_point(x, dimension: int | None = None) -> Point:
    if isinstance(x, (int, np.integer)):
        p = (int(x),)
    else:
        p = tuple(int(v) for v in x)
    if dimension is not None and len(p) != dimension:
        raise ValueError(f"point {p} is not {dimension}-dimensional")
    return p


def add(p: Point, q: Point) -> Point:
    return tuple(a + b for a, b in zip(p, q))


def neg(p: Point) -> Point:
    return tuple(-a for a in p)


@dataclass(frozen=True)
class Neighborhood:
    """Finite symmetric neighborhood B of the origin, offsets in lexicographic order."""

    dimension: int
    offsets: tuple[Point, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        pts = sorted({as_point(b, self.dimension) for b in self.offsets})
        if len(pts) != len(self.offsets):
            raise ValueError("neighborhood offsets must be distinct")
        object.__setattr__(self, "offsets", tuple(pts))
        pset = set(pts)
        if any(neg(b) not in pset for b in pts):
            raise ValueError("neighborhood must be symmetric")
        if (0,) * self.dimension not in pset:
            raise ValueError("neighborhood must contain the origin")

    @classmethod
    def from_offsets(cls, offsets: Iterable, dimension: int | None = None, pad: bool = True):
        """Build from arbitrary offsets, closing under negation and adding the origin.

        With ``pad=False`` the offsets must already be symmetric and contain
        the origin.
        """
        pts = [as_point(b) for b in offsets]
        if dimension is None:
            if not pts:
                raise ValueError("cannot infer dimension from empty offsets")
            dimension = len(pts[0])
        pts = [as_point(p, dimension) for p in pts]
        if pad:
            pts = set(pts) | {neg(p) for p in pts} | {(0,) * dimension}
        return cls(dimension, tuple(pts))

    @classmethod
    def box(cls, radius: int, dimension: int = 1) -> "Neighborhood":
        """The cube [-radius..radius]^D."""
        rng = range(-radius, radius + 1)
        return cls(dimension, tuple(itertools.product(rng, repeat=dimension)))

    def __len__(self) -> int:
        return len(self.offsets)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.offsets)

    def __contains__(self, p) -> bool:
        return as_point(p) in self._set

    @property
    def _set(self) -> frozenset:
        return frozenset(self.offsets)

    @property
    def origin_index(self) -> int:
        return self.offsets.index((0,) * self.dimension)

    @property
    def radius(self) -> int:
        """Largest |coordinate| over all offsets (Chebyshev radius)."""
        return max(abs(c) for b in self.offsets for c in b)

    def extent(self) -> tuple[Point, Point]:
        lo = tuple(min(b[i] for b in self.offsets) for i in range(self.dimension))
        hi = tuple(max(b[i] for b in self.offsets) for i in range(self.dimension))
        return lo, hi

    def is_box(self) -> bool:
        lo, hi = self.extent()
        return len(self.offsets) == int(np.prod([h - l + 1 for l, h in zip(lo, hi)]))

    def index(self, p) -> int:
        return self.offsets.index(as_point(p, self.dimension))

    def to_window(self) -> "Window":
        return Window(self.offsets)


def double(nbhd: Neighborhood) -> Neighborhood:
    """Minkowski sum B + B."""
    return Neighborhood(
        nbhd.dimension,
        tuple({add(p, q) for p in nbhd.offsets for q in nbhd.offsets}),
    )


def minkowski(nbhd: Neighborhood, other: Neighborhood) -> Neighborhood:
    return Neighborhood(nbhd.dimension, tuple({add(p, q) for p in nbhd for q in other}))


class Window(frozenset):
    """A finite set of lattice points."""

    def __new__(cls, points: Iterable = ()):
        return super().__new__(cls, (as_point(p) for p in points))

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Window":
        """The 1-D window [lo..hi], inclusive."""
        return cls((x,) for x in range(lo, hi + 1))

    @classmethod
    def box(cls, lo: Sequence[int], hi: Sequence[int]) -> "Window":
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        return cls(itertools.product(*ranges))

    def sorted(self) -> list[Point]:
        return sorted(self)

    def bounds(self) -> tuple[Point, Point] | None:
        if not self:
            return None
        d = len(next(iter(self)))
        lo = tuple(min(p[i] for p in self) for i in range(d))
        hi = tuple(max(p[i] for p in self) for i in range(d))
        return lo, hi

    def _box_bounds(self):
        b = self.bounds()
        if b is None:
            return None
        lo, hi = b
        if len(self) == int(np.prod([h - l + 1 for l, h in zip(lo, hi)])):
            return lo, hi
        return None


def closure(w: Iterable, nbhd: Neighborhood) -> Window:
    """cl[W] = B + W."""
    w = w if isinstance(w, Window) else Window(w)
    box = w._box_bounds()
    if box is not None and nbhd.is_box():
        blo, bhi = nbhd.extent()
        lo, hi = box
        return Window.box([a + b for a, b in zip(lo, blo)], [a + b for a, b in zip(hi, bhi)])
    return Window(add(p, b) for p in w for b in nbhd.offsets)


def interior(w: Iterable, nbhd: Neighborhood) -> Window:
    """int[W] = {w in W : B + w is contained in W}."""
    w = w if isinstance(w, Window) else Window(w)
    box = w._box_bounds()
    if box is not None and nbhd.is_box():
        blo, bhi = nbhd.extent()
        lo, hi = box
        lo2 = [a - b for a, b in zip(lo, blo)]
        hi2 = [a - b for a, b in zip(hi, bhi)]
        if any(l > h for l, h in zip(lo2, hi2)):
            return Window()
        return Window.box(lo2, hi2)
    return Window(p for p in w if all(add(p, b) in w for b in nbhd.offsets))


@dataclass(frozen=True)
class Configuration:
    """A configuration equal to ``background`` outside a finite set of overrides.

    ``overrides`` is stored as a sorted tuple of (point, symbol) pairs; entries
    equal to the background are dropped on construction.
    """

    background: int
    overrides: tuple[tuple[Point, int], ...] = ()
    dimension: int = 1

    def __init__(self, background: int, overrides: Mapping | Iterable = (), dimension: int | None = None):
        items = overrides.items() if isinstance(overrides, Mapping) else overrides
        clean: dict[Point, int] = {}
        for p, s in items:
            p = as_point(p)
            if dimension is None:
                dimension = len(p)
            elif len(p) != dimension:
                raise ValueError(f"point {p} is not {dimension}-dimensional")
            if p in clean:
                raise ValueError(f"duplicate override at {p}")
            clean[p] = int(s)
        object.__setattr__(self, "background", int(background))
        object.__setattr__(
            self,
            "overrides",
            tuple(sorted((p, s) for p, s in clean.items() if s != background)),
        )
        object.__setattr__(self, "dimension", 1 if dimension is None else dimension)

    def __getitem__(self, p) -> int:
        return self.as_dict().get(as_point(p), self.background)

    def as_dict(self) -> dict[Point, int]:
        d = self.__dict__.get("_dict")
        if d is None:
            d = dict(self.overrides)
            object.__setattr__(self, "_dict", d)
        return d

    @property
    def support(self) -> Window:
        """Sites differing from the background."""
        return Window(p for p, _ in self.overrides)

    @classmethod
    def from_word(cls, word: Sequence[int], start: int = 0, background: int = 0) -> "Configuration":
        """1-D configuration with ``word`` written at sites start, start+1, ..."""
        return cls(background, {(start + i,): s for i, s in enumerate(word)}, dimension=1)

    def word(self, lo: int, hi: int) -> tuple[int, ...]:
        """Symbols at 1-D sites lo..hi inclusive."""
        d = self.as_dict()
        return tuple(d.get((x,), self.background) for x in range(lo, hi + 1))

    def to_json(self) -> dict:
        return {
            "background": self.background,
            "overrides": [[*p, s] for p, s in self.overrides],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "Configuration":
        rows = doc.get("overrides", [])
        dim = doc.get("dimension")
        if rows:
            dim = len(rows[0]) - 1
        return cls(doc["background"], [(tuple(r[:-1]), r[-1]) for r in rows], dimension=dim or 1)


@dataclass(frozen=True, eq=False)
class TorusConfig:
    """Configuration on the torus Z/M_1 x ... x Z/M_D; cells stored row-major."""

    moduli: tuple[int, ...]
    cells: np.ndarray = field(repr=False)

    def __init__(self, moduli: Sequence[int], cells):
        moduli = tuple(int(m) for m in moduli)
        if any(m < 1 for m in moduli):
            raise ValueError("moduli must be positive")
        arr = np.array(cells, dtype=np.int64).reshape(moduli)
        arr.setflags(write=False)
        object.__setattr__(self, "moduli", moduli)
        object.__setattr__(self, "cells", arr)

    @property
    def dimension(self) -> int:
        return len(self.moduli)

    def __getitem__(self, p) -> int:
        p = as_point(p, self.dimension)
        return int(self.cells[tuple(x % m for x, m in zip(p, self.moduli))])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusConfig)
            and self.moduli == other.moduli
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self) -> int:
        return hash((self.moduli, self.cells.tobytes()))

    def translate(self, shift: Sequence[int]) -> "TorusConfig":
        return TorusConfig(self.moduli, np.roll(self.cells, tuple(shift), axis=tuple(range(self.dimension))))

    def check_against(self, nbhd: Neighborhood) -> None:
        """Require each modulus to exceed the B+B extent along its axis."""
        if nbhd.dimension != self.dimension:
            raise ValueError("torus and neighborhood dimensions differ")
        lo, hi = double(nbhd).extent()
        for m, l, h in zip(self.moduli, lo, hi):
            if m <= h - l:
                raise ValueError(
                    f"torus modulus {m} too small for neighborhood (needs > {h - l})"
                )

    def to_json(self) -> dict:
        return {"moduli": list(self.moduli), "cells": [int(c) for c in self.cells.ravel()]}

    @classmethod
    def from_json(cls, doc: Mapping) -> "TorusConfig":
        return cls(doc["moduli"], doc["cells"])


def restrict(a, w: Iterable) -> dict[Point, int]:
    """a|_W as a point -> symbol map (background filled in)."""
    return {p: a[p] for p in sorted(Window(w))}


def config_from_json(doc: Mapping):
    if "moduli" in doc:
        return TorusConfig.from_json(doc)
    if "core" in doc:
        return PeriodicConfig.from_json(doc)
    return Configuration.from_json(doc)


@dataclass(frozen=True)
class PeriodicConfig:
    """1-D configuration that repeats ``core`` everywhere except on a finite ``head``.

    Site x holds ``head[x - start]`` when start <= x < start + len(head), and
    ``core[x mod len(core)]`` otherwise.
    """

    core: tuple[int, ...]
    head: tuple[int, ...] = ()
    start: int = 0

    def __post_init__(self):
        if not self.core:
            raise ValueError("periodic core must be nonempty")
        object.__setattr__(self, "core", tuple(int(s) for s in self.core))
        object.__setattr__(self, "head", tuple(int(s) for s in self.head))

    @property
    def dimension(self) -> int:
        return 1

    @property
    def period(self) -> int:
        return len(self.core)

    def __getitem__(self, p) -> int:
        (x,) = as_point(p, 1)
        if self.start <= x < self.start + len(self.head):
            return self.head[x - self.start]
        return self.core[x % len(self.core)]

    def word(self, lo: int, hi: int) -> tuple[int, ...]:
        return tuple(self[(x,)] for x in range(lo, hi + 1))

    def to_json(self) -> dict:
        return {"core": list(self.core), "head": list(self.head), "start": self.start}

    @classmethod
    def from_json(cls, doc: Mapping) -> "PeriodicConfig":
        return cls(tuple(doc["core"]), tuple(doc.get("head", ())), int(doc.get("start", 0)))
