"""Global evolution of a local rule on finite-support and toroidal configurations."""
from __future__ import annotations

import itertools
from typing import Mapping

import numpy as np

from .lattice import Configuration, Neighborhood, PeriodicConfig, TorusConfig, Window, add, closure
from .quantity import Quantity, vacuum_set, vacuum_symbol
from .rules import LocalRule, encode


def is_vacuum_preserving(rule: LocalRule, phi: Quantity) -> bool:
    """True iff f maps every all-vacuum pattern to a vacuum symbol."""
    vac = sorted(vacuum_set(phi))
    if not vac:
        return True
    for pat in itertools.product(vac, repeat=len(rule.nbhd)):
        if rule.table[encode(pat, rule.A)] not in vac:
            return False
    return True


def _gather(rule: LocalRule, arr: np.ndarray, lo: np.ndarray, out_shape) -> np.ndarray:
    """Apply f at every site of a box; ``arr`` must cover the box grown by B.

    ``lo`` is the offset of the output box's first site inside ``arr``.
    """
    idx = np.zeros(out_shape, dtype=np.int64)
    for b in rule.nbhd.offsets:
        sl = tuple(slice(l + bi, l + bi + n) for l, bi, n in zip(lo, b, out_shape))
        idx = idx * rule.A + arr[sl]
    return rule.array[idx]


def step_finite(rule: LocalRule, a: Configuration) -> Configuration:
    """One step of F on a configuration with quiescent background."""
    if not rule.quiescent(a.background):
        raise ValueError("background not quiescent: f(b,...,b) != b")
    if not a.overrides:
        return a
    if a.dimension != rule.nbhd.dimension:
        raise ValueError("configuration and rule dimensions differ")
    r = rule.nbhd.radius
    pts = np.array([p for p, _ in a.overrides], dtype=np.int64)
    lo = pts.min(axis=0) - r
    hi = pts.max(axis=0) + r
    out_shape = tuple(int(x) for x in hi - lo + 1)
    arr = np.full(tuple(n + 2 * r for n in out_shape), a.background, dtype=np.int64)
    for p, s in a.overrides:
        arr[tuple(int(x) for x in np.asarray(p) - lo + r)] = s
    new = _gather(rule, arr, np.full(len(out_shape), r), out_shape)
    nz = np.argwhere(new != a.background)
    return Configuration(
        a.background,
        [(tuple(int(x) for x in q + lo), int(new[tuple(q)])) for q in nz],
        dimension=a.dimension,
    )


def step_torus(rule: LocalRule, a: TorusConfig) -> TorusConfig:
    """One step of the induced CA on (Z/M_1 x ... x Z/M_D)."""
    a.check_against(rule.nbhd)
    axes = tuple(range(a.dimension))
    idx = np.zeros(a.moduli, dtype=np.int64)
    for b in rule.nbhd.offsets:
        idx = idx * rule.A + np.roll(a.cells, tuple(-x for x in b), axis=axes)
    return TorusConfig(a.moduli, rule.array[idx])


def step_torus_batch(rule: LocalRule, cells: np.ndarray) -> np.ndarray:
    """Step many 1-D torus configurations at once; ``cells`` has shape (n, M)."""
    idx = np.zeros_like(cells)
    for (b,) in rule.nbhd.offsets:
        idx = idx * rule.A + np.roll(cells, -b, axis=1)
    return rule.array[idx]


def step_periodic(rule: LocalRule, a: PeriodicConfig) -> PeriodicConfig:
    """Exact image of an eventually periodic 1-D configuration.

    Sites farther than the radius from the head see only the core, so the
    new core is the core stepped cyclically and the head grows by the radius
    on each side.
    """
    if rule.nbhd.dimension != 1:
        raise ValueError("periodic configurations are one-dimensional")
    r = rule.nbhd.radius
    p = a.period
    reps = -(-(4 * r + 1) // p)
    ring = TorusConfig((p * reps,), a.core * reps)
    core = tuple(int(c) for c in step_torus(rule, ring).cells[:p])
    if not a.head:
        return PeriodicConfig(core)
    lo, hi = a.start - r, a.start + len(a.head) - 1 + r
    head = tuple(
        rule.table[encode([a[(x + b,)] for (b,) in rule.nbhd.offsets], rule.A)]
        for x in range(lo, hi + 1)
    )
    return PeriodicConfig(core, head, lo)


def step(rule: LocalRule, a):
    if isinstance(a, TorusConfig):
        return step_torus(rule, a)
    if isinstance(a, PeriodicConfig):
        return step_periodic(rule, a)
    return step_finite(rule, a)


def embed(pattern: Mapping, phi: Quantity) -> Configuration:
    """The finite-support configuration equal to ``pattern`` on its window and vacuum elsewhere."""
    vac = vacuum_symbol(phi)
    items = list(pattern.items())
    dim = len(items[0][0]) if items else 1
    return Configuration(vac, items, dimension=dim)


def embed_word(word, start: int, phi: Quantity) -> Configuration:
    """1-D shorthand for :func:`embed` with ``word`` starting at site ``start``."""
    return Configuration(vacuum_symbol(phi), {(start + i,): s for i, s in enumerate(word)}, dimension=1)


def evolve(rule: LocalRule, a, steps: int) -> list:
    """The orbit a, F(a), ..., F^steps(a)."""
    out = [a]
    for _ in range(steps):
        out.append(step(rule, out[-1]))
    return out


def changed_sites(rule: LocalRule, a: Configuration) -> Window:
    """Sites whose output can differ from the background: cl[supp(a)]."""
    return closure(a.support, rule.nbhd)


def sliding_window_step(rule: LocalRule, a: Configuration, w) -> dict:
    """Brute-force F(a) on the sites of ``w``, one table lookup per site."""
    out = {}
    for x in Window(w):
        pat = [a[add(x, b)] for b in rule.nbhd.offsets]
        out[x] = rule.table[encode(pat, rule.A)]
    return out


def torus_for(nbhd: Neighborhood, minimum: int = 0) -> int:
    """Smallest valid cubic torus modulus for ``nbhd`` that is at least ``minimum``."""
    lo, hi = nbhd.extent()
    need = max(h - l for l, h in zip(lo, hi)) * 2 + 1
    return max(need, minimum)
