"""Quantized type classes: the cuboid partition of the statistic space.

Cuboids have side s/n and are half-open, (-s/2n, s/2n] around each center
per coordinate; centers live on the lattice anchor + (s/n) Z^d. Two sequences
share a class iff their average statistics fall in the same cuboid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SpecError
from .family import FamilySpec, evaluate, mle, suffstat
from .typeclass import (
    TypeIndex,
    check_composition_budget,
    composition_array,
    group_compositions_by_key,
)

# Relative tolerance for resolving floating-point boundary ties toward the
# inclusive (+s/2n) side of the half-open cuboid.
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Cuboid grid at blocklength n: side s/n, centers anchored at `anchor`."""

    n: int
    s: float
    d: int
    anchor: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise SpecError(f"blocklength must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.s) and self.s > 0):
            raise SpecError(f"grid scale s must be a finite positive real, got {self.s!r}")
        if len(self.anchor) != self.d:
            raise SpecError(f"anchor has length {len(self.anchor)}, expected d={self.d}")

    @staticmethod
    def create(n: int, s: float, d: int, anchor=None) -> "Grid":
        if anchor is None:
            anchor = (0.0,) * d
        return Grid(n=n, s=float(s), d=d, anchor=tuple(float(a) for a in anchor))

    @property
    def side(self) -> float:
        return self.s / self.n

    @cached_property
    def anchor_array(self) -> np.ndarray:
        a = np.asarray(self.anchor, dtype=float)
        a.setflags(write=False)
        return a

    def cell_index(self, tau) -> np.ndarray:
        """Integer lattice index of the cuboid containing tau.

        Works on a single d-vector or an (N, d) batch. The index k satisfies
        tau - (anchor + k*side) in (-side/2, side/2] with ties snapped to the
        inclusive side at relative tolerance 1e-12.
        """
        t = np.asarray(tau, dtype=float)
        v = (t - self.anchor_array) / self.side - 0.5
        nearest = np.rint(v)
        snap = np.abs(v - nearest) <= _TIE_RTOL * np.maximum(1.0, np.abs(v))
        k = np.ceil(v)
        k = np.where(snap, nearest, k)
        return k.astype(np.int64)

    def center_of_index(self, k) -> np.ndarray:
        return self.anchor_array + np.asarray(k, dtype=float) * self.side


def cuboid_center_of(grid: Grid, tau) -> np.ndarray:
    """Center of the half-open cuboid containing tau; idempotent."""
    return grid.center_of_index(grid.cell_index(tau))


def build_type_index(spec: FamilySpec, n: int, grid: Grid,
                     budget: int | None = None) -> TypeIndex:
    """Group all n-compositions by the cuboid of their average statistic."""
    if grid.n != n:
        raise SpecError(f"grid built for n={grid.n}, requested n={n}")
    if grid.d != spec.d:
        raise SpecError(f"grid dimension {grid.d} does not match family d={spec.d}")
    m = spec.alphabet.size
    check_composition_budget(n, m, budget)
    comps = composition_array(n, m)
    stats = (comps.astype(float) @ spec.tau_array) / n
    keys = grid.cell_index(stats)
    return group_compositions_by_key(
        spec, n, keys, comps, mode="quantized",
        centers_of_keys=grid.center_of_index,
        meta={"s": grid.s, "anchor": grid.anchor},
    )


def type_size_of_sequence(index: TypeIndex, xs) -> int:
    """Exact size of the type class containing the sequence."""
    return index.class_of_sequence(xs).size


def r_of(spec: FamilySpec, grid: Grid, xs, hull_slack: float | None = None) -> float:
    """Common part of the class-size sandwich at the sequence's cuboid center:
    -log2 p_(theta_c)(x^n) - (d/2) log2 n + d log2 s, with theta_c the
    likelihood maximizer at the center."""
    stat = suffstat(spec, xs)
    n = len(spec.symbol_indices(xs))
    if grid.n != n:
        raise SpecError(f"grid built for n={grid.n}, sequence has n={n}")
    center = cuboid_center_of(grid, stat)
    if hull_slack is None:
        hull_slack = grid.side * math.sqrt(spec.d) / 2 + 1e-9
    theta_c = mle(spec, center, hull_slack=hull_slack)
    ev = evaluate(spec, theta_c)
    log_p = n * (float(np.dot(theta_c, stat)) - ev.psi)
    return -log_p - spec.d / 2 * math.log2(n) + spec.d * math.log2(grid.s)


def f_of(spec: FamilySpec, grid: Grid, tau, c: float = 0.0,
         hull_slack: float | None = None) -> float:
    """Per-symbol upper-bound rate function for class sizes:
    -<theta_hat, tau> + psi(theta_hat) - (d/2n) log2 n + (d log2 s)/n
    + 3*kappa*s/n + c/n."""
    t = np.asarray(tau, dtype=float)
    n = grid.n
    if hull_slack is None:
        hull_slack = grid.side * math.sqrt(spec.d) / 2 + 1e-9
    theta = mle(spec, t, hull_slack=hull_slack)
    ev = evaluate(spec, theta)
    base = ev.psi - float(np.dot(theta, t))
    return (base
            - spec.d / (2 * n) * math.log2(n)
            + spec.d * math.log2(grid.s) / n
            + 3 * spec.kappa * grid.s / n
            + c / n)
