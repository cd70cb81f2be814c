"""Compositions and type-class indexes.

A composition (the vector of symbol counts) is the atom of all exact counting
for memoryless families: every sequence statistic is a function of it. Type
indexes group compositions into classes — by cuboid for the quantized mode,
by exact lattice point for the point mode — with exact big-integer sizes.

Compositions are enumerated in colexicographic order of the count vector
(last coordinate most significant). This order is part of the codec contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetError
from .family import FamilySpec

DEFAULT_COMPOSITION_BUDGET = 5_000_000


def multinomial(counts: Sequence[int]) -> int:
    """Exact multinomial coefficient n! / prod(k_i!)."""
    total = 0
    out = 1
    for k in counts:
        total += k
        out *= math.comb(total, k)
    return out


def composition_count(n: int, m: int) -> int:
    return math.comb(n + m - 1, m - 1)


def compositions_colex(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """All m-part compositions of n in ascending colexicographic order."""
    if m == 1:
        yield (n,)
        return
    for last in range(n + 1):
        for rest in compositions_colex(n - last, m - 1):
            yield rest + (last,)


def composition_array(n: int, m: int) -> np.ndarray:
    """The colex enumeration as an (N, m) int64 array."""
    if m == 1:
        return np.array([[n]], dtype=np.int64)
    if m == 2:
        ks = np.arange(n + 1, dtype=np.int64)
        return np.column_stack([n - ks, ks])
    blocks = []
    for last in range(n + 1):
        rest = composition_array(n - last, m - 1)
        col = np.full((rest.shape[0], 1), last, dtype=np.int64)
        blocks.append(np.hstack([rest, col]))
    return np.vstack(blocks)


def multinomials_colex(n: int, m: int) -> Iterator[int]:
    """Exact multinomial coefficients aligned with the colex enumeration.

    Runs incrementally (one big multiply per composition) instead of
    recomputing binomials from scratch.
    """
    if m == 1:
        yield 1
        return
    block = 1  # C(n, last), starting at last = 0
    for last in range(n + 1):
        for inner in multinomials_colex(n - last, m - 1):
            yield inner * block
        block = block * (n - last) // (last + 1)


@dataclass(frozen=True)
class Composition:
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def size(self) -> int:
        return multinomial(self.counts)

    def suffstat(self, spec: FamilySpec) -> np.ndarray:
        return (np.asarray(self.counts, dtype=float) @ spec.tau_array) / self.n


@dataclass(frozen=True)
class TypeClass:
    """One type class: a sortable integer key, its member compositions in
    colex order with exact per-member counts, and the exact class size."""

    key: tuple[int, ...]
    center: tuple[float, ...]
    members: tuple[tuple[int, ...], ...]
    member_sizes: tuple[int, ...]
    size: int


@dataclass(frozen=True)
class TypeIndex:
    """All type classes at one blocklength, in ascending key order."""

    spec: FamilySpec
    n: int
    mode: str  # "quantized" | "point"
    classes: tuple[TypeClass, ...]
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def alphabet_size(self) -> int:
        return self.spec.alphabet.size

    def total_size(self) -> int:
        return sum(cls.size for cls in self.classes)

    @property
    def _lookup(self) -> dict:
        table = self.__dict__.get("_lookup_table")
        if table is None:
            table = {}
            for i, cls in enumerate(self.classes):
                for counts in cls.members:
                    table[counts] = i
            object.__setattr__(self, "_lookup_table", table)
        return table

    def class_of_counts(self, counts: Sequence[int]) -> TypeClass:
        key = tuple(int(k) for k in counts)
        idx = self._lookup.get(key)
        if idx is None:
            raise ValueError(f"counts {key} do not belong to this index (n={self.n})")
        return self.classes[idx]

    def class_of_sequence(self, xs) -> TypeClass:
        idx = self.spec.symbol_indices(xs)
        if len(idx) != self.n:
            raise ValueError(f"sequence length {len(idx)} does not match index n={self.n}")
        counts = np.bincount(idx, minlength=self.spec.alphabet.size)
        return self.class_of_counts(counts)

    def export_table(self) -> str:
        """One row per class: center coordinates, member count, exact size."""
        lines = ["# center... members size"]
        for cls in self.classes:
            center = " ".join(repr(c) for c in cls.center)
            lines.append(f"{center} {len(cls.members)} {cls.size}")
        return "\n".join(lines) + "\n"


def check_composition_budget(n: int, m: int, budget: int | None) -> int:
    budget = DEFAULT_COMPOSITION_BUDGET if budget is None else budget
    needed = composition_count(n, m)
    if needed > budget:
        raise BudgetError("composition enumeration", needed, budget,
                          hint="raise the composition budget")
    return needed


def group_compositions_by_key(
    spec: FamilySpec,
    n: int,
    keys: np.ndarray,
    comps: np.ndarray,
    mode: str,
    centers_of_keys,
    meta: dict | None = None,
) -> TypeIndex:
    """Assemble a TypeIndex from per-composition integer keys.

    Classes are emitted in ascending lexicographic key order; members keep
    the colex enumeration order. ``centers_of_keys`` maps the (K, kdim)
    array of distinct keys to a (K, d) array of representative statistics.
    """
    sizes = list(multinomials_colex(n, spec.alphabet.size))
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    boundaries = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    centers = np.asarray(centers_of_keys(uniq), dtype=float)
    comp_rows = [tuple(row) for row in comps.tolist()]
    key_rows = [tuple(row) for row in uniq.tolist()]
    classes = []
    for ci in range(len(uniq)):
        rows = order[boundaries[ci]:boundaries[ci + 1]].tolist()
        members = tuple(comp_rows[r] for r in rows)
        member_sizes = tuple(sizes[r] for r in rows)
        classes.append(TypeClass(
            key=key_rows[ci],
            center=tuple(centers[ci].tolist()),
            members=members,
            member_sizes=member_sizes,
            size=sum(member_sizes),
        ))
    return TypeIndex(spec=spec, n=n, mode=mode, classes=tuple(classes),
                     meta=dict(meta or {}))
