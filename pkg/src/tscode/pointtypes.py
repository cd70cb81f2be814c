"""Point type classes: equality classes of the exact statistic.

Two sequences share a point class iff their average statistics are exactly
equal, i.e. iff they are equiprobable under every model of the family. The
user declares an exact decomposition of each statistic coordinate over named
pairwise rationally-independent constants with rational coefficients; the
integer lattice map L and its rank d_prime are derived from it by exact
rational elimination. All class keys are integer tuples — no tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import SpecError
from .family import FamilySpec, evaluate, mle
from .typeclass import (
    TypeIndex,
    check_composition_budget,
    composition_array,
    group_compositions_by_key,
)


@dataclass(frozen=True)
class ExactStatMap:
    """Declared exact decomposition of the statistic table.

    For coordinate j the symbols satisfy
        tau(x)[j] = tau(1)[j] + sum_t basis[j][t] * coeffs[x][j][t]
    with rational coeffs and basis constants asserted pairwise independent
    over the rationals. ``basis_hints`` are decimal display values only.
    """

    spec: FamilySpec
    basis_names: tuple[tuple[str, ...], ...]
    basis_hints: tuple[tuple[float, ...], ...]
    coeffs: tuple[tuple[tuple[Fraction, ...], ...], ...]  # [symbol][coord][t]

    def __post_init__(self):
        m, d = self.spec.alphabet.size, self.spec.d
        if len(self.basis_names) != d or len(self.basis_hints) != d:
            raise SpecError(f"basis must declare {d} coordinate groups")
        for j, (names, hints) in enumerate(zip(self.basis_names, self.basis_hints)):
            if not names:
                raise SpecError(f"coordinate {j + 1} declares an empty basis")
            if len(names) != len(hints):
                raise SpecError(f"coordinate {j + 1}: names and hints differ in length")
            if len(set(names)) != len(names):
                raise SpecError(
                    f"coordinate {j + 1} declares a dependent basis: repeated name"
                )
            for a in range(len(names)):
                for b in range(a + 1, len(names)):
                    if hints[a] == hints[b]:
                        raise SpecError(
                            f"coordinate {j + 1} declares a dependent basis: "
                            f"constants {names[a]!r} and {names[b]!r} share the value "
                            f"{hints[a]!r}"
                        )
        if len(self.coeffs) != m:
            raise SpecError(f"coefficients must cover all {m} symbols")
        for x, per_coord in enumerate(self.coeffs):
            if len(per_coord) != d:
                raise SpecError(f"symbol {x + 1}: expected {d} coordinate groups")
            for j, vec in enumerate(per_coord):
                if len(vec) != len(self.basis_names[j]):
                    raise SpecError(
                        f"symbol {x + 1}, coordinate {j + 1}: expected "
                        f"{len(self.basis_names[j])} coefficients"
                    )
        for j in range(d):
            for t, val in enumerate(self.coeffs[0][j]):
                if val != 0:
                    raise SpecError(
                        "symbol 1 must have zero coefficients (the offset is tau(1))"
                    )

    @staticmethod
    def from_rational_tau(spec: FamilySpec) -> "ExactStatMap":
        """Shortcut for all-rational tables: basis {1} per coordinate."""
        m, d = spec.alphabet.size, spec.d
        coeffs = tuple(
            tuple(
                (Fraction(spec.tau[x][j]) - Fraction(spec.tau[0][j]),)
                for j in range(d)
            )
            for x in range(m)
        )
        return ExactStatMap(
            spec=spec,
            basis_names=tuple(("1",) for _ in range(d)),
            basis_hints=tuple((1.0,) for _ in range(d)),
            coeffs=coeffs,
        )

    def hint_residuals(self) -> list[float]:
        """Per-symbol-coordinate gap between the table and the hint expansion."""
        out = []
        for x in range(self.spec.alphabet.size):
            for j in range(self.spec.d):
                approx = self.spec.tau[0][j] + sum(
                    h * float(c) for h, c in zip(self.basis_hints[j], self.coeffs[x][j])
                )
                out.append(abs(approx - self.spec.tau[x][j]))
        return out


@dataclass(frozen=True)
class LatticeMap:
    """Reduced integer representation of the statistic.

    ``L[x-1]`` is the d_prime integer vector of symbol x with L(1) = 0;
    ``row_selection`` records which cleared-denominator rows were kept.
    ``recon`` is the exact rational matrix taking L(x) back to
    tau(x) - tau(1); it reconstructs tau from any lattice average.
    """

    d_prime: int
    L: tuple[tuple[int, ...], ...]
    row_selection: tuple[int, ...]
    recon: tuple[tuple[Fraction, ...], ...]
    tau1: tuple[float, ...]

    @cached_property
    def L_array(self) -> np.ndarray:
        a = np.asarray(self.L, dtype=np.int64)
        a.setflags(write=False)
        return a

    @cached_property
    def recon_array(self) -> np.ndarray:
        a = np.asarray([[float(v) for v in row] for row in self.recon])
        a.setflags(write=False)
        return a

    def tau_of_point(self, ell) -> np.ndarray:
        """Statistic vector corresponding to a (possibly fractional) point."""
        e = np.asarray([float(v) for v in ell], dtype=float)
        if e.shape != (self.d_prime,):
            raise SpecError(f"lattice point has shape {e.shape}, expected ({self.d_prime},)")
        return np.asarray(self.tau1) + self.recon_array @ e


@dataclass(frozen=True)
class LatticePoint:
    """Exact class key n * L(x^n) of a blocklength-n sequence."""

    scaled: tuple[int, ...]
    n: int


def _rational_rank_selection(rows: list[list[Fraction]]) -> tuple[int, ...]:
    """Indices of a maximal independent row set, by exact Gaussian elimination."""
    selected: list[int] = []
    basis: list[list[Fraction]] = []
    ncols = len(rows[0]) if rows else 0
    pivots: list[int] = []
    for i, row in enumerate(rows):
        work = list(row)
        for b, piv in zip(basis, pivots):
            factor = work[piv] / b[piv]
            if factor:
                for c in range(ncols):
                    work[c] -= factor * b[c]
        piv_col = next((c for c in range(ncols) if work[c] != 0), None)
        if piv_col is not None:
            selected.append(i)
            basis.append(work)
            pivots.append(piv_col)
    return tuple(selected)


def _solve_exact(gram: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve a small nonsingular rational system by Gaussian elimination."""
    k = len(gram)
    aug = [list(gram[i]) + [rhs[i]] for i in range(k)]
    for col in range(k):
        piv = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if piv is None:
            raise SpecError("degenerate lattice system (rank drop in reconstruction)")
        aug[col], aug[piv] = aug[piv], aug[col]
        for r in range(k):
            if r != col and aug[r][col]:
                f = aug[r][col] / aug[col][col]
                for c in range(col, k + 1):
                    aug[r][c] -= f * aug[col][c]
    return [aug[i][k] / aug[i][i] for i in range(k)]


def derive_lattice(stat_map: ExactStatMap) -> LatticeMap:
    """Clear denominators per row, select independent rows exactly, reduce."""
    spec = stat_map.spec
    m, d = spec.alphabet.size, spec.d
    # flattened (coordinate, basis-element) rows over symbols
    cleared_rows: list[list[int]] = []
    for j in range(d):
        for t in range(len(stat_map.basis_names[j])):
            col = [stat_map.coeffs[x][j][t] for x in range(m)]
            denom_lcm = 1
            for v in col:
                denom_lcm = denom_lcm * v.denominator // math.gcd(denom_lcm, v.denominator)
            cleared_rows.append([int(v * denom_lcm) for v in col])
    # independence over symbols 2..m (the symbol-1 column is zero)
    frac_rows = [[Fraction(v) for v in row[1:]] for row in cleared_rows]
    selection = _rational_rank_selection(frac_rows)
    d_prime = len(selection)
    if d_prime == 0:
        raise SpecError("lattice map is trivial: all statistic rows coincide")
    L = tuple(
        tuple(cleared_rows[r][x] for r in selection) for x in range(m)
    )
    # exact affine reconstruction M with M @ L(x) = tau(x) - tau(1)
    lmat = [[Fraction(L[x][i]) for x in range(1, m)] for i in range(d_prime)]
    gram = [
        [sum(lmat[a][c] * lmat[b][c] for c in range(m - 1)) for b in range(d_prime)]
        for a in range(d_prime)
    ]
    recon_rows = []
    worst = 0.0
    for j in range(d):
        targets = [Fraction(spec.tau[x][j]) - Fraction(spec.tau[0][j]) for x in range(1, m)]
        rhs = [sum(lmat[a][c] * targets[c] for c in range(m - 1)) for a in range(d_prime)]
        sol = _solve_exact(gram, rhs)
        recon_rows.append(tuple(sol))
        for c in range(m - 1):
            resid = float(sum(sol[a] * lmat[a][c] for a in range(d_prime)) - targets[c])
            worst = max(worst, abs(resid))
    if worst > 1e-9:
        raise SpecError(
            f"declared decomposition is inconsistent with the statistic table "
            f"(reconstruction residual {worst:.3g})"
        )
    return LatticeMap(
        d_prime=d_prime,
        L=L,
        row_selection=selection,
        recon=tuple(recon_rows),
        tau1=tuple(float(v) for v in spec.tau[0]),
    )


def point_class_of(lmap: LatticeMap, spec: FamilySpec, xs) -> LatticePoint:
    """Exact integer class key: the sum of per-symbol lattice vectors."""
    idx = spec.symbol_indices(xs)
    scaled = lmap.L_array[idx].sum(axis=0)
    return LatticePoint(scaled=tuple(int(v) for v in scaled), n=len(idx))


def point_type_index(spec: FamilySpec, lmap: LatticeMap, n: int,
                     budget: int | None = None) -> TypeIndex:
    """Group all n-compositions by their exact scaled lattice point."""
    m = spec.alphabet.size
    check_composition_budget(n, m, budget)
    comps = composition_array(n, m)
    keys = comps @ lmap.L_array

    def centers_of_keys(uniq):
        return np.asarray(lmap.tau1) + (uniq.astype(float) / n) @ lmap.recon_array.T

    return group_compositions_by_key(
        spec, n, keys, comps, mode="point",
        centers_of_keys=centers_of_keys,
        meta={"lattice_map": lmap},
    )


def f0_of(spec: FamilySpec, lmap: LatticeMap, n: int, ell, c: float = 0.0) -> float:
    """Per-symbol point-class size rate at the lattice point ell:
    -(<theta_hat, tau(ell)> - psi(theta_hat)) - (d'/2n) log2(2 pi n) + c/n."""
    tau = lmap.tau_of_point([Fraction(v) if not isinstance(v, Fraction) else v
                             for v in np.atleast_1d(ell)])
    theta = mle(spec, tau)
    ev = evaluate(spec, theta)
    base = ev.psi - float(np.dot(theta, tau))
    return base - lmap.d_prime / (2 * n) * math.log2(2 * math.pi * n) + c / n
