"""First-order Markov families with pair statistics and a single normalizer.

Transition probabilities are p(b|a) = 2^(<theta, tau2(a,b)> - psi(theta))
with one global psi, which forces every row sum sum_b 2^<theta, tau2(a,b)>
to be identical; specs violating that row normalization are rejected. The
initial symbol x0 is a required field known to encoder and decoder.

Type classes quantize the pair-statistic average over cuboids exactly as in
the memoryless case; sizes are exact path counts from exhaustive enumeration
(Monte Carlo gives unbiased estimates with standard errors above the budget).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BudgetError, SpecError
from .family import Alphabet
from .quantized import Grid
from .rates import FitReport, RateReport, _codebook_report, fit_excess, gaussian_Qinv

DEFAULT_PATH_BUDGET = 2_000_000


@dataclass(frozen=True)
class MarkovFamilySpec:
    """Markov exponential family: pair statistic table and initial symbol."""

    alphabet: Alphabet
    d: int
    tau2: tuple[tuple[float, ...], ...]  # m*m rows, row-major over (from, to)
    rho_max: float
    x0: int

    def __post_init__(self):
        m = self.alphabet.size
        if len(self.tau2) != m * m:
            raise SpecError(f"tau2 must have {m * m} rows, got {len(self.tau2)}")
        for i, row in enumerate(self.tau2):
            if len(row) != self.d:
                raise SpecError(f"tau2 row {i + 1} has length {len(row)}, expected {self.d}")
            if not all(math.isfinite(v) for v in row):
                raise SpecError(f"tau2 row {i + 1} contains a non-finite value")
        if not (math.isfinite(self.rho_max) and self.rho_max > 0):
            raise SpecError(f"rho_max must be a finite positive real, got {self.rho_max!r}")
        if not (isinstance(self.x0, int) and 1 <= self.x0 <= m):
            raise SpecError(f"x0 must be a symbol in 1..{m}, got {self.x0!r}")
        self._validate_row_normalization()

    @staticmethod
    def create(tau2, rho_max: float, x0: int) -> "MarkovFamilySpec":
        rows = tuple(tuple(float(v) for v in row) for row in tau2)
        m = math.isqrt(len(rows))
        if m * m != len(rows) or m < 2:
            raise SpecError(f"tau2 must have a square number (>=4) of rows, got {len(rows)}")
        return MarkovFamilySpec(Alphabet(m), len(rows[0]) if rows else 0,
                                rows, float(rho_max), int(x0))

    @cached_property
    def tau2_array(self) -> np.ndarray:
        a = np.asarray(self.tau2, dtype=float).reshape(
            self.alphabet.size, self.alphabet.size, self.d)
        a.setflags(write=False)
        return a

    def _theta_grid(self) -> list[np.ndarray]:
        pts = [np.zeros(self.d)]
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = self.rho_max
            pts.append(e.copy())
            pts.append(-e)
        rng = np.random.Generator(np.random.Philox(20240117))
        for _ in range(16):
            v = rng.normal(size=self.d)
            v /= max(np.linalg.norm(v), 1e-300)
            pts.append(v * self.rho_max)
            pts.append(v * self.rho_max / 2)
        return pts

    def _row_log_sums(self, theta: np.ndarray) -> np.ndarray:
        exps = self.tau2_array @ theta  # (m, m)
        shift = exps.max(axis=1, keepdims=True)
        return shift[:, 0] + np.log2(np.exp2(exps - shift).sum(axis=1))

    def _validate_row_normalization(self):
        for theta in self._theta_grid():
            sums = self._row_log_sums(theta)
            spread = np.abs(sums - sums[0])
            if spread.max() > 1e-9:
                bad = int(np.argmax(spread)) + 1
                raise SpecError(
                    f"row normalization violated at theta={theta.tolist()}: state "
                    f"{bad} has log-sum {sums[bad - 1]:.12g} vs state 1 "
                    f"{sums[0]:.12g} (single-normalizer family requires equal row sums)"
                )

    def check_theta(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        if th.shape == () and self.d == 1:
            th = th.reshape(1)
        if th.shape != (self.d,):
            raise SpecError(f"theta has shape {th.shape}, expected ({self.d},)")
        if float(np.linalg.norm(th)) > self.rho_max * (1 + 1e-9) + 1e-12:
            raise SpecError(
                f"theta norm {np.linalg.norm(th):.6g} exceeds rho_max {self.rho_max:.6g}"
            )
        return th

    def psi(self, theta) -> float:
        th = self.check_theta(theta)
        sums = self._row_log_sums(th)
        spread = np.abs(sums - sums[0])
        if spread.max() > 1e-9:
            bad = int(np.argmax(spread)) + 1
            raise SpecError(f"row normalization violated at state {bad}")
        return float(sums[0])


def transition_matrix(mspec: MarkovFamilySpec, theta) -> np.ndarray:
    """Row-stochastic matrix 2^(<theta, tau2(a,b)> - psi(theta))."""
    th = mspec.check_theta(theta)
    psi = mspec.psi(th)
    return np.exp2(mspec.tau2_array @ th - psi)


def stationary_dist(p: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible row-stochastic matrix."""
    p = np.asarray(p, dtype=float)
    m = p.shape[0]
    if p.shape != (m, m) or np.any(p < 0):
        raise ValueError("transition matrix must be square and nonnegative")
    if np.abs(p.sum(axis=1) - 1).max() > 1e-9:
        raise ValueError("transition matrix rows must sum to 1")
    _check_irreducible(p)
    a = np.vstack([p.T - np.eye(m), np.ones((1, m))])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = np.abs(pi @ p - pi).max()
    if residual > 1e-12:
        raise ValueError(f"stationary solve residual {residual:.3g} exceeds 1e-12")
    return pi


def _check_irreducible(p: np.ndarray):
    m = p.shape[0]
    adj = p > 0
    for mat in (adj, adj.T):
        reached = np.zeros(m, dtype=bool)
        reached[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for a in frontier:
                for b in np.nonzero(mat[a])[0]:
                    if not reached[b]:
                        reached[b] = True
                        nxt.append(int(b))
            frontier = nxt
        if not reached.all():
            raise ValueError("chain is reducible (zero-pattern reachability failed)")


def entropy_rate(mspec: MarkovFamilySpec, theta) -> float:
    """Stationary entropy rate sum_a pi(a) H(P(.|a)), bits/symbol."""
    p = transition_matrix(mspec, theta)
    pi = stationary_dist(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log2(p), 0.0)
    return float(-(pi @ plogp.sum(axis=1)))


def additive_variance(p: np.ndarray, pi: np.ndarray, g: np.ndarray) -> float:
    """Asymptotic variance per step of sum_i g(X_{i-1}, X_i).

    Fundamental-matrix route: solve the Poisson equation
    (I - P + 1 pi^T) u = h - gbar and return the stationary second moment of
    the martingale increments g(a,b) - gbar + u(b) - u(a).
    """
    m = p.shape[0]
    h = (p * g).sum(axis=1)
    gbar = float(pi @ h)
    z = np.linalg.inv(np.eye(m) - p + np.outer(np.ones(m), pi))
    u = z @ (h - gbar)
    diff = g - gbar + u[None, :] - u[:, None]
    return float(pi @ (p * diff * diff).sum(axis=1))


def varentropy_rate(mspec: MarkovFamilySpec, theta) -> float:
    """Asymptotic variance rate of -log2 p(X^n), bits^2/symbol."""
    p = transition_matrix(mspec, theta)
    pi = stationary_dist(p)
    with np.errstate(divide="ignore"):
        g = np.where(p > 0, -np.log2(p), 0.0)
    return max(additive_variance(p, pi, g), 0.0)


@dataclass(frozen=True)
class MarkovTypeClass:
    """One Markov type class: member paths (packed base-m integers, sorted
    ascending = path-lexicographic) and the exact size."""

    key: tuple[int, ...]
    center: tuple[float, ...]
    paths: np.ndarray
    size: int


@dataclass(frozen=True)
class MarkovTypeIndex:
    mspec: MarkovFamilySpec
    n: int
    grid: Grid
    classes: tuple[MarkovTypeClass, ...]
    mode: str = "markov"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def alphabet_size(self) -> int:
        return self.mspec.alphabet.size

    @property
    def spec(self):
        return self.mspec

    def total_size(self) -> int:
        return sum(cls.size for cls in self.classes)

    def to_indices(self, xs) -> np.ndarray:
        idx = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs)
        if idx.size == 0:
            raise ValueError("empty sequence")
        if idx.min() < 1 or idx.max() > self.alphabet_size:
            raise ValueError(f"sequence contains symbols outside 1..{self.alphabet_size}")
        return idx - 1

    def pair_stat_sum(self, xs) -> np.ndarray:
        """Sum over steps of tau2(x_{i-1}, x_i), starting from x0."""
        digits = self.to_indices(xs)
        m = self.alphabet_size
        prev = np.concatenate([[self.mspec.x0 - 1], digits[:-1]])
        flat = self.mspec.tau2_array.reshape(m * m, self.mspec.d)
        return flat[prev * m + digits].sum(axis=0)

    @property
    def _lookup(self) -> dict:
        table = self.__dict__.get("_lookup_table")
        if table is None:
            table = {cls.key: i for i, cls in enumerate(self.classes)}
            object.__setattr__(self, "_lookup_table", table)
        return table

    def class_of_sequence(self, xs) -> MarkovTypeClass:
        digits = self.to_indices(xs)
        if len(digits) != self.n:
            raise ValueError(f"sequence length {len(digits)} does not match index n={self.n}")
        stat = self.pair_stat_sum(xs) / self.n
        key = tuple(int(v) for v in self.grid.cell_index(stat))
        idx = self._lookup.get(key)
        if idx is None:
            raise ValueError(f"statistic cell {key} not present in this index")
        return self.classes[idx]


def _all_path_stats(mspec: MarkovFamilySpec, n: int) -> np.ndarray:
    """Pair-statistic sums for every path, ordered by packed path id."""
    m = mspec.alphabet.size
    total = m ** n
    ids = np.arange(total, dtype=np.int64)
    flat = mspec.tau2_array.reshape(m * m, mspec.d)
    stats = np.zeros((total, mspec.d))
    prev = np.full(total, mspec.x0 - 1, dtype=np.int64)
    for i in range(n):
        digit = (ids // (m ** (n - 1 - i))) % m
        stats += flat[prev * m + digit]
        prev = digit
    return stats


@dataclass(frozen=True)
class MarkovSizeEstimates:
    """Monte Carlo class-size estimates: unbiased, with standard errors."""

    n: int
    samples: int
    seed: int
    entries: tuple[tuple[tuple[int, ...], float, float], ...]  # key, est, se


def markov_type_index(mspec: MarkovFamilySpec, n: int, grid: Grid,
                      method: str = "exhaustive",
                      budget_paths: int | None = None,
                      samples: int = 100_000, seed: int = 0):
    """Quantized pair-statistic type classes at blocklength n.

    Exhaustive enumeration gives exact sizes (and the codec's member order);
    above the path budget, the Monte Carlo method estimates sizes as
    |X|^n times the empirical cell frequency under uniform path sampling.
    """
    if grid.n != n:
        raise SpecError(f"grid built for n={grid.n}, requested n={n}")
    if grid.d != mspec.d:
        raise SpecError(f"grid dimension {grid.d} does not match family d={mspec.d}")
    m = mspec.alphabet.size
    total = m ** n
    budget = DEFAULT_PATH_BUDGET if budget_paths is None else budget_paths
    if method == "exhaustive":
        if total > budget:
            raise BudgetError("path enumeration", total, budget,
                              hint="use method='montecarlo'")
        stats = _all_path_stats(mspec, n)
        keys = grid.cell_index(stats / n)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
        centers = grid.center_of_index(uniq)
        classes = []
        for ci in range(len(uniq)):
            paths = np.sort(order[bounds[ci]:bounds[ci + 1]])
            classes.append(MarkovTypeClass(
                key=tuple(int(v) for v in uniq[ci]),
                center=tuple(float(v) for v in centers[ci]),
                paths=paths,
                size=int(paths.size),
            ))
        return MarkovTypeIndex(mspec=mspec, n=n, grid=grid, classes=tuple(classes),
                               meta={"path_stats": stats, "class_of_path": inverse})
    if method == "montecarlo":
        rng = np.random.Generator(np.random.Philox(seed))
        flat = mspec.tau2_array.reshape(m * m, mspec.d)
        digits = rng.integers(0, m, size=(samples, n), dtype=np.int64)
        prev = np.concatenate(
            [np.full((samples, 1), mspec.x0 - 1, dtype=np.int64), digits[:, :-1]], axis=1)
        stats = flat[(prev * m + digits).ravel()].reshape(samples, n, mspec.d).sum(axis=1)
        keys = grid.cell_index(stats / n)
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        entries = []
        for row, hits in zip(uniq, counts):
            frac = hits / samples
            # smoothed fraction inside the binomial standard error only
            p_smooth = (hits + 0.5) / (samples + 1)
            se = total * math.sqrt(p_smooth * (1 - p_smooth) / samples)
            entries.append((tuple(int(v) for v in row), total * frac, se))
        return MarkovSizeEstimates(n=n, samples=samples, seed=seed,
                                   entries=tuple(entries))
    raise ValueError(f"unknown method {method!r}")


def markov_codec(mspec: MarkovFamilySpec, n: int, grid: Grid,
                 budget_paths: int | None = None):
    """Sequence ordering over the exhaustive Markov index, ready to encode."""
    from .codec import ClassOrdering
    return ClassOrdering(markov_type_index(mspec, n, grid,
                                           budget_paths=budget_paths))


def markov_class_masses(index: MarkovTypeIndex, theta) -> list[float]:
    """Exact per-class probabilities under the chain started at x0."""
    th = index.mspec.check_theta(theta)
    psi = index.mspec.psi(th)
    stats = index.meta["path_stats"]
    inverse = index.meta["class_of_path"]
    logp = stats @ th - index.n * psi
    w = np.exp2(logp)
    sums = np.bincount(inverse, weights=w, minlength=len(index.classes))
    return [float(v) for v in sums]


def markov_m_eps(index: MarkovTypeIndex, theta_star, epsilon: float) -> RateReport:
    masses = markov_class_masses(index, theta_star)
    return _codebook_report(index.classes, masses, index.n, epsilon, index.mode)


def markov_eps_rate(index: MarkovTypeIndex, theta_star, epsilon: float) -> float:
    return markov_m_eps(index, theta_star, epsilon).rate


def markov_third_order_fit(mspec: MarkovFamilySpec, theta_star, n_list,
                           epsilon: float, s: float = 1.0, anchor=None,
                           budget_paths: int | None = None) -> FitReport:
    """Excess-rate slope fit for the Markov code; diagnostic at desk scale
    (exhaustive blocklengths are small, so residuals run wide)."""
    ns = list(n_list)
    if len(ns) < 3:
        raise ValueError("need at least 3 blocklengths to fit a slope")
    h = entropy_rate(mspec, theta_star)
    sigma = math.sqrt(varentropy_rate(mspec, theta_star))
    qi = gaussian_Qinv(epsilon)
    points = []
    for n in ns:
        grid = Grid.create(n=n, s=s, d=mspec.d, anchor=anchor)
        index = markov_type_index(mspec, n, grid, budget_paths=budget_paths)
        rate = markov_eps_rate(index, theta_star, epsilon)
        y = n * rate - n * h - sigma * math.sqrt(n) * qi
        points.append((n, rate, y))
    slope, intercept, residuals = fit_excess(points)
    return FitReport(slope=slope, intercept=intercept, residuals=residuals,
                     points=tuple(points), mode="markov", epsilon=epsilon)
