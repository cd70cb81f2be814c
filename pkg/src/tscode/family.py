"""Exponential-family core over a finite alphabet.

Models are p(x) = 2^(<theta, tau(x)> - psi(theta)) for symbols x in {1..m},
with tau a fixed per-symbol statistic table and psi the base-2 log-normalizer.
Every exposed quantity is in bits; the parameter set is the closed L2 ball of
radius ``rho_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import SpecError

LN2 = math.log(2.0)

# Solver settings for the maximum-likelihood map. Newton runs while iterates
# stay inside the parameter ball; projected gradient takes over on the ball
# surface (clamped or boundary-statistic targets).
_GRAD_TOL = 1e-10
_NEWTON_MAX_ITER = 200
_PG_MAX_ITER = 20000


@dataclass(frozen=True)
class Alphabet:
    """Finite alphabet {1, ..., size}."""

    size: int

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 2:
            raise SpecError(f"alphabet size must be an integer >= 2, got {self.size!r}")

    def symbols(self) -> range:
        return range(1, self.size + 1)


@dataclass(frozen=True)
class FamilySpec:
    """A d-dimensional exponential family given by its statistic table.

    ``tau[x-1]`` is the length-d statistic vector of symbol x. The table must
    be minimal: the differences tau(x) - tau(1), x = 2..m, must span R^d.
    """

    alphabet: Alphabet
    d: int
    tau: tuple[tuple[float, ...], ...]
    rho_max: float

    def __post_init__(self):
        m = self.alphabet.size
        if not isinstance(self.d, int) or self.d < 1:
            raise SpecError(f"parameter dimension must be a positive integer, got {self.d!r}")
        if len(self.tau) != m:
            raise SpecError(f"tau table has {len(self.tau)} rows, expected {m}")
        for i, row in enumerate(self.tau):
            if len(row) != self.d:
                raise SpecError(f"tau row {i + 1} has length {len(row)}, expected {self.d}")
            if not all(math.isfinite(v) for v in row):
                raise SpecError(f"tau row {i + 1} contains a non-finite value")
        if not (isinstance(self.rho_max, (int, float)) and math.isfinite(self.rho_max) and self.rho_max > 0):
            raise SpecError(f"rho_max must be a finite positive real, got {self.rho_max!r}")
        t = np.asarray(self.tau, dtype=float)
        diffs = (t[1:] - t[0]).T
        if np.linalg.matrix_rank(diffs) < self.d:
            raise SpecError(
                f"statistic table is not minimal: rank of centered differences is "
                f"{np.linalg.matrix_rank(diffs)} < d = {self.d}"
            )

    @staticmethod
    def create(tau: Sequence[Sequence[float]], rho_max: float) -> "FamilySpec":
        """Build a spec from a statistic table, inferring alphabet size and d."""
        rows = tuple(tuple(float(v) for v in row) for row in tau)
        if not rows:
            raise SpecError("empty statistic table")
        return FamilySpec(Alphabet(len(rows)), len(rows[0]), rows, float(rho_max))

    @cached_property
    def tau_array(self) -> np.ndarray:
        a = np.asarray(self.tau, dtype=float)
        a.setflags(write=False)
        return a

    @property
    def kappa(self) -> float:
        """The statistic-approximation constant rho_max * sqrt(d) / 2."""
        return self.rho_max * math.sqrt(self.d) / 2.0

    def check_theta(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        if th.shape == () and self.d == 1:
            th = th.reshape(1)
        if th.shape != (self.d,):
            raise SpecError(f"theta has shape {th.shape}, expected ({self.d},)")
        if not np.all(np.isfinite(th)):
            raise SpecError("theta contains a non-finite value")
        if float(np.linalg.norm(th)) > self.rho_max * (1 + 1e-9) + 1e-12:
            raise SpecError(
                f"theta norm {np.linalg.norm(th):.6g} exceeds rho_max {self.rho_max:.6g}"
            )
        return th

    def symbol_indices(self, xs: Iterable[int]) -> np.ndarray:
        idx = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs)
        if idx.size == 0:
            raise ValueError("empty sequence")
        if idx.dtype.kind not in "iu":
            raise ValueError("sequence symbols must be integers")
        if idx.min() < 1 or idx.max() > self.alphabet.size:
            raise ValueError(
                f"sequence contains symbols outside 1..{self.alphabet.size}"
            )
        return idx - 1


@dataclass(frozen=True)
class ModelEval:
    """One model evaluated at a parameter: normalizer, pmf and its moments.

    ``hess_psi`` is the covariance of the statistic under the pmf (the
    curvature of the log-normalizer up to the ln 2 calculus factor).
    """

    theta: np.ndarray
    psi: float
    pmf: np.ndarray
    grad_psi: np.ndarray
    hess_psi: np.ndarray


def evaluate(spec: FamilySpec, theta) -> ModelEval:
    """Evaluate the model at theta with a max-shifted normalizer (bits)."""
    th = spec.check_theta(theta)
    exps = spec.tau_array @ th
    shift = float(exps.max())
    weights = np.exp2(exps - shift)
    psi = shift + math.log2(math.fsum(weights))
    pmf = np.exp2(exps - psi)
    grad = pmf @ spec.tau_array
    centered = spec.tau_array - grad
    hess = centered.T @ (pmf[:, None] * centered)
    hess = (hess + hess.T) / 2.0
    return ModelEval(theta=th, psi=psi, pmf=pmf, grad_psi=grad, hess_psi=hess)


def psi(spec: FamilySpec, theta) -> float:
    """Base-2 log-normalizer log2 sum_x 2^<theta, tau(x)>."""
    return evaluate(spec, theta).psi


def suffstat(spec: FamilySpec, xs) -> np.ndarray:
    """Per-sequence average statistic (1/n) sum_i tau(x_i)."""
    idx = spec.symbol_indices(xs)
    return spec.tau_array[idx].mean(axis=0)


def suffstat_of_counts(spec: FamilySpec, counts) -> np.ndarray:
    """Average statistic of any sequence with the given symbol counts."""
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n <= 0:
        raise ValueError("counts must sum to a positive blocklength")
    return (c @ spec.tau_array) / n


def seq_log_prob(spec: FamilySpec, theta, xs) -> float:
    """log2 probability of the sequence: n(<theta, tau(x^n)> - psi(theta))."""
    idx = spec.symbol_indices(xs)
    ev = evaluate(spec, theta)
    stat = spec.tau_array[idx].mean(axis=0)
    return len(idx) * (float(np.dot(ev.theta, stat)) - ev.psi)


def entropy(spec: FamilySpec, theta) -> float:
    """Entropy in bits/symbol via the closed form -<theta, grad psi> + psi."""
    ev = evaluate(spec, theta)
    return ev.psi - float(np.dot(ev.theta, ev.grad_psi))


def varentropy(spec: FamilySpec, theta) -> float:
    """Variance of the self-information -log2 p(X), in bits^2/symbol."""
    ev = evaluate(spec, theta)
    info = -np.log2(ev.pmf)
    h = float(np.dot(ev.pmf, info))
    second = float(np.dot(ev.pmf, info * info))
    return max(second - h * h, 0.0)


def hull_distance(spec: FamilySpec, tau_target) -> float:
    """Max-norm distance from tau_target to the convex hull of the tau rows."""
    t = np.asarray(tau_target, dtype=float)
    m, d = spec.alphabet.size, spec.d
    if d == 1:
        col = spec.tau_array[:, 0]
        return max(0.0, float(col.min() - t[0]), float(t[0] - col.max()))
    if m == d + 1:
        # simplex family: barycentric solve; exact membership test
        a = np.vstack([spec.tau_array.T, np.ones(m)])
        try:
            lam = np.linalg.solve(a, np.concatenate([t, [1.0]]))
            if lam.min() >= -1e-12:
                return 0.0
        except np.linalg.LinAlgError:
            pass
    # variables: lambda (m weights), t (distance); minimize t subject to
    # |W lambda - tau| <= t componentwise, lambda >= 0, sum lambda = 1
    c = np.zeros(m + 1)
    c[-1] = 1.0
    w = spec.tau_array.T
    a_ub = np.zeros((2 * d, m + 1))
    a_ub[:d, :m] = w
    a_ub[:d, -1] = -1.0
    a_ub[d:, :m] = -w
    a_ub[d:, -1] = -1.0
    b_ub = np.concatenate([t, -t])
    a_eq = np.zeros((1, m + 1))
    a_eq[0, :m] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"hull distance LP failed: {res.message}")
    return float(res.fun)


def _objective(spec: FamilySpec, tau_t: np.ndarray, theta: np.ndarray) -> float:
    exps = spec.tau_array @ theta
    shift = float(exps.max())
    p = shift + math.log2(math.fsum(np.exp2(exps - shift)))
    return float(np.dot(theta, tau_t)) - p


def _grad(spec: FamilySpec, tau_t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    exps = spec.tau_array @ theta
    shift = float(exps.max())
    w = np.exp2(exps - shift)
    pmf = w / w.sum()
    return tau_t - pmf @ spec.tau_array


def _project(theta: np.ndarray, rho: float) -> np.ndarray:
    nrm = float(np.linalg.norm(theta))
    if nrm <= rho:
        return theta
    return theta * (rho / nrm)


def _kkt_residual(spec: FamilySpec, tau_t: np.ndarray, theta: np.ndarray,
                  rho: float) -> float:
    g = _grad(spec, tau_t, theta)
    nrm = float(np.linalg.norm(theta))
    if nrm >= rho * (1 - 1e-12):
        radial = float(np.dot(g, theta)) / max(nrm, 1e-300)
        g = g - max(radial, 0.0) * theta / max(nrm, 1e-300)
    return float(np.linalg.norm(g))


def _sphere_newton(spec: FamilySpec, tau_t: np.ndarray, theta0: np.ndarray,
                   rho: float) -> np.ndarray | None:
    """Newton on the KKT system of the sphere-constrained maximizer.

    Solves tau - grad psi(theta) = lam * theta together with |theta| = rho;
    returns None if it fails to converge or leaves the admissible regime.
    """
    d = spec.d
    theta = theta0 * (rho / max(float(np.linalg.norm(theta0)), 1e-300))
    g = _grad(spec, tau_t, theta)
    lam = max(float(np.dot(g, theta)) / (rho * rho), 0.0)
    for _ in range(100):
        g = _grad(spec, tau_t, theta)
        f_top = g - lam * theta
        f_bot = 0.5 * (float(np.dot(theta, theta)) - rho * rho)
        fnorm = math.hypot(float(np.linalg.norm(f_top)), f_bot)
        if fnorm <= 1e-12:
            break
        ev = evaluate(spec, _project(theta, rho))
        jac = np.zeros((d + 1, d + 1))
        jac[:d, :d] = -LN2 * ev.hess_psi - lam * np.eye(d)
        jac[:d, d] = -theta
        jac[d, :d] = theta
        try:
            delta = np.linalg.solve(jac, -np.concatenate([f_top, [f_bot]]))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        # damp to keep the residual shrinking
        t = 1.0
        for _bt in range(40):
            cand_theta = theta + t * delta[:d]
            cand_lam = lam + t * delta[d]
            g2 = _grad(spec, tau_t, cand_theta)
            f2_top = g2 - cand_lam * cand_theta
            f2_bot = 0.5 * (float(np.dot(cand_theta, cand_theta)) - rho * rho)
            if math.hypot(float(np.linalg.norm(f2_top)), f2_bot) < fnorm:
                theta, lam = cand_theta, cand_lam
                break
            t /= 2.0
        else:
            return None
    else:
        return None
    if lam < -1e-9:
        return None
    theta = theta * (rho / max(float(np.linalg.norm(theta)), 1e-300))
    if _kkt_residual(spec, tau_t, theta, rho) > 1e-9:
        return None
    return theta


def mle(spec: FamilySpec, tau_target, hull_slack: float = 1e-9) -> np.ndarray:
    """Maximizer of <theta, tau> - psi(theta) over the rho_max ball.

    At an interior optimum the stationarity grad psi(theta) = tau holds to
    solver tolerance. Targets whose unconstrained optimum leaves the ball are
    clamped to the sphere. Targets farther than ``hull_slack`` (max-norm)
    outside the convex hull of the statistic rows raise ValueError.
    """
    tau_t = np.asarray(tau_target, dtype=float)
    if tau_t.shape == () and spec.d == 1:
        tau_t = tau_t.reshape(1)
    if tau_t.shape != (spec.d,):
        raise SpecError(f"tau target has shape {tau_t.shape}, expected ({spec.d},)")
    rho = spec.rho_max
    theta = np.zeros(spec.d)

    def finish_boundary(th: np.ndarray) -> np.ndarray:
        if hull_distance(spec, tau_t) > hull_slack:
            raise ValueError(
                f"statistic target {tau_t.tolist()} lies outside the convex hull "
                f"of the statistic rows by more than {hull_slack:g}"
            )
        return th

    sphere_streak = 0
    for _ in range(_NEWTON_MAX_ITER):
        g = _grad(spec, tau_t, theta)
        nrm = float(np.linalg.norm(theta))
        on_sphere = nrm >= rho * (1 - 1e-12)
        if not on_sphere:
            if float(np.linalg.norm(g)) <= _GRAD_TOL:
                return theta
            sphere_streak = 0
        else:
            if _kkt_residual(spec, tau_t, theta, rho) <= _GRAD_TOL:
                return finish_boundary(theta)
            sphere_streak += 1
            if spec.d == 1:
                # concave 1-D objective: an endpoint is optimal iff the
                # gradient still points outward there; otherwise the optimum
                # is interior and the iterate merely overshot onto the sphere
                if _grad(spec, tau_t, np.array([rho]))[0] >= 0:
                    return finish_boundary(np.array([rho]))
                if _grad(spec, tau_t, np.array([-rho]))[0] <= 0:
                    return finish_boundary(np.array([-rho]))
                theta = theta * (1.0 - 1e-9)
                sphere_streak = 0
                continue
            if sphere_streak >= 2:
                refined = _sphere_newton(spec, tau_t, theta, rho)
                if refined is not None:
                    return finish_boundary(refined)
                theta = _pg_phase(spec, tau_t, theta, rho, max_iter=_PG_MAX_ITER)
                if _kkt_residual(spec, tau_t, theta, rho) > 1e-8:
                    raise RuntimeError(
                        "constrained likelihood maximization did not converge; "
                        "the statistic target may be numerically degenerate"
                    )
                return finish_boundary(theta)
        ev = evaluate(spec, _project(theta, rho))
        hess = LN2 * ev.hess_psi
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = g
        if not np.all(np.isfinite(step)):
            step = g
        # backtracking on the projected candidate
        base = _objective(spec, tau_t, theta)
        if abs(float(np.dot(g, step))) < 1e-14 * (1.0 + abs(base)):
            # within float noise of the optimum: take the pure Newton step
            theta = _project(theta + step, rho)
            continue
        t = 1.0
        cand = theta
        for _bt in range(60):
            cand = _project(theta + t * step, rho)
            move = cand - theta
            if _objective(spec, tau_t, cand) >= base + 1e-4 * float(np.dot(g, move)):
                break
            t /= 2.0
        else:
            # Newton direction unusable after projection; take a gradient step
            t = 1.0
            for _bt in range(60):
                cand = _project(theta + t * g, rho)
                move = cand - theta
                if _objective(spec, tau_t, cand) >= base + 1e-4 * float(np.dot(g, move)):
                    break
                t /= 2.0
        theta = cand

    # iteration budget exhausted; report the boundary case through the
    # same verification path
    if float(np.linalg.norm(theta)) >= rho * (1 - 1e-12):
        return finish_boundary(theta)
    return theta


def _pg_phase(spec: FamilySpec, tau_t: np.ndarray, theta: np.ndarray,
              rho: float, max_iter: int) -> np.ndarray:
    step_size = 1.0
    for _ in range(max_iter):
        if _kkt_residual(spec, tau_t, theta, rho) <= _GRAD_TOL:
            break
        g = _grad(spec, tau_t, theta)
        base = _objective(spec, tau_t, theta)
        step_size = min(step_size * 4.0, 1e6)
        cand = theta
        while step_size > 1e-18:
            cand = _project(theta + step_size * g, rho)
            move = cand - theta
            if _objective(spec, tau_t, cand) >= base + 1e-4 * float(np.dot(g, move)):
                break
            step_size /= 2.0
        theta = cand
    return theta
