"""Monte Carlo studies: Green-function tail exponents, trap-event scaling,
and lattice trajectory simulations with power-law fits.

The trajectory engine is the hot path (the reference experiment walks 10^9
steps), so it is a numba kernel: one lazily grown environment per
trajectory, stored as a hash map from packed site coordinates to cumulative
transition probabilities. Each trajectory seeds its own generator from
(master seed, trajectory index), so results are independent of worker count
and bit-reproducible for a fixed master seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit, prange, types
from numba.typed import Dict
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .digraph import (
    NotStronglyConnected,
    WeightedDigraph,
    beta_edges,
    boundary_edges,
    edge_tails,
    is_strongly_connected,
)
from .environment import sample_environment_batch
from .integrability import min_beta_at


class DegenerateTail(ValueError):
    """G(o,o) is almost surely bounded; there is no power tail to fit."""


class EmptyWindow(ValueError):
    pass


# ---------------------------------------------------------------------------
# Green-function tail exponents


@dataclass
class TailEstimate:
    """Tail exponent of P(G(o,o) > t) from two estimators.

    The Hill estimator uses the top k order statistics; the regression
    estimator fits log survival against log t between two upper quantiles.
    """

    n_samples: int
    hill_exponent: float
    hill_ci: tuple
    hill_k: int
    hill_threshold: float
    regression_exponent: float
    regression_ci: tuple
    regression_range: tuple
    survival_t: np.ndarray
    survival_p: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_samples": self.n_samples,
                "hill": {
                    "exponent": self.hill_exponent,
                    "ci95": list(self.hill_ci),
                    "k": self.hill_k,
                    "threshold": self.hill_threshold,
                },
                "regression": {
                    "exponent": self.regression_exponent,
                    "ci95": list(self.regression_ci),
                    "t_range": list(self.regression_range),
                },
            }
        )

    def survival_csv(self) -> str:
        lines = ["t,survival"]
        for t, p in zip(self.survival_t, self.survival_p):
            lines.append(f"{float(t)!r},{float(p)!r}")
        return "\n".join(lines) + "\n"


def _green_oo_batch(g: WeightedDigraph, o: str, omegas: np.ndarray) -> np.ndarray:
    """G(o,o) for a batch of environments (one dense solve per sample)."""
    nv = len(g.vertices)
    vid = {v: i for i, v in enumerate(g.vertices)}
    m = omegas.shape[0]
    a = np.broadcast_to(np.eye(nv), (m, nv, nv)).copy()
    for e in g.edges:
        if e.head in vid:
            a[:, vid[e.tail], vid[e.head]] -= omegas[:, e.eid]
    rhs = np.zeros((m, nv, 1))
    rhs[:, vid[o], 0] = 1.0
    return np.linalg.solve(a, rhs)[:, vid[o], 0]


def green_tail(
    g: WeightedDigraph,
    o: str,
    n_samples: int,
    rng: np.random.Generator,
    hill_k: int | None = None,
    survival_quantiles: tuple = (0.90, 0.999),
    n_thresholds: int = 25,
    chunk: int = 20000,
) -> TailEstimate:
    """Sample environments i.i.d., compute G(o,o) exactly per sample, and
    estimate the survival-function power.

    The regression variant fits the upper tail between the given survival
    quantiles (one to three decades of probability); the Hill variant uses
    k = ceil(n^0.6) top order statistics unless overridden.
    """
    if not math.isfinite(min_beta_at(g, o).min_beta):
        raise DegenerateTail(f"no strongly connected edge set through {o!r}")
    draws = np.empty(n_samples)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        omegas = sample_environment_batch(g, rng, m)
        draws[done : done + m] = _green_oo_batch(g, o, omegas)
        done += m
    draws.sort()

    k = hill_k if hill_k is not None else math.ceil(n_samples**0.6)
    k = min(k, n_samples - 1)
    top = draws[n_samples - k :]
    threshold = draws[n_samples - k - 1]
    log_excess = np.log(top / threshold).sum()
    if log_excess <= 0.0:
        raise DegenerateTail("top order statistics are ties; no tail to fit")
    hill = k / log_excess
    hill_ci = (hill * (1.0 - 1.96 / math.sqrt(k)), hill * (1.0 + 1.96 / math.sqrt(k)))

    t_lo = np.quantile(draws, survival_quantiles[0])
    t_hi = np.quantile(draws, survival_quantiles[1])
    if not t_hi > t_lo > 0.0:
        raise DegenerateTail("upper quantiles coincide; no tail to fit")
    ts = np.logspace(math.log10(t_lo), math.log10(t_hi), n_thresholds)
    surv = (n_samples - np.searchsorted(draws, ts, side="right")) / n_samples
    keep = surv > 0
    x = np.log(ts[keep])
    y = np.log(surv[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    slope_se = math.sqrt(resid @ resid / dof / ((x - x.mean()) @ (x - x.mean())))
    reg = -slope
    reg_ci = (reg - 1.96 * slope_se, reg + 1.96 * slope_se)

    ranks = np.unique(np.geomspace(1, n_samples, min(1000, n_samples)).astype(int)) - 1
    surv_t = draws[ranks]
    surv_p = (n_samples - 1.0 - ranks) / n_samples
    return TailEstimate(
        n_samples=n_samples,
        hill_exponent=float(hill),
        hill_ci=hill_ci,
        hill_k=int(k),
        hill_threshold=float(threshold),
        regression_exponent=float(reg),
        regression_ci=reg_ci,
        regression_range=(float(t_lo), float(t_hi)),
        survival_t=surv_t,
        survival_p=surv_p,
    )


# ---------------------------------------------------------------------------
# Trap-event probability scaling


@dataclass
class TrapScaling:
    """P(every vertex of A̲ has at most eps of mass on exiting edges).

    ``estimate`` is the importance-sampled Monte Carlo value (the event has
    probability of order eps^beta and is unreachable by naive sampling),
    ``exact`` the closed-form product of Beta tail probabilities that the
    per-vertex independence of the environment provides.
    """

    eps: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    exact: np.ndarray
    slope: float
    slope_stderr: float
    beta_a: float


def trap_probability(
    g: WeightedDigraph,
    a: Iterable[int],
    eps_grid: Sequence[float],
    n_samples: int,
    rng: np.random.Generator,
) -> TrapScaling:
    """Estimate the trap-event probability on the eps grid.

    The event factorizes over the tail vertices of a (exit masses at
    distinct vertices are independent), and per vertex the exit mass is a
    Beta variable. Each factor is estimated by importance sampling from the
    near-zero part of the Beta density, with common random numbers across
    the grid, and cross-checked by the regularized incomplete beta.
    """
    a = frozenset(a)
    if not is_strongly_connected(g, a):
        raise NotStronglyConnected("the trap set must be strongly connected")
    eps = np.asarray(list(eps_grid), dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps values must be positive")
    bnd = boundary_edges(g, a)
    estimate = np.ones(len(eps))
    rel_var = np.zeros(len(eps))
    exact = np.ones(len(eps))
    for x in sorted(edge_tails(g, a)):
        b = sum(g.edge(eid).alpha for eid in g.out_edges(x) if eid in bnd)
        c = sum(g.edge(eid).alpha for eid in g.out_edges(x) if eid in a)
        if b == 0.0:
            continue  # no exit edge at x: the constraint is vacuous there
        exact *= betainc(b, c, np.minimum(eps, 1.0))
        u = rng.random(n_samples) ** (1.0 / b)
        norm = b * beta_fn(b, c)
        for i, e in enumerate(eps):
            if e >= 1.0:
                continue  # probability one, exactly
            w = e**b * (1.0 - e * u) ** (c - 1.0) / norm
            p = w.mean()
            estimate[i] *= p
            rel_var[i] += w.var(ddof=1) / n_samples / p**2
    stderr = estimate * np.sqrt(rel_var)
    if len(np.unique(eps)) >= 2:
        x = np.log(eps)
        y = np.log(estimate)
        coeffs = np.polyfit(x, y, 1)
        slope = coeffs[0]
        resid = y - np.polyval(coeffs, x)
        dof = max(len(x) - 2, 1)
        slope_se = math.sqrt(resid @ resid / dof / ((x - x.mean()) @ (x - x.mean())))
    else:
        slope = math.nan
        slope_se = math.nan
    return TrapScaling(
        eps=eps,
        estimate=estimate,
        stderr=stderr,
        exact=exact,
        slope=float(slope),
        slope_stderr=float(slope_se),
        beta_a=beta_edges(g, a),
    )


# ---------------------------------------------------------------------------
# Lattice trajectories (lazy environments, numba)

_PROBS = types.float64[::1]


@njit(cache=True)
def _gamma_mt_ge1(shape):
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = np.random.standard_normal()
        v = (1.0 + c * x) ** 3
        if v <= 0.0:
            continue
        u = np.random.random()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)):
            return d * v


@njit(cache=True)
def _gamma_mt(shape):
    if shape < 1.0:
        return _gamma_mt_ge1(shape + 1.0) * np.random.random() ** (1.0 / shape)
    return _gamma_mt_ge1(shape)


@njit(cache=True)
def _dirichlet_cumulative(alpha):
    k = alpha.shape[0]
    g = np.empty(k)
    total = 0.0
    while total <= 0.0:
        total = 0.0
        for j in range(k):
            g[j] = _gamma_mt(alpha[j])
            total += g[j]
    cum = np.empty(k)
    acc = 0.0
    for j in range(k):
        acc += g[j] / total
        cum[j] = acc
    cum[k - 1] = 1.0
    return cum


@njit(cache=True)
def _walk_one(seed, alpha, n_max, checkpoints, bits):
    """One trajectory; returns X_n . e1 at the checkpoint steps.

    The environment is drawn lazily: the first visit to a site samples its
    transition vector and caches it for the rest of this trajectory.
    """
    np.random.seed(seed)
    d = alpha.shape[0] // 2
    env = Dict.empty(types.int64, _PROBS)
    pos = np.zeros(d, dtype=np.int64)
    half = np.int64(1) << (bits - 1)
    out = np.empty(checkpoints.shape[0])
    ci = 0
    for step in range(1, n_max + 1):
        key = pos[0] + half
        for j in range(1, d):
            key = (key << bits) | (pos[j] + half)
        if key in env:
            cum = env[key]
        else:
            cum = _dirichlet_cumulative(alpha)
            env[key] = cum
        u = np.random.random()
        k = 0
        while k < 2 * d - 1 and u > cum[k]:
            k += 1
        if k % 2 == 0:
            pos[k // 2] += 1
        else:
            pos[k // 2] -= 1
        while ci < checkpoints.shape[0] and checkpoints[ci] == step:
            out[ci] = pos[0]
            ci += 1
    return out


@njit(parallel=True, cache=True)
def _walk_many(seeds, alpha, n_max, checkpoints, bits):
    n_traj = seeds.shape[0]
    out = np.empty((n_traj, checkpoints.shape[0]))
    for t in prange(n_traj):
        out[t] = _walk_one(seeds[t], alpha, n_max, checkpoints, bits)
    return out


@njit(cache=True)
def _box_exit_one(seed, alpha, lo, hi, start, n_cap, bits):
    """Walk from start until leaving the box [lo, hi]; returns (exit time,
    visits to start before exit). Capped at n_cap steps."""
    np.random.seed(seed)
    d = alpha.shape[0] // 2
    env = Dict.empty(types.int64, _PROBS)
    pos = start.copy()
    half = np.int64(1) << (bits - 1)
    visits = 0
    for step in range(1, n_cap + 1):
        same = True
        for j in range(d):
            if pos[j] != start[j]:
                same = False
                break
        if same:
            visits += 1
        key = pos[0] + half
        for j in range(1, d):
            key = (key << bits) | (pos[j] + half)
        if key in env:
            cum = env[key]
        else:
            cum = _dirichlet_cumulative(alpha)
            env[key] = cum
        u = np.random.random()
        k = 0
        while k < 2 * d - 1 and u > cum[k]:
            k += 1
        if k % 2 == 0:
            pos[k // 2] += 1
        else:
            pos[k // 2] -= 1
        for j in range(d):
            if pos[j] < lo[j] or pos[j] > hi[j]:
                return step, visits
    return n_cap, visits


@njit(parallel=True, cache=True)
def _box_exit_many(seeds, alpha, lo, hi, start, n_cap, bits):
    n = seeds.shape[0]
    times = np.empty(n, dtype=np.int64)
    visits = np.empty(n, dtype=np.int64)
    for t in prange(n):
        times[t], visits[t] = _box_exit_one(seeds[t], alpha, lo, hi, start, n_cap, bits)
    return times, visits


def _coordinate_bits(d: int, n_max: int) -> int:
    bits = 64 // d if d > 1 else 63
    if n_max >= (1 << (bits - 1)):
        raise ValueError(f"n_max={n_max} exceeds the coordinate packing range for d={d}")
    return bits


def trajectory_seeds(master_seed: int, n: int) -> np.ndarray:
    """Per-trajectory seeds derived from (master seed, trajectory index)."""
    return np.random.SeedSequence(master_seed).generate_state(n).astype(np.int64)


def default_checkpoints(n_max: int, n_points: int = 1000) -> np.ndarray:
    """Log-spaced recording steps in [1, n_max], always including n_max."""
    pts = np.unique(np.round(np.logspace(0.0, math.log10(n_max), n_points)).astype(np.int64))
    pts = pts[(pts >= 1) & (pts <= n_max)]
    if pts[-1] != n_max:
        pts = np.append(pts, n_max)
    return pts


@dataclass
class TrajectoryRun:
    """Mean displacement curve of annealed lattice trajectories.

    ``mean_y[i]`` is the average of X_n . e1 over trajectories at
    ``checkpoints[i]``; each trajectory carries its own lazily sampled
    environment (independent (environment, walk) pairs).
    """

    alpha: tuple | None
    n_traj: int
    n_max: int
    checkpoints: np.ndarray
    mean_y: np.ndarray
    stderr: np.ndarray
    seed: int | None

    def to_csv(self) -> str:
        lines = ["n,mean_y,stderr"]
        for n, y, s in zip(self.checkpoints, self.mean_y, self.stderr):
            lines.append(f"{int(n)},{float(y)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrajectoryRun":
        rows = [line.split(",") for line in text.strip().splitlines()[1:] if line.strip()]
        ns = np.array([int(r[0]) for r in rows], dtype=np.int64)
        ys = np.array([float(r[1]) for r in rows])
        ss = np.array([float(r[2]) for r in rows])
        order = np.argsort(ns)
        return cls(None, 0, int(ns.max()), ns[order], ys[order], ss[order], None)


def simulate_zd(
    alpha: Sequence[float],
    n_traj: int,
    n_max: int,
    checkpoints: Sequence[int] | None = None,
    seed: int = 0,
) -> TrajectoryRun:
    """Simulate annealed trajectories on Z^d and record mean displacement.

    d is inferred from len(alpha) = 2d. Bit-reproducible for a fixed seed
    regardless of thread count: trajectory t uses the t-th derived seed and
    writes its own output row.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size % 2 or np.any(alpha <= 0):
        raise ValueError("alpha must be positive weights (a1, a-1, a2, a-2, ...)")
    d = alpha.size // 2
    bits = _coordinate_bits(d, n_max)
    cps = (
        default_checkpoints(n_max)
        if checkpoints is None
        else np.sort(np.unique(np.asarray(checkpoints, dtype=np.int64)))
    )
    if cps[0] < 1 or cps[-1] > n_max:
        raise ValueError("checkpoints must lie in [1, n_max]")
    seeds = trajectory_seeds(seed, n_traj)
    ys = _walk_many(seeds, alpha, n_max, cps, bits)
    return TrajectoryRun(
        alpha=tuple(alpha),
        n_traj=n_traj,
        n_max=n_max,
        checkpoints=cps,
        mean_y=ys.mean(axis=0),
        stderr=ys.std(axis=0, ddof=1) / math.sqrt(n_traj),
        seed=seed,
    )


def simulate_box_exits(
    alpha: Sequence[float],
    lo: Sequence[int],
    hi: Sequence[int],
    start: Sequence[int],
    n_walks: int,
    seed: int = 0,
    n_cap: int = 10**6,
):
    """Exit times and start-site visit counts for walks killed outside a box.

    Runs the same lazy-environment engine as simulate_zd; used to check it
    against the explicit-box Green-function pipeline.
    """
    alpha = np.asarray(alpha, dtype=float)
    d = alpha.size // 2
    bits = _coordinate_bits(d, n_cap)
    seeds = trajectory_seeds(seed, n_walks)
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    start = np.asarray(start, dtype=np.int64)
    return _box_exit_many(seeds, alpha, lo, hi, start, n_cap, bits)


# ---------------------------------------------------------------------------
# Power-law fit


@dataclass
class FitResult:
    """Grid search for the exponent best matching the displacement curve.

    The amplitude is pinned so that the candidate curve coincides with the
    data at the largest checkpoint; the objective is the maximum relative
    deviation over the fit window.
    """

    grid: np.ndarray
    amplitudes: np.ndarray
    objectives: np.ndarray
    alpha: float
    amplitude: float
    objective: float
    boundary: bool
    window: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "amplitude": self.amplitude,
                "objective": self.objective,
                "boundary_solution": self.boundary,
                "window": list(self.window),
                "grid": [float(a) for a in self.grid],
                "objectives": [float(v) for v in self.objectives],
            }
        )


def fit_power_law(
    run: TrajectoryRun,
    grid: Sequence[float] | None = None,
    window: tuple | None = None,
) -> FitResult:
    """Fit mean_y ~ C n^alpha over a grid of exponents.

    For each grid alpha, C is chosen so the curves coincide at the largest
    checkpoint, and the objective is max over window checkpoints of
    |1 - mean_y / (C n^alpha)|. The window defaults to (n_max/10, n_max].
    A minimizer at the grid edge is flagged as a boundary solution.
    """
    ns = np.asarray(run.checkpoints, dtype=float)
    ys = np.asarray(run.mean_y, dtype=float)
    n_ref = ns[-1]
    y_ref = ys[-1]
    if y_ref <= 0.0:
        raise ValueError("mean displacement at the last checkpoint must be positive")
    if grid is None:
        grid = np.round(np.arange(0.50, 1.0 + 1e-9, 0.01), 10)
    grid = np.asarray(grid, dtype=float)
    if window is None:
        window = (n_ref / 10.0, n_ref)
    lo, hi = window
    mask = (ns > lo) & (ns <= hi)
    if not mask.any():
        raise EmptyWindow(f"no checkpoints in ({lo}, {hi}]")
    amplitudes = y_ref / n_ref**grid
    objectives = np.empty(len(grid))
    for i, a in enumerate(grid):
        model = amplitudes[i] * ns[mask] ** a
        objectives[i] = np.abs(1.0 - ys[mask] / model).max()
    best = int(np.argmin(objectives))
    return FitResult(
        grid=grid,
        amplitudes=amplitudes,
        objectives=objectives,
        alpha=float(grid[best]),
        amplitude=float(amplitudes[best]),
        objective=float(objectives[best]),
        boundary=best in (0, len(grid) - 1),
        window=(float(lo), float(hi)),
    )
