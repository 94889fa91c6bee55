"""Kalikow auxiliary walk, its killed generalization, and the ballisticity
criterion with velocity bounds.

Transition estimates are ratio estimators sharing one stream of sampled
environments between numerator and denominator (common random numbers),
with delta-method standard errors. Killed Green functions are solved
exactly per sample; only the averaging over environments is Monte Carlo.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .digraph import LatticeSpec, WeightedDigraph, build_lattice_box, site_id, unit_vectors
from .environment import Environment, absorption_probability, green, sample_environment_batch
from .integrability import lattice_report, zero_speed_check

CHUNK = 8192


class IntegrabilityGuardFailed(ValueError):
    """delta = 1 requested although the lattice criterion fails at s = 1."""


class FormMismatch(AssertionError):
    """The two forms of the one-step escape measure disagree."""


def _box_setup(spec: LatticeSpec, u: Sequence[tuple]):
    """Box graph over the site set u plus index maps.

    Returns (graph, sites, head_index) where head_index[i, k] is the site
    index of sites[i] + direction k, or -1 when that target leaves u.
    """
    sites = [tuple(int(c) for c in z) for z in dict.fromkeys(tuple(z) for z in u)]
    box_spec = LatticeSpec(spec.d, spec.alpha, tuple(sites))
    g = build_lattice_box(box_spec)
    index = {z: i for i, z in enumerate(sites)}
    dirs = unit_vectors(spec.d)
    head_index = np.full((len(sites), 2 * spec.d), -1, dtype=int)
    for i, z in enumerate(sites):
        for k, e in enumerate(dirs):
            head_index[i, k] = index.get(tuple(z[j] + e[j] for j in range(spec.d)), -1)
    return g, sites, head_index


def _direction_matrix(d: int) -> np.ndarray:
    return np.array(unit_vectors(d), dtype=float)  # (2d, d)


def boundary_sites(spec: LatticeSpec, u: Sequence[tuple]) -> tuple:
    """∂_V U: sites neighbouring u from outside."""
    in_u = {tuple(z) for z in u}
    dirs = unit_vectors(spec.d)
    out = []
    for z in in_u:
        for e in dirs:
            t = tuple(z[j] + e[j] for j in range(spec.d))
            if t not in in_u and t not in out:
                out.append(t)
    return tuple(sorted(out))


@dataclass
class KalikowWalk:
    """Estimated transitions ω̂(z, z + e) of the (killed) Kalikow walk.

    Rows are indexed by the sites of the domain; columns follow the
    direction order e1, -e1, e2, -e2, ... Boundary sites absorb.
    """

    alpha: tuple
    domain: tuple
    boundary: tuple
    center: tuple
    delta: float
    n_samples: int
    transitions: np.ndarray
    stderr: np.ndarray

    def site_index(self, z) -> int:
        return self.domain.index(tuple(z))

    def transition_row(self, z) -> np.ndarray:
        return self.transitions[self.site_index(z)]

    def drift(self, z) -> np.ndarray:
        d = len(self.alpha) // 2
        return self.transitions[self.site_index(z)] @ _direction_matrix(d)


def _ratio_and_stderr(sa, saa, sab, sb, sbb, n):
    """Delta-method mean and stderr of a ratio estimator from moment sums."""
    a_bar = sa / n
    b_bar = sb / n
    r = a_bar / b_bar
    var_a = saa / n - a_bar**2
    var_b = sbb / n - b_bar**2
    cov = sab / n - a_bar * b_bar
    var_r = (var_a - 2.0 * r * cov + r**2 * var_b) / (n * b_bar**2)
    return r, np.sqrt(np.clip(var_r, 0.0, None))


def _batched_green_inverse(g, head_index, delta, omegas):
    """Full killed-Green matrices for a batch of environments.

    omegas has shape (m, n_sites * 2d); returns (m, n, n) inverses of
    I - delta * Q, exploiting the fixed (site, direction) edge layout of
    the box graph.
    """
    m = omegas.shape[0]
    n, two_d = head_index.shape
    w = omegas.reshape(m, n, two_d)
    q = np.zeros((m, n, n))
    for i in range(n):
        for k in range(two_d):
            j = head_index[i, k]
            if j >= 0:
                q[:, i, j] += delta * w[:, i, k]
    a = np.broadcast_to(np.eye(n), (m, n, n)) - q
    return np.linalg.inv(a), w


def kalikow_transitions(
    spec: LatticeSpec,
    u: Sequence[tuple] | None,
    z0: tuple,
    delta: float,
    n_samples: int,
    rng: np.random.Generator,
) -> KalikowWalk:
    """Monte Carlo estimate of ω̂(z, z+e) = E[G(z0,z) ω(z,z+e)] / E[G(z0,z)].

    The killed Green function is solved exactly for every sampled
    environment. delta = 1 is the monotone limit of the killed walks and is
    only allowed when the lattice criterion guarantees E[G_U] < infinity at
    s = 1; at delta = 0 the Green weight degenerates to the indicator of z0
    and only the center row is defined (others come out nan).
    """
    u = tuple(tuple(z) for z in (u if u is not None else spec.box))
    z0 = tuple(z0)
    if z0 not in u:
        raise ValueError("the center must belong to the domain")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if delta == 1.0 and not lattice_report(LatticeSpec(spec.d, spec.alpha, u), 1.0).verdict(1.0):
        raise IntegrabilityGuardFailed(
            "delta = 1 needs 2*Sigma > alpha_e + alpha_-e + 1 for every internal direction"
        )
    g, sites, head_index = _box_setup(spec, u)
    n, two_d = head_index.shape
    iz0 = sites.index(z0)

    sa = np.zeros((n, two_d))
    saa = np.zeros((n, two_d))
    sab = np.zeros((n, two_d))
    sb = np.zeros(n)
    sbb = np.zeros(n)
    done = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        omegas = sample_environment_batch(g, rng, m)
        ginv, w = _batched_green_inverse(g, head_index, delta, omegas)
        b = ginv[:, iz0, :]  # (m, n)
        a = b[:, :, None] * w
        sa += a.sum(axis=0)
        saa += (a * a).sum(axis=0)
        sab += (a * b[:, :, None]).sum(axis=0)
        sb += b.sum(axis=0)
        sbb += (b * b).sum(axis=0)
        done += m

    with np.errstate(divide="ignore", invalid="ignore"):
        r, se = _ratio_and_stderr(sa, saa, sab, sb[:, None], sbb[:, None], n_samples)
    return KalikowWalk(
        alpha=tuple(spec.alpha),
        domain=tuple(sites),
        boundary=boundary_sites(spec, u),
        center=z0,
        delta=delta,
        n_samples=n_samples,
        transitions=r,
        stderr=se,
    )


def p_omega_delta(
    g: WeightedDigraph,
    env: Environment,
    u: Iterable[str],
    delta: float,
    eid: int,
) -> float:
    """One-step escape measure p(z, z+e) = ω_e (G_{U,δ}(z,z) - δ G_{U,δ}(z+e,z)).

    At delta = 1 the value is cross-checked against its probabilistic form
    P_z(X_1 = z+e | absorption before returning to z), computed from
    independent hitting solves; a disagreement beyond 1e-9 raises.
    """
    u = tuple(u)
    e = g.edge(eid)
    z = e.tail
    if z not in u:
        raise ValueError("the edge must exit a domain site")
    table = green(g, env, sources=None, delta=delta, domain=u)
    head_term = table.value(e.head, z) if e.head in u else 0.0  # G(y, .) = 0 outside U
    value = env.probs[eid] * (table.value(z, z) - delta * head_term)
    if delta == 1.0:
        outside = set(g.vertices) - set(u)
        stay = absorption_probability(g, env, win={z}, lose=outside)
        reference = env.probs[eid] * (1.0 - stay[e.head]) * table.value(z, z)
        if abs(value - reference) > 1e-9:
            raise FormMismatch(f"p forms disagree: {value!r} vs {reference!r}")
    return float(value)


@dataclass
class DriftIdentityResult:
    """Per-site Monte Carlo residual of the killed-walk drift identity.

    residual[i] is the difference (as a vector in R^d) between the drift of
    the estimated Kalikow walk at site i and (Sigma d_m - d_tilde)/(Sigma-1),
    both estimated from the same environment stream; stderr is its
    delta-method standard error. Sites never weighted by the Green function
    (possible at delta = 0) are marked invalid.
    """

    sites: tuple
    delta: float
    n_samples: int
    residual: np.ndarray
    stderr: np.ndarray
    d_hat: np.ndarray
    d_tilde: np.ndarray
    valid: np.ndarray

    def max_sigmas(self) -> float:
        """Largest |residual| / stderr over valid sites and components."""
        ratio = np.abs(self.residual[self.valid]) / self.stderr[self.valid]
        return float(ratio.max())

    def l1_residual(self) -> np.ndarray:
        return np.abs(self.residual).sum(axis=1)


def drift_identity_check(
    spec: LatticeSpec,
    u: Sequence[tuple] | None,
    z0: tuple,
    delta: float,
    n_samples: int,
    rng: np.random.Generator,
) -> DriftIdentityResult:
    """Monte Carlo check of the drift identity of the generalized walk.

    Writing Y for the sampled local drift at z and Z for the drift of the
    escape measure p, the identity reduces to a single ratio per component:
    E[G(z0,z) (Y + Z/(Sigma-1))] / E[G(z0,z)] = Sigma d_m / (Sigma-1),
    so the residual and its standard error come from one ratio estimator.
    """
    u = tuple(tuple(z) for z in (u if u is not None else spec.box))
    z0 = tuple(z0)
    sig = spec.sigma
    if abs(sig - 1.0) < 1e-12:
        raise ValueError("the identity degenerates at Sigma = 1")
    g, sites, head_index = _box_setup(spec, u)
    n, two_d = head_index.shape
    d = spec.d
    iz0 = sites.index(z0)
    vecs = _direction_matrix(d)  # (2d, d)
    target = np.array([spec.alpha[2 * i] - spec.alpha[2 * i + 1] for i in range(d)]) / (sig - 1.0)

    s_w = np.zeros((n, d))
    s_ww = np.zeros((n, d))
    s_wb = np.zeros((n, d))
    s_b = np.zeros(n)
    s_bb = np.zeros(n)
    s_a = np.zeros((n, two_d))  # for d_hat
    s_gp = np.zeros((n, two_d))  # for d_tilde
    done = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        omegas = sample_environment_batch(g, rng, m)
        ginv, w = _batched_green_inverse(g, head_index, delta, omegas)
        b = ginv[:, iz0, :]  # (m, n) Green weights
        gdiag = np.einsum("mii->mi", ginv)  # (m, n)
        ghead = ginv[:, head_index, np.arange(n)[:, None]]  # (m, n, 2d)
        ghead = np.where(head_index[None, :, :] >= 0, ghead, 0.0)
        p = w * (gdiag[:, :, None] - delta * ghead)  # (m, n, 2d)
        y_drift = w @ vecs  # (m, n, d)
        z_drift = p @ vecs
        wc = b[:, :, None] * (y_drift + z_drift / (sig - 1.0))
        s_w += wc.sum(axis=0)
        s_ww += (wc * wc).sum(axis=0)
        s_wb += (wc * b[:, :, None]).sum(axis=0)
        s_b += b.sum(axis=0)
        s_bb += (b * b).sum(axis=0)
        s_a += (b[:, :, None] * w).sum(axis=0)
        s_gp += (b[:, :, None] * p).sum(axis=0)
        done += m

    valid = s_b > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r, se = _ratio_and_stderr(s_w, s_ww, s_wb, s_b[:, None], s_bb[:, None], n_samples)
        d_hat = (s_a / s_b[:, None]) @ vecs
        d_tilde = (s_gp / s_b[:, None]) @ vecs
    return DriftIdentityResult(
        sites=tuple(sites),
        delta=delta,
        n_samples=n_samples,
        residual=r - target[None, :],
        stderr=se,
        d_hat=d_hat,
        d_tilde=d_tilde,
        valid=valid,
    )


@dataclass
class DriftReport:
    """Ballisticity criterion value and, when met, the velocity ball."""

    alpha: tuple
    criterion_value: float
    ballistic: bool
    sigma: float
    d_m: np.ndarray
    center: np.ndarray | None
    radius: float | None
    zero_speed: bool
    per_site_drifts: dict | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "criterion_value": self.criterion_value,
                "ballistic": self.ballistic,
                "center": None if self.center is None else list(self.center),
                "radius": self.radius,
                "zero_speed": self.zero_speed,
                "per_site_drifts": None
                if self.per_site_drifts is None
                else {site_id(z): list(v) for z, v in self.per_site_drifts.items()},
            }
        )


def ballisticity_report(alpha: Sequence[float], walk: KalikowWalk | None = None) -> DriftReport:
    """Evaluate the l1 criterion sum_i |alpha_i - alpha_-i| > 1.

    When it holds, the limiting velocity v exists, is nonzero, and satisfies
    |v - Sigma/(Sigma-1) d_m|_1 <= 1/(Sigma-1); when it fails the report
    carries no conclusion (besides the separate zero-speed check). An
    estimated Kalikow walk may be attached for its per-site drifts.
    """
    alpha = tuple(float(a) for a in alpha)
    if len(alpha) % 2 or not alpha or any(not a > 0 for a in alpha):
        raise ValueError("need positive weights in pairs (a1, a-1, a2, a-2, ...)")
    d = len(alpha) // 2
    sigma = sum(alpha)
    diffs = np.array([alpha[2 * i] - alpha[2 * i + 1] for i in range(d)])
    value = float(np.abs(diffs).sum())
    d_m = diffs / sigma
    ballistic = value > 1.0
    center = sigma / (sigma - 1.0) * d_m if ballistic else None
    radius = 1.0 / (sigma - 1.0) if ballistic else None
    drifts = None
    if walk is not None:
        drifts = {z: walk.drift(z) for z in walk.domain}
    return DriftReport(
        alpha=alpha,
        criterion_value=value,
        ballistic=ballistic,
        sigma=sigma,
        d_m=d_m,
        center=center,
        radius=radius,
        zero_speed=zero_speed_check(alpha),
        per_site_drifts=drifts,
    )
