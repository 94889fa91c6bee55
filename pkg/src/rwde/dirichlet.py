"""Dirichlet distributions: sampling, density, associativity and restriction.

Sampling goes through an explicit Marsaglia-Tsang gamma sampler (with the
shape-augmentation trick below shape 1) rather than the library gamma: the
small-parameter regime is the one producing the heavy tails studied here,
and the retry-on-underflow policy must be under our control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.special import gammaln

SIMPLEX_TOL = 1e-12


class InvalidPartition(ValueError):
    pass


class ZeroMass(ValueError):
    pass


class BoundaryPoint(ValueError):
    """Density evaluation at a boundary point where it diverges."""


@dataclass(frozen=True)
class DirichletParams:
    """Positive weights (alpha_i) over a finite index set of opaque labels."""

    labels: tuple
    alpha: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if len(self.labels) != self.alpha.shape[0] or self.alpha.ndim != 1:
            raise ValueError("labels and weights must align")
        if self.alpha.shape[0] < 1:
            raise ValueError("need at least one index")
        if not np.all(self.alpha > 0):
            raise ValueError("all Dirichlet weights must be positive")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def total(self) -> float:
        return float(self.alpha.sum())

    def mean(self) -> np.ndarray:
        return self.alpha / self.total

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)


def params(alpha: Sequence[float], labels: Sequence[Hashable] | None = None) -> DirichletParams:
    """Convenience constructor; labels default to 0..n-1."""
    alpha = np.asarray(alpha, dtype=float)
    if labels is None:
        labels = tuple(range(alpha.shape[0]))
    return DirichletParams(tuple(labels), alpha)


def standard_gamma(rng: np.random.Generator, shape: float, size=None) -> np.ndarray:
    """Gamma(shape, 1) draws via Marsaglia-Tsang with squeeze acceptance.

    For shape < 1 the shape is augmented: G(a) = G(a+1) * U^(1/a). Output is
    deterministic given the generator state.
    """
    scalar = size is None
    n = 1 if scalar else int(np.prod(size))
    shape = float(shape)
    if shape < 1.0:
        g = _gamma_ge1(rng, shape + 1.0, n)
        with np.errstate(under="ignore"):
            out = g * rng.random(n) ** (1.0 / shape)
    else:
        out = _gamma_ge1(rng, shape, n)
    if scalar:
        return float(out[0])
    return out.reshape(size)


def _gamma_ge1(rng: np.random.Generator, shape: float, n: int) -> np.ndarray:
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        x = rng.standard_normal(pending.size)
        v = (1.0 + c * x) ** 3
        u = rng.random(pending.size)
        pos = v > 0.0
        x2 = x * x
        squeeze = pos & (u < 1.0 - 0.0331 * x2 * x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            full = pos & (np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(np.where(pos, v, 1.0))))
        accept = squeeze | full
        out[pending[accept]] = d * v[accept]
        pending = pending[~accept]
    return out


def sample(p: DirichletParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from D((alpha_i)), as a probability vector aligned with labels."""
    return sample_batch(p, rng, 1)[0]


def sample_batch(p: DirichletParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent draws, shape (n, len(labels)).

    Rows whose gamma draws all underflow to zero (astronomically rare) are
    retried; rows are renormalized so they sum to one exactly.
    """
    if p.n == 1:
        return np.ones((n, 1))
    g = np.empty((n, p.n))
    for j, a in enumerate(p.alpha):
        g[:, j] = standard_gamma(rng, a, n)
    while True:
        total = g.sum(axis=1)
        bad = total == 0.0
        if not bad.any():
            break
        for j, a in enumerate(p.alpha):
            g[bad, j] = standard_gamma(rng, a, int(bad.sum()))
    return g / total[:, None]


def log_density(p: DirichletParams, x: Sequence[float]) -> float:
    """Log of the Dirichlet density at x with respect to Lebesgue measure on
    the simplex.

    Raises BoundaryPoint when some coordinate is 0 with weight < 1 (the
    density diverges there); returns -inf when some coordinate is 0 with
    weight > 1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError("point and parameters must align")
    if np.any(x < 0) or abs(x.sum() - 1.0) > 1e-9:
        raise ValueError("x must lie on the probability simplex")
    zero = x == 0.0
    if np.any(zero & (p.alpha < 1.0)):
        raise BoundaryPoint("density is infinite at this boundary point")
    if np.any(zero & (p.alpha > 1.0)):
        return -math.inf
    norm = gammaln(p.total) - gammaln(p.alpha).sum()
    active = ~zero  # zero coordinates here all have alpha == 1: factor 1
    return float(norm + ((p.alpha[active] - 1.0) * np.log(x[active])).sum())


def aggregate(p: DirichletParams, partition: Sequence[Sequence[Hashable]]) -> DirichletParams:
    """Parameters of the blockwise-summed vector (associativity).

    The partition is given as blocks of labels; each block becomes one new
    index labelled by the tuple of its members. The induced map on values is
    :func:`aggregate_vector`.
    """
    _check_partition(p, partition)
    pos = {lab: i for i, lab in enumerate(p.labels)}
    new_labels = tuple(tuple(block) for block in partition)
    new_alpha = np.array([sum(p.alpha[pos[lab]] for lab in block) for block in partition])
    return DirichletParams(new_labels, new_alpha)


def aggregate_vector(p: DirichletParams, partition: Sequence[Sequence[Hashable]], x) -> np.ndarray:
    """Blockwise sums of x, aligned with aggregate(p, partition)."""
    _check_partition(p, partition)
    x = np.asarray(x, dtype=float)
    pos = {lab: i for i, lab in enumerate(p.labels)}
    return np.array([sum(x[..., pos[lab]] for lab in block) for block in partition]).T


def _check_partition(p: DirichletParams, partition) -> None:
    flat = [lab for block in partition for lab in block]
    if len(flat) != len(set(flat)) or set(flat) != set(p.labels) or any(
        len(block) == 0 for block in partition
    ):
        raise InvalidPartition("blocks must be non-empty, disjoint and cover the index set")


def restrict(p: DirichletParams, subset: Sequence[Hashable], x) -> np.ndarray:
    """Renormalized restriction (x_i / sum_{j in subset} x_j) for i in subset.

    Distributed as D((alpha_i)_{i in subset}) and independent of the
    restricted mass (restriction property).
    """
    subset = list(subset)
    if not subset:
        raise InvalidPartition("subset must be non-empty")
    pos = {lab: i for i, lab in enumerate(p.labels)}
    idx = [pos[lab] for lab in subset]
    x = np.asarray(x, dtype=float)
    mass = x[..., idx].sum(axis=-1)
    if np.any(mass <= 0.0):
        raise ZeroMass("restricted coordinates carry zero mass")
    return x[..., idx] / mass[..., None]


def restrict_params(p: DirichletParams, subset: Sequence[Hashable]) -> DirichletParams:
    """Parameters of the restricted vector."""
    subset = list(subset)
    if not subset:
        raise InvalidPartition("subset must be non-empty")
    pos = {lab: i for i, lab in enumerate(p.labels)}
    idx = [pos[lab] for lab in subset]
    return DirichletParams(tuple(subset), p.alpha[idx])


def is_prob_vector(x, tol: float = SIMPLEX_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= 0.0) and abs(float(x.sum()) - 1.0) <= tol)
