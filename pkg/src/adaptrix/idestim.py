"""Adaptive binomial intrinsic-dimension estimation (ABIDE).

Each point gets the largest neighbourhood over which a Poisson process
with constant intensity is not rejected by a likelihood-ratio test; the
binomial estimator is then evaluated on those neighbourhoods and the two
steps alternate until the dimension settles.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfinv, gammaln

from adaptrix.errors import ArgumentError, DegenerateGeometryError, NumericalError
from adaptrix.neighbors import build_neighbor_table

log = logging.getLogger(__name__)

BOOTSTRAP_K = 20


@dataclass(frozen=True)
class AbideConfig:
    alpha: float = 0.05
    tau: float = 0.5
    d_tolerance: float = 1e-3
    max_iterations: int = 100
    k_min: int = 2
    k_max: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ArgumentError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.tau < 1:
            raise ArgumentError(f"tau must lie in (0, 1), got {self.tau}")
        if not self.d_tolerance > 0:
            raise ArgumentError("d_tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ArgumentError("max_iterations must be a positive integer")
        if int(self.k_min) != self.k_min or self.k_min < 1:
            raise ArgumentError("k_min must be a positive integer")
        if self.k_max is not None and (int(self.k_max) != self.k_max or self.k_max < self.k_min):
            raise ArgumentError("k_max must be an integer no smaller than k_min")

    def resolved_k_max(self, n):
        cap = min(n - 2, 1000)
        k_max = cap if self.k_max is None else min(int(self.k_max), n - 2)
        if k_max < self.k_min:
            raise ArgumentError(
                f"n={n} points leave no room for k_min={self.k_min} (k_max would be {k_max})"
            )
        return k_max

    @property
    def threshold(self):
        return chi2_quantile_1df(1.0 - self.alpha)


@dataclass(frozen=True)
class AbideResult:
    d_hat: float
    d_star: int
    k_star: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False


def unit_ball_volume(d):
    """Volume of the unit ball in ``d`` dimensions; ``d`` may be fractional."""
    if not d > 0:
        raise ArgumentError(f"dimension must be positive, got {d}")
    return math.exp(d * math.log(2.0 * math.gamma(1.5)) - gammaln(d / 2.0 + 1.0))


def shell_volumes(dists_row, d):
    """Volumes of the annuli between consecutive neighbour radii."""
    r = np.asarray(dists_row, dtype=np.float64)
    if np.any(r < 0):
        raise ArgumentError("radii must be non-negative")
    if np.any(np.diff(r) < 0):
        raise ArgumentError("radii must be non-decreasing")
    balls = unit_ball_volume(d) * r**d
    return np.diff(balls, prepend=0.0)


def lrt_statistic(k, V_i, V_j):
    """Likelihood-ratio statistic for equal Poisson intensities.

    ``V_i`` and ``V_j`` are the volumes of the ``k``-neighbour balls of the
    two points. Each model's log-likelihood ``k log(rho) - rho V`` is
    maximised at ``rho = k / V``; the constant ``-k`` terms cancel.
    """
    if not (V_i > 0 and V_j > 0):
        raise ArgumentError(f"volumes must be positive, got {V_i} and {V_j}")
    return float(_lrt(np.float64(k), np.float64(V_i), np.float64(V_j)))


def _lrt(k, V_i, V_j):
    # 2k * (2 log mean - log V_i - log V_j); exactly zero when V_i == V_j.
    mean = 0.5 * (V_i + V_j)
    val = 2.0 * k * (2.0 * np.log(mean) - np.log(V_i) - np.log(V_j))
    return np.maximum(val, 0.0)


def chi2_quantile_1df(p):
    """Inverse CDF of the chi-square distribution with one degree of freedom.

    With one degree of freedom ``P(X <= x) = erf(sqrt(x / 2))``, so the
    quantile is ``2 * erfinv(p)**2``.
    """
    if not 0 < p < 1:
        raise ArgumentError(f"probability must lie in (0, 1), got {p}")
    return float(2.0 * erfinv(p) ** 2)


def _statistics(r_i, r_j, ks, d):
    """Statistic for each tested order ``ks`` given the two radii arrays.

    Entries whose balls have zero volume are NaN and never trigger.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        # Omega_d cancels in the ratio but is kept so the volumes are real ones.
        omega = unit_ball_volume(d)
        V_i = omega * r_i**d
        V_j = omega * r_j**d
        D = _lrt(np.asarray(ks, dtype=np.float64), V_i, V_j)
    D[(V_i <= 0) | (V_j <= 0) | ~np.isfinite(D)] = np.nan
    return D


def statistic_table(table, d, k_min, k_max):
    """``D[i, k - k_min]`` for every point and every tested order ``k``.

    For order ``k`` point ``i`` is compared with its ``(k+1)``-th
    neighbour ``j``; both use the radius of their own ``k``-th neighbour.
    """
    ks = np.arange(k_min, k_max + 1)
    r_i = table.dists[:, k_min - 1 : k_max]
    j = table.ids[:, k_min : k_max + 1]
    r_j = table.dists[j, ks - 1]
    return _statistics(r_i, r_j, ks[None, :], d)


def _check_depth(table, k_max):
    if table.depth < k_max + 1:
        raise ArgumentError(
            f"neighbour table has depth {table.depth}; testing up to k={k_max} "
            f"needs depth {k_max + 1}, rebuild it with a larger K"
        )


def _first_crossing(D, threshold, k_min, k_max):
    hits = D >= threshold
    first = np.argmax(hits, axis=-1)
    any_hit = np.take_along_axis(hits, first[..., None], axis=-1)[..., 0]
    return np.where(any_hit, first + k_min, k_max).astype(np.int64)


def select_k_star(table, i, d, threshold, config):
    """Smallest ``k`` whose statistic reaches ``threshold`` (``k_max`` if none)."""
    if not d > 0:
        raise ArgumentError("dimension must be positive")
    k_max = config.resolved_k_max(table.n)
    _check_depth(table, k_max)
    ks = np.arange(config.k_min, k_max + 1)
    r_i = table.dists[i, ks - 1]
    r_j = table.dists[table.ids[i, ks], ks - 1]
    D = _statistics(r_i, r_j, ks, d)
    return int(_first_crossing(D, threshold, config.k_min, k_max))


def select_k_star_all(table, d, threshold, config):
    """Vectorised :func:`select_k_star` over every point."""
    if not d > 0:
        raise ArgumentError("dimension must be positive")
    k_max = config.resolved_k_max(table.n)
    _check_depth(table, k_max)
    D = statistic_table(table, d, config.k_min, k_max)
    return _first_crossing(D, threshold, config.k_min, k_max)


def bide(k_A, k_B, tau):
    """Binomial estimator from inner (``k_A``) and outer (``k_B``) counts."""
    if not 0 < tau < 1:
        raise ArgumentError(f"tau must lie in (0, 1), got {tau}")
    sum_a = float(np.sum(k_A))
    sum_b = float(np.sum(k_B))
    if sum_b <= 0:
        raise DegenerateGeometryError("no points inside the outer balls")
    if sum_a <= 0:
        raise DegenerateGeometryError("no points inside the inner balls; the estimate is infinite")
    if sum_a > sum_b:
        raise ArgumentError("inner counts exceed outer counts")
    if sum_a == sum_b:
        warnings.warn("inner and outer counts coincide; dimension estimate is 0", RuntimeWarning)
        return 0.0
    return math.log(sum_a / sum_b) / math.log(tau)


def binomial_counts(table, k_outer, tau):
    """Inner and outer counts for balls bounded by the ``k_outer``-th neighbour.

    The outer radius is the distance to the ``k_outer``-th neighbour, so the
    open outer ball holds ``k_outer - 1`` points. Inner counts include
    points lying exactly on the inner radius.
    """
    k_outer = np.asarray(k_outer, dtype=np.int64)
    rows = np.arange(table.n)
    r_B = table.dists[rows, k_outer - 1]
    r_A = tau * r_B
    depth = int(k_outer.max())
    within = table.dists[:, :depth] <= r_A[:, None]
    within &= np.arange(depth)[None, :] < (k_outer - 1)[:, None]
    k_A = within.sum(axis=1)
    k_B = k_outer - 1
    return k_A, k_B


def _estimate(table, k_outer, tau):
    k_A, k_B = binomial_counts(table, k_outer, tau)
    return bide(k_A, k_B, tau)


def abide(cloud, config=None, table=None, workers=1):
    """Iterate neighbourhood selection and binomial estimation to a fixed point."""
    config = config or AbideConfig()
    n = cloud.n if hasattr(cloud, "n") else len(cloud)
    if n < config.k_min + 2:
        raise ArgumentError(f"need at least k_min + 2 = {config.k_min + 2} points, got {n}")
    k_max = config.resolved_k_max(n)
    if table is None or table.depth < k_max + 1:
        table = build_neighbor_table(cloud, k_max + 1, workers=workers)
    if not np.any(table.dists > 0):
        raise DegenerateGeometryError("all points coincide")

    threshold = config.threshold
    k0 = min(BOOTSTRAP_K, n - 2, table.depth)
    d = _estimate(table, np.full(table.n, k0), config.tau)
    trace = [d]
    converged = False
    k_star = None
    for it in range(config.max_iterations):
        if not (d > 0 and math.isfinite(d)):
            raise NumericalError(f"dimension estimate became {d} at iteration {it}")
        k_star = select_k_star_all(table, d, threshold, config)
        d_next = _estimate(table, k_star, config.tau)
        trace.append(d_next)
        log.debug("abide iteration %d: d=%.6f median k*=%g", it, d_next, np.median(k_star))
        if abs(d_next - d) < config.d_tolerance:
            d = d_next
            converged = True
            break
        d = d_next
    k_star.setflags(write=False)
    return AbideResult(
        d_hat=float(d),
        d_star=max(1, int(round(d))),
        k_star=k_star,
        trace=[float(v) for v in trace],
        converged=converged,
    )
