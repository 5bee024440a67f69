"""Closed-form lower bounds on the weighted alpha-fair allocation.

Two bounds are provided: the local bound built from the local midpoint
(:func:`theorem_bound`) and the older global bound (:func:`soa_bound`).
:func:`compare_bounds` reports how often and by how much the first beats the
second.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class BoundKind(str, Enum):
    LOCAL = "local"
    SOA = "soa"


@dataclass(frozen=True, eq=False)
class BoundVector:
    alpha: float
    kind: BoundKind
    values: np.ndarray

    def __post_init__(self):
        if not np.all(self.values > 0):
            raise ValueError("bound values must be strictly positive")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BoundComparison:
    alpha: float
    score: float
    ratio_min: float
    ratio_avg: float
    ratio_max: float


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def utopia(instance):
    """Smallest capacity along each route (what a request would get alone)."""
    c = instance.capacities
    return np.array([c[rt].min() for rt in instance.routes])


def local_midpoint(instance):
    b = utopia(instance)
    w = instance.weights
    return np.array([w[r] * b[r] / w[nb].sum() for r, nb in enumerate(instance.neighbors)])


def _local_high(instance, alpha):
    # alpha >= 1: p_{r0}^(1 - 1/alpha) * p_r^(1/alpha)
    p = local_midpoint(instance)
    p0 = p[np.argmin(p)]  # argmin returns the first (lowest id) minimizer
    return p0 ** (1.0 - 1.0 / alpha) * p ** (1.0 / alpha)


def _local_low(instance, alpha):
    # 0 < alpha <= 1
    b = utopia(instance)
    w = instance.weights
    wb = w * b ** (1.0 - alpha)
    return np.array([(w[r] * b[r] / wb[nb].sum()) ** (1.0 / alpha)
                     for r, nb in enumerate(instance.neighbors)])


def theorem_bound(instance, alpha, branch=None):
    """Local lower bound d(alpha) on the optimal allocation.

    Parameters
    ----------
    instance : Instance
    alpha : float
        Fairness parameter, strictly positive.
    branch : {None, "high", "low"}
        Force the ``alpha >= 1`` ("high") or ``alpha <= 1`` ("low") formula.
        Both are valid at ``alpha == 1``, where they coincide; by default
        ``alpha >= 1`` selects "high".
    """
    _check_alpha(alpha)
    if branch is None:
        branch = "high" if alpha >= 1 else "low"
    if branch == "high":
        if alpha < 1:
            raise ValueError("the high branch requires alpha >= 1")
        values = _local_high(instance, alpha)
    elif branch == "low":
        if alpha > 1:
            raise ValueError("the low branch requires alpha <= 1")
        values = _local_low(instance, alpha)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return BoundVector(alpha, BoundKind.LOCAL, values)


def soa_bound(instance, alpha):
    """Global lower bound m(alpha) using w_max, M = min(|R|, |J|), c_min and c_max."""
    _check_alpha(alpha)
    w = instance.weights
    c = instance.capacities
    w_max = w.max()
    M = min(instance.n_requests, instance.n_links)
    c_min, c_max = c.min(), c.max()
    load = np.array([len(rj) for rj in instance.link_requests], dtype=float)
    with np.errstate(divide="ignore"):
        share = c / load  # links without requests never appear on a route
    share_min = np.array([share[rt].min() for rt in instance.routes])
    if alpha <= 1:
        values = (w / (w_max * M) * share_min) ** (1.0 / alpha) * c_max ** (1.0 - 1.0 / alpha)
    else:
        values = ((w / (w_max * M)) ** (1.0 / alpha) * share_min
                  * (c_min / c_max) ** (1.0 - 1.0 / alpha))
    return BoundVector(alpha, BoundKind.SOA, values)


def compare_bounds(d, m):
    """Score (fraction with d_r > m_r, strictly) and min/avg/max of d_r / m_r."""
    if len(d) != len(m):
        raise ValueError(f"bounds cover different request sets ({len(d)} vs {len(m)})")
    if d.alpha != m.alpha:
        raise ValueError(f"bounds computed for different alpha ({d.alpha} vs {m.alpha})")
    ratio = d.values / m.values
    return BoundComparison(
        alpha=d.alpha,
        score=float(np.mean(d.values > m.values)),
        ratio_min=float(ratio.min()),
        ratio_avg=float(ratio.mean()),
        ratio_max=float(ratio.max()),
    )
