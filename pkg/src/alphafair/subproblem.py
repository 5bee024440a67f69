"""Numerical kernels of the distributed ADMM iteration.

The batch variants operate on flat arrays so that a whole domain is updated in
one vectorized call; the scalar entry points are thin wrappers around them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import utopia


class InfeasibleFloorError(ValueError):
    """Floors of a projection exceed the link capacity."""


# ---------------------------------------------------------------------------
# Proximal step of -f_r
# ---------------------------------------------------------------------------

def prox_fair_batch(w, alpha, lam, v, tol=1e-12, max_iter=200):
    """Positive root of ``x - v - lam*w*x**(-alpha) = 0``, elementwise.

    This is ``argmin_x -f(w, x) + (x - v)**2 / (2*lam)`` for the alpha-fair
    utility. ``w``, ``lam`` and ``v`` broadcast against each other.
    """
    w, lam, v = np.broadcast_arrays(np.asarray(w, float), np.asarray(lam, float),
                                    np.asarray(v, float))
    lw = lam * w
    if alpha == 1:
        disc = np.sqrt(v * v + 4.0 * lw)
        # avoid cancellation for negative v
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v >= 0, 0.5 * (v + disc), 2.0 * lw / (disc - v))

    # Root brackets: for v <= 0 the root is below both (lw)^(1/(a+1)) and
    # (lw/|v|)^(1/a); for v > 0 it exceeds v and (lw)^(1/(a+1)).
    a = alpha
    root1 = lw ** (1.0 / (a + 1.0))
    pos = v > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        hi_neg = np.minimum(root1, np.where(v < 0, (lw / np.where(v < 0, -v, 1.0)) ** (1.0 / a), np.inf))
        lo_neg = (lw / (hi_neg - v)) ** (1.0 / a)
        lo_pos = np.maximum(v, root1)
        hi_pos = v + lw * lo_pos ** (-a)
    lo = np.where(pos, lo_pos, lo_neg)
    hi = np.where(pos, hi_pos, hi_neg)

    x = lo.copy()
    scale = np.maximum(lam, 1.0)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(max_iter):
        xa = x[active]
        g = xa - v[active] - lw[active] * xa ** (-a)
        done = np.abs(g) <= tol * scale[active]
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(g < 0, xa, lo_a)
        hi_a = np.where(g > 0, xa, hi_a)
        dg = 1.0 + a * lw[active] * xa ** (-a - 1.0)
        step = xa - g / dg
        bad = ~((step > lo_a) & (step < hi_a))
        step = np.where(bad, 0.5 * (lo_a + hi_a), step)
        done |= (hi_a - lo_a) <= 4e-16 * hi_a
        step = np.where(done, xa, step)
        lo[active], hi[active] = lo_a, hi_a
        x[active] = step
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    return x


def prox_fair(w, alpha, lam, v):
    """Scalar proximal step of the alpha-fair utility (see :func:`prox_fair_batch`)."""
    return float(prox_fair_batch(np.array([w]), alpha, lam, np.array([v]))[0])


# ---------------------------------------------------------------------------
# Projection onto {y >= floors, sum(y) <= capacity}
# ---------------------------------------------------------------------------

def project_capped_simplex_batch(values, floors, capacity, seg):
    """Project consecutive segments of ``values`` onto capped simplices.

    Parameters
    ----------
    values, floors : (n,) arrays
    capacity : (k,) array, one capacity per segment
    seg : (k + 1,) array of segment offsets into ``values``
    """
    values = np.asarray(values, float)
    floors = np.asarray(floors, float)
    capacity = np.asarray(capacity, float)
    seg = np.asarray(seg)
    k = len(capacity)
    if len(values) == 0:
        return values.copy()
    sizes = np.diff(seg)
    owner = np.repeat(np.arange(k), sizes)

    budget = capacity - np.bincount(owner, weights=floors, minlength=k)
    if np.any(budget < -1e-9):
        j = int(np.flatnonzero(budget < -1e-9)[0])
        raise InfeasibleFloorError(
            f"floors exceed capacity on segment {j} by {-budget[j]:.3e}")
    budget = np.maximum(budget, 0.0)

    z = values - floors
    zc = np.maximum(z, 0.0)
    over = np.bincount(owner, weights=zc, minlength=k) > budget
    out = zc
    if over.any():
        sel = over[owner]
        zs, own = z[sel], owner[sel]
        order = np.lexsort((-zs, own))
        zs_sorted = zs[order]
        own_sorted = own[order]
        cs = np.cumsum(zs_sorted)
        # position (1-based) within the segment and segment-local cumulative sum
        starts = np.flatnonzero(np.r_[True, own_sorted[1:] != own_sorted[:-1]])
        lens = np.diff(np.r_[starts, len(own_sorted)])
        base = np.repeat(np.r_[0.0, cs][starts], lens)
        pos = np.arange(len(zs_sorted)) - np.repeat(starts, lens) + 1
        cs_local = cs - base
        cond = zs_sorted - (cs_local - budget[own_sorted]) / pos > 0
        rho = np.maximum(np.bincount(own_sorted, weights=cond, minlength=k).astype(np.intp), 1)
        seg_ids = own_sorted[starts]
        last = starts + rho[seg_ids] - 1
        theta = np.zeros(k)
        theta[seg_ids] = (cs_local[last] - budget[seg_ids]) / rho[seg_ids]
        out = zc.copy()
        out[sel] = np.maximum(zs - theta[own], 0.0)
    return out + floors


def project_capped_simplex(values, floors, capacity):
    """Euclidean projection onto ``{y : y >= floors, sum(y) <= capacity}``."""
    values = np.asarray(values, float)
    return project_capped_simplex_batch(values, floors, np.array([capacity], float),
                                        np.array([0, len(values)]))


# ---------------------------------------------------------------------------
# Penalty initialization and residual balancing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyParams:
    lambda0: float
    sigma: float
    lipschitz: float


@dataclass(frozen=True)
class RbConfig:
    """Residual balancing parameters.

    At the k-th update the penalty moves by ``1 + (tau - 1) / k**decay``; with
    ``decay > 1`` the total adjustment is bounded, ``decay = 0`` keeps a
    constant factor ``tau``. After ``patience`` consecutive moves in the same
    direction the step counter restarts, so a badly chosen penalty can still
    travel far; ``patience = 0`` never restarts.
    """
    mu: float = 10.0
    tau: float = 2.0
    enabled: bool = True
    decay: float = 2.0
    patience: int = 200

    def __post_init__(self):
        if not (self.mu > 1 and self.tau > 1):
            raise ValueError("residual balancing needs mu > 1 and tau > 1")
        if self.decay < 0:
            raise ValueError("decay must be nonnegative")
        if self.patience < 0:
            raise ValueError("patience must be nonnegative")

    def factor(self, k):
        return 1.0 + (self.tau - 1.0) / float(k) ** self.decay


def penalty_from_bound(instance, alpha, d):
    """Reciprocal penalty ``1/sqrt(sigma*L)`` from a lower bound ``d``.

    ``sigma`` is the curvature of ``-f`` at the utopia point (the largest
    feasible value of each coordinate) and ``L`` the curvature at the bound.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    dv = np.asarray(getattr(d, "values", d), float)
    if not np.all(dv > 0):
        raise ValueError("bound entries must be strictly positive")
    w = instance.weights
    b = utopia(instance)
    sigma = float(np.min(alpha * w * b ** (-(alpha + 1.0))))
    lipschitz = float(np.max(alpha * w * dv ** (-(alpha + 1.0))))
    return PenaltyParams(1.0 / np.sqrt(sigma * lipschitz), sigma, lipschitz)


def residual_balance(lam, primal, dual, rb=RbConfig(), iteration=1):
    """Rescale the reciprocal penalty when one residual dominates the other.

    A large primal residual calls for a larger penalty, i.e. a smaller
    ``lam``; a large dual residual for the opposite.
    """
    if not rb.enabled:
        return lam
    if primal > rb.mu * dual:
        return lam / rb.factor(iteration)
    if dual > rb.mu * primal:
        return lam * rb.factor(iteration)
    return lam
