"""Reference solutions and optimality certificates.

Nothing here shares code with the ADMM path: the reference solver is a
primal-dual interior-point method on the capacity constraints, so agreement
between the two is a genuine cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import nnls

from .instance import Link, build_instance


class ReferenceSolverError(RuntimeError):
    pass


def waterfill_single_link(weights, alpha, capacity):
    """Alpha-fair split of one link: ``x_r = (w_r / nu)**(1/alpha)`` saturating it."""
    w = np.asarray(weights, float)
    if not alpha > 0 or not capacity > 0:
        raise ValueError("alpha and capacity must be positive")
    # with t = nu**(-1/alpha) the capacity equation is linear in t
    wa = w ** (1.0 / alpha)
    return wa * (capacity / wa.sum())


def _ipm(A, c, w, alpha, tol=1e-8, max_iter=200):
    """Primal-dual interior point for ``max f(w, x)`` s.t. ``A x <= c``."""
    m, n = A.shape
    # strictly feasible start: half of each request's smallest fair share
    load = A.sum(axis=1)
    share = np.where(load > 0, c / np.maximum(load, 1), np.inf)
    x = 0.5 * np.array([share[A[:, r] > 0].min() for r in range(n)])
    s = c - A @ x
    grad = -w * x ** (-alpha)
    mu = np.full(m, max(np.abs(grad).max(), 1.0) / max(c.max(), 1.0))

    for k in range(max_iter):
        grad = -w * x ** (-alpha)
        stat = grad + A.T @ mu
        r_p = c - A @ x - s
        gap = mu @ s
        scale = (w * x ** (1.0 - alpha)).sum()
        stat_rel = np.max(np.abs(stat) / np.abs(grad))
        if stat_rel < tol and gap < 1e-2 * tol * scale and np.all(r_p >= -tol * c):
            return x, mu, s
        target = 0.1 * gap / m
        H = np.diag(alpha * w * x ** (-alpha - 1.0)) + A.T @ ((mu / s)[:, None] * A)
        rhs = -grad - A.T @ ((target - mu * r_p) / s)
        sc = 1.0 / np.sqrt(np.diag(H))
        try:
            dx = sc * cho_solve(cho_factor(H * sc[:, None] * sc[None, :]), rhs * sc)
        except np.linalg.LinAlgError:
            raise ReferenceSolverError("interior point Newton system became singular") from None
        ds = r_p - A @ dx
        dmu = (target - mu * s - mu * ds) / s
        step = 1.0
        # rates may at most halve per step: the utility is steep near zero
        for v, dv, frac in ((x, dx, 0.5), (s, ds, 0.99), (mu, dmu, 0.99)):
            neg = dv < 0
            if neg.any():
                step = min(step, frac * np.min(-v[neg] / dv[neg]))
        x = x + step * dx
        s = s + step * ds
        mu = mu + step * dmu
    raise ReferenceSolverError(f"interior point did not converge in {max_iter} iterations")


def _newton_kkt(A, c, w, alpha, x, mu, iters=6):
    """Newton on ``grad + A^T mu = 0, A x = c``; the Hessian is diagonal."""
    for _ in range(iters):
        F1 = -w * x ** (-alpha) + A.T @ mu
        F2 = A @ x - c
        hinv = x ** (alpha + 1.0) / (alpha * w)
        S = (A * hinv) @ A.T
        dmu = np.linalg.lstsq(S, F2 - (A * hinv) @ F1, rcond=None)[0]
        dx = -hinv * (F1 + A.T @ dmu)
        if np.any(x + dx <= 0):
            return None
        x, mu = x + dx, mu + dmu
    return x, mu


def _polish(A, c, w, alpha, x, mu, s, rounds=10):
    """Refine the interior-point solution on its set of tight links.

    The set starts from a slack-versus-price comparison and is corrected, one
    link at a time, until the Newton point is feasible with nonnegative prices.
    """
    g = w * x ** (-alpha)
    gmax = np.array([g[row > 0].max() for row in A])
    active = s / c < mu / gmax
    for _ in range(rounds):
        if not active.any():
            return x
        out = _newton_kkt(A[active], c[active], w, alpha, x, mu[active])
        if out is None:
            return x
        xn, mua = out
        over = (A @ xn - c) / c
        if over.max() > 1e-12:
            active[np.argmax(np.where(active, -np.inf, over))] = True
            continue
        if mua.min() < -1e-9 * np.abs(mua).max():
            active[np.flatnonzero(active)[np.argmin(mua)]] = False
            continue
        return xn
    return x


def solve_reference(instance, alpha):
    """High-accuracy optimum of the alpha-fair problem on ``instance``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    c = instance.capacities
    finite = np.isfinite(c)
    A = instance.incidence.toarray()
    unbounded = ~(A[finite] > 0).any(axis=0)
    if unbounded.any():
        r = instance.requests[int(np.flatnonzero(unbounded)[0])].id
        raise ReferenceSolverError(f"request {r} crosses no finite-capacity link; objective unbounded")
    used = finite & (A.sum(axis=1) > 0)
    A, c = A[used], c[used]
    x, mu, s = _ipm(A, c, instance.weights, alpha)
    return _polish(A, c, instance.weights, alpha, x, mu, s)


@dataclass
class KktReport:
    satisfied: bool
    max_violation: float
    link_duals: np.ndarray
    stationarity: float = 0.0
    complementarity: float = 0.0
    feasibility: float = 0.0


def verify_kkt(instance, alpha, x, tolerance=1e-6):
    """Certify optimality of ``x`` through nonnegative link prices.

    All three gaps are relative: stationarity against each request's marginal
    utility ``w_r x_r**(-alpha)``, complementary slackness against
    ``c_j * max_{r in R_j} w_r x_r**(-alpha)``, feasibility against ``c_j``.
    """
    x = np.asarray(x, float)
    if x.shape != (instance.n_requests,):
        raise ValueError("allocation has the wrong length")
    if not np.all(x > 0):
        raise ValueError("allocation must be strictly positive")
    A = instance.incidence.toarray()
    c = instance.capacities
    slack = c - A @ x
    feas = float(np.max(np.maximum(-slack, 0.0) / c))
    if feas > tolerance:
        raise ValueError(f"allocation violates capacity by {feas:.3e} (relative)")

    g = instance.weights * x ** (-alpha)
    gmax = np.array([g[rj].max() if len(rj) else 1.0 for rj in instance.link_requests])
    slack_rel = np.maximum(slack, 0.0) / c
    # prices fit stationarity and complementarity together: stationarity alone
    # is degenerate when a request crosses several links
    M = np.vstack([A.T / g[:, None] * gmax, np.diag(slack_rel)])
    mu_scaled, _ = nnls(M, np.r_[np.ones(len(x)), np.zeros(len(c))])
    mu = mu_scaled * gmax
    stat = float(np.max(np.abs(A.T @ mu - g) / g))
    comp = float(np.max(mu * slack_rel / gmax))
    worst = max(stat, comp, feas)
    return KktReport(worst <= tolerance, worst, mu, stat, comp, feas)


def restricted_problem(instance, x_star, r0, tolerance=1e-9):
    """Problem over the requests sharing a link with ``r0``, others frozen at ``x_star``.

    ``r0`` is a request position. Returns the restricted instance; its
    requests keep their ids, so positions map through ``instance.neighbors[r0]``.
    """
    x_star = np.asarray(x_star, float)
    keep = set(int(s) for s in instance.neighbors[r0])
    own_links = set(int(j) for j in instance.routes[r0])
    links = []
    for j, link in enumerate(instance.links):
        rj = instance.link_requests[j]
        if not any(int(r) in keep for r in rj):
            continue
        cap = link.capacity
        if j not in own_links:
            cap -= sum(x_star[r] for r in rj if int(r) not in keep)
            if cap < -tolerance:
                raise ValueError(f"link {link.id}: reduced capacity {cap:.3e} is negative")
            if cap <= 0:
                raise ValueError(f"link {link.id}: reduced capacity vanishes")
        links.append(Link(link.id, cap))
    requests = [instance.requests[s] for s in sorted(keep)]
    return build_instance(links, requests)


def check_restriction_lemma(instance, alpha, r0, tolerance=1e-5):
    """Whether the restricted optimum at ``r0`` equals the full optimum on R^{r0}."""
    x_star = solve_reference(instance, alpha)
    sub = restricted_problem(instance, x_star, r0)
    x_sub = solve_reference(sub, alpha)
    ids = {rid: k for k, rid in enumerate(instance.request_ids)}
    full = x_star[[ids[rid] for rid in sub.request_ids]]
    return bool(np.max(np.abs(x_sub - full)) <= tolerance)
