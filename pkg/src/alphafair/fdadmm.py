"""Fast distributed ADMM for the weighted alpha-fair allocation problem.

Links are split into domains. Every domain keeps a private copy ``x_p`` of the
rates of the requests crossing it, and one copy ``y_j`` per link for the
capacity constraint. A master averages all copies into the consensus ``z``
and adapts the reciprocal penalty ``lambda`` by residual balancing.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundVector, soa_bound, theorem_bound, utopia
from .subproblem import (RbConfig, penalty_from_bound, prox_fair_batch,
                         project_capped_simplex_batch, residual_balance)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Domain partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DomainPartition:
    domains: tuple  # J_p, link positions
    domain_requests: tuple  # R_p, request positions
    request_domains: tuple  # I_r, domain positions

    @property
    def n_domains(self):
        return len(self.domains)


def make_partition(instance, domains):
    """Build a partition from explicit link groups (lists of link positions)."""
    domains = tuple(np.array(sorted(set(int(j) for j in d)), dtype=np.intp) for d in domains)
    if any(len(d) == 0 for d in domains):
        raise ValueError("domains must be nonempty")
    allj = np.concatenate(domains)
    if len(allj) != len(np.unique(allj)):
        raise ValueError("a link belongs to more than one domain")
    if len(allj) != instance.n_links:
        raise ValueError("domains do not cover every link")
    domain_requests = []
    for d in domains:
        rs = [instance.link_requests[j] for j in d]
        domain_requests.append(np.unique(np.concatenate(rs)) if rs else np.zeros(0, np.intp))
    request_domains = [[] for _ in range(instance.n_requests)]
    for p, rp in enumerate(domain_requests):
        for r in rp:
            request_domains[r].append(p)
    return DomainPartition(domains, tuple(domain_requests),
                           tuple(np.array(q, dtype=np.intp) for q in request_domains))


def partition(instance, strategy="single"):
    """Split links into domains.

    ``strategy`` is ``"single"``, ``"per-link"`` or ``"chunks:P"`` (also the
    tuple ``("chunks", P)``); chunks are contiguous in link order.
    """
    J = instance.n_links
    if isinstance(strategy, str) and strategy.startswith("chunks:"):
        strategy = ("chunks", int(strategy.split(":", 1)[1]))
    if strategy == "single":
        groups = [range(J)]
    elif strategy in ("per-link", "perLink"):
        groups = [[j] for j in range(J)]
    elif isinstance(strategy, tuple) and strategy[0] == "chunks":
        P = strategy[1]
        if not 1 <= P <= J:
            raise ValueError(f"cannot split {J} links into {P} domains")
        groups = np.array_split(np.arange(J), P)
    else:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    return make_partition(instance, groups)


# ---------------------------------------------------------------------------
# Solver state
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DomainState:
    links: np.ndarray
    seg: np.ndarray  # offsets of each link's block in the y arrays
    y_req: np.ndarray  # request position of every y entry
    caps: np.ndarray
    floors: np.ndarray
    y: np.ndarray
    u: np.ndarray
    x_req: np.ndarray  # R_p
    eff_w: np.ndarray  # w_r / |I_r|
    x: np.ndarray
    v: np.ndarray


@dataclass(eq=False)
class SolverState:
    domains: list
    z: np.ndarray
    lam: float
    copies: np.ndarray  # |J_r| + |I_r|
    iteration: int = 0


@dataclass(frozen=True)
class SolverConfig:
    """FD-ADMM settings.

    ``penalty`` is ``"local"`` (lambda0 from the local bound), ``"soa"`` (from
    the global bound) or a positive number used as a fixed lambda0.
    """
    alpha: float = 1.0
    tolerance: float = 1e-2
    max_iterations: int = 100_000
    penalty: object = "local"
    rb: RbConfig = field(default_factory=RbConfig)
    bound: BoundVector | None = None
    use_floors: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if isinstance(self.penalty, str):
            if self.penalty not in ("local", "soa"):
                raise ValueError(f"unknown penalty mode {self.penalty!r}")
        elif not float(self.penalty) > 0:
            raise ValueError("a fixed lambda0 must be positive")


@dataclass
class Trace:
    primal: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    objective: list = field(default_factory=list)

    def __len__(self):
        return len(self.primal)

    def append(self, primal, dual, lam, objective):
        self.primal.append(primal)
        self.dual.append(dual)
        self.lam.append(lam)
        self.objective.append(objective)


@dataclass
class SolveResult:
    allocation: np.ndarray
    trace: Trace
    converged: bool
    iterations: int
    lambda0: float
    bound: BoundVector

    @property
    def primal(self):
        return self.trace.primal[-1] if len(self.trace) else float("nan")

    @property
    def dual(self):
        return self.trace.dual[-1] if len(self.trace) else float("nan")


def utility(w, alpha, x):
    """Alpha-fair utility ``f(w, x)``."""
    if alpha == 1:
        return float(np.sum(w * np.log(x)))
    return float(np.sum(w * x ** (1.0 - alpha)) / (1.0 - alpha))


def init_state(instance, part, start, lam, floors):
    """Cold start: every copy equals ``start``, duals are zero."""
    n_dom = np.array([len(q) for q in part.request_domains])
    domains = []
    for p, links in enumerate(part.domains):
        blocks = [instance.link_requests[j] for j in links]
        seg = np.r_[0, np.cumsum([len(b) for b in blocks])].astype(np.intp)
        y_req = np.concatenate(blocks) if blocks else np.zeros(0, np.intp)
        x_req = part.domain_requests[p]
        domains.append(DomainState(
            links=links, seg=seg, y_req=y_req,
            caps=instance.capacities[links].copy(),
            floors=floors[y_req].copy(),
            y=start[y_req].copy(), u=np.zeros(len(y_req)),
            x_req=x_req, eff_w=instance.weights[x_req] / n_dom[x_req],
            x=start[x_req].copy(), v=np.zeros(len(x_req)),
        ))
    copies = np.array([len(rt) for rt in instance.routes]) + n_dom
    return SolverState(domains, start.astype(float).copy(), float(lam), copies)


def domain_step(ds, z, lam, alpha):
    """One domain's updates, in place: link duals, projections, rate duals, prox."""
    zy = z[ds.y_req]
    ds.u += ds.y - zy
    ds.y = project_capped_simplex_batch(zy - ds.u, ds.floors, ds.caps, ds.seg)
    zx = z[ds.x_req]
    ds.v += ds.x - zx
    ds.x = prox_fair_batch(ds.eff_w, alpha, lam, zx - ds.v)
    return ds


def master_step(state, part=None):
    """Average every copy of each request's rate; returns the new consensus."""
    idx = []
    vals = []
    for ds in state.domains:
        idx += [ds.y_req, ds.x_req]
        vals += [ds.y, ds.x]
    total = np.bincount(np.concatenate(idx), weights=np.concatenate(vals),
                        minlength=len(state.z))
    return total / state.copies


def residuals(state, z_prev):
    """Stacked consensus gap and penalty-scaled change of the consensus."""
    z = state.z
    sq = 0.0
    for ds in state.domains:
        sq += float(np.sum((ds.y - z[ds.y_req]) ** 2)) + float(np.sum((ds.x - z[ds.x_req]) ** 2))
    primal = np.sqrt(sq)
    dual = np.sqrt(float(np.sum(state.copies * (z - z_prev) ** 2))) / state.lam
    return primal, dual


def _restore_feasibility(instance, z, d):
    """Shrink toward ``d`` along overloaded routes so that ``A z <= c``."""
    c = instance.capacities
    factor = np.ones(instance.n_links)
    for j, rj in enumerate(instance.link_requests):
        if len(rj) == 0:
            continue
        load = z[rj].sum()
        if load > c[j]:
            extra = (z[rj] - d[rj]).sum()
            factor[j] = max(c[j] - d[rj].sum(), 0.0) / extra if extra > 0 else 0.0
    t = np.array([min(1.0, factor[rt].min()) for rt in instance.routes])
    return d + t * (z - d)


def initial_bound(instance, config):
    if config.bound is not None:
        return config.bound
    if config.penalty == "soa":
        return soa_bound(instance, config.alpha)
    return theorem_bound(instance, config.alpha)


def solve(instance, part=None, config=SolverConfig()):
    """Run FD-ADMM until both residuals drop below ``config.tolerance``."""
    if part is None:
        part = partition(instance, "single")
    alpha = config.alpha
    bound = initial_bound(instance, config)
    d = bound.values
    if isinstance(config.penalty, str):
        lam0 = penalty_from_bound(instance, alpha, bound).lambda0
    else:
        lam0 = float(config.penalty)
    floors = d if config.use_floors else np.zeros_like(d)
    state = init_state(instance, part, d, lam0, floors)
    w = instance.weights
    trace = Trace()
    converged = False
    step, streak, last = 1, 0, 0  # residual-balancing schedule

    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for it in range(1, config.max_iterations + 1):
            z, lam = state.z, state.lam
            if pool is None:
                for ds in state.domains:
                    domain_step(ds, z, lam, alpha)
            else:
                list(pool.map(lambda ds: domain_step(ds, z, lam, alpha), state.domains))
            z_prev = state.z
            state.z = master_step(state)
            state.iteration = it
            primal, dual = residuals(state, z_prev)
            trace.append(primal, dual, lam, utility(w, alpha, state.z))
            if primal < config.tolerance and dual < config.tolerance:
                converged = True
                break
            new_lam = residual_balance(lam, primal, dual, config.rb, step)
            step += 1
            move = (new_lam > lam) - (new_lam < lam)
            streak = streak + 1 if move and move == last else int(move != 0)
            last = move
            if config.rb.patience and streak >= config.rb.patience:
                step, streak = 1, 0
            if new_lam != lam:
                # scaled duals follow the penalty
                for ds in state.domains:
                    ds.u *= new_lam / lam
                    ds.v *= new_lam / lam
                state.lam = new_lam
    finally:
        if pool is not None:
            pool.shutdown()

    if not converged:
        log.warning("FD-ADMM stopped at %d iterations without converging", state.iteration)
    z = np.clip(state.z, d, np.maximum(utopia(instance), d))
    z = _restore_feasibility(instance, z, d)
    return SolveResult(z, trace, converged, state.iteration, float(lam0), bound)
