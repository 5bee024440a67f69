"""Network instances: links, requests with fixed routes, and random generation.

An :class:`Instance` is immutable once built. Links and requests are kept in
ascending (natural) id order, and all derived index structures are numpy
arrays of positions into those orderings.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import networkx as nx
import numpy as np
import scipy.sparse as sp


class InstanceError(ValueError):
    """Raised when links/requests violate the instance invariants."""


def natural_key(ident):
    """Sort key that orders ``"j2"`` before ``"j10"``."""
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", ident))


@dataclass(frozen=True)
class Link:
    id: str
    capacity: float


@dataclass(frozen=True)
class Request:
    id: str
    route: tuple
    weight: float


@dataclass(frozen=True, eq=False)
class Instance:
    links: tuple
    requests: tuple
    # derived, all in positional indices
    capacities: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    routes: tuple = field(repr=False)  # J_r as int arrays
    link_requests: tuple = field(repr=False)  # R_j as int arrays
    neighbors: tuple = field(repr=False)  # R^r as int arrays
    incidence: sp.csr_matrix = field(repr=False)

    @property
    def n_links(self):
        return len(self.links)

    @property
    def n_requests(self):
        return len(self.requests)

    @property
    def link_ids(self):
        return [l.id for l in self.links]

    @property
    def request_ids(self):
        return [r.id for r in self.requests]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.links == other.links and self.requests == other.requests

    def __hash__(self):
        return hash((self.links, self.requests))

    def summary(self):
        c, w = self.capacities, self.weights
        return {
            "links": self.n_links,
            "requests": self.n_requests,
            "delta_w": float(w.min() / w.max()),
            "delta_c": float(c.min() / c.max()),
        }


def build_instance(links, requests):
    """Validate links and requests and derive R_j, R^r and the incidence matrix.

    ``links`` and ``requests`` may be :class:`Link`/:class:`Request` objects or
    plain ``(id, capacity)`` / ``(id, route, weight)`` tuples.
    """
    links = [l if isinstance(l, Link) else Link(*l) for l in links]
    requests = [r if isinstance(r, Request) else Request(*r) for r in requests]

    seen = set()
    for l in links:
        if l.id in seen:
            raise InstanceError(f"duplicate link id {l.id!r}")
        seen.add(l.id)
        if not l.capacity > 0:
            raise InstanceError(f"link {l.id!r}: capacity must be positive, got {l.capacity!r}")
    links.sort(key=lambda l: natural_key(l.id))
    link_pos = {l.id: i for i, l in enumerate(links)}

    seen = set()
    cleaned = []
    for r in requests:
        if r.id in seen:
            raise InstanceError(f"duplicate request id {r.id!r}")
        seen.add(r.id)
        if len(r.route) == 0:
            raise InstanceError(f"request {r.id!r}: empty route")
        for j in r.route:
            if j not in link_pos:
                raise InstanceError(f"request {r.id!r}: unknown link id {j!r}")
        if len(set(r.route)) != len(r.route):
            raise InstanceError(f"request {r.id!r}: route repeats a link")
        if not r.weight > 0:
            raise InstanceError(f"request {r.id!r}: weight must be positive, got {r.weight!r}")
        route = tuple(sorted(r.route, key=natural_key))
        cleaned.append(Request(r.id, route, float(r.weight)))
    cleaned.sort(key=lambda r: natural_key(r.id))
    links = [Link(l.id, float(l.capacity)) for l in links]

    routes = tuple(np.array([link_pos[j] for j in r.route], dtype=np.intp) for r in cleaned)
    nnz = sum(len(rt) for rt in routes)
    cols = np.repeat(np.arange(len(cleaned)), [len(rt) for rt in routes])
    rows = np.concatenate(routes) if routes else np.zeros(0, dtype=np.intp)
    A = sp.csr_matrix((np.ones(nnz), (rows, cols)), shape=(len(links), len(cleaned)))
    A.sort_indices()
    link_requests = tuple(A.indices[A.indptr[j]:A.indptr[j + 1]].astype(np.intp)
                          for j in range(len(links)))
    share = (A.T @ A).tocsr()
    share.sort_indices()
    neighbors = tuple(share.indices[share.indptr[r]:share.indptr[r + 1]].astype(np.intp)
                      for r in range(len(cleaned)))

    return Instance(
        links=tuple(links),
        requests=tuple(cleaned),
        capacities=np.array([l.capacity for l in links], dtype=float),
        weights=np.array([r.weight for r in cleaned], dtype=float),
        routes=routes,
        link_requests=link_requests,
        neighbors=neighbors,
        incidence=A,
    )


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    node_count: int = 100
    attachment: int = 4
    request_count: int = 1000
    delta_w: float = 1.0
    delta_c: float = 1.0
    capacity_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.node_count > self.attachment >= 1:
            raise ValueError("need node_count > attachment >= 1")
        if self.request_count < 1:
            raise ValueError("request_count must be >= 1")
        for name in ("delta_w", "delta_c"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not self.capacity_scale > 0:
            raise ValueError("capacity_scale must be positive")


def barabasi_albert(n, m, seed):
    """Preferential-attachment graph grown from a clique on ``m + 1`` nodes."""
    return nx.barabasi_albert_graph(n, m, seed=seed, initial_graph=nx.complete_graph(m + 1))


def bfs_path(adj, source, target):
    """Hop-count shortest path; neighbors are visited in ascending node id."""
    parent = {source: None}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == target:
            break
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    if target not in parent:
        return None
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def generate_instance(config):
    """Random instance on a Barabási–Albert graph with shortest-path routes.

    Each undirected edge is one link. Weights are uniform on ``[delta_w, 1]``
    and capacities uniform on ``[delta_c, 1] * capacity_scale``.
    """
    rng = np.random.default_rng(config.seed)
    graph_seed = int(rng.integers(2**31 - 1))
    g = barabasi_albert(config.node_count, config.attachment, graph_seed)
    edges = sorted(tuple(sorted(e)) for e in g.edges())
    edge_id = {e: f"j{k}" for k, e in enumerate(edges)}
    adj = {u: sorted(g.neighbors(u)) for u in sorted(g.nodes())}

    caps = rng.uniform(config.delta_c, 1.0, size=len(edges)) * config.capacity_scale
    links = [Link(edge_id[e], float(c)) for e, c in zip(edges, caps)]

    n = config.node_count
    requests = []
    for k in range(config.request_count):
        src = int(rng.integers(n))
        dst = int(rng.integers(n - 1))
        if dst >= src:
            dst += 1
        path = bfs_path(adj, src, dst)
        if path is None:
            raise RuntimeError(f"nodes {src} and {dst} are disconnected")
        route = tuple(edge_id[tuple(sorted(e))] for e in zip(path[:-1], path[1:]))
        requests.append(Request(f"r{k}", route, 1.0))
    weights = rng.uniform(config.delta_w, 1.0, size=config.request_count)
    requests = [Request(r.id, r.route, float(w)) for r, w in zip(requests, weights)]
    return build_instance(links, requests)


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["links", "requests"],
    "properties": {
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "capacity"],
                "properties": {
                    "id": {"type": "string"},
                    "capacity": {"type": "number"},
                },
            },
        },
        "requests": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "weight", "route"],
                "properties": {
                    "id": {"type": "string"},
                    "weight": {"type": "number"},
                    "route": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
    },
}


def instance_to_dict(instance):
    return {
        "links": [{"id": l.id, "capacity": l.capacity} for l in instance.links],
        "requests": [{"id": r.id, "weight": r.weight, "route": list(r.route)}
                     for r in instance.requests],
    }


def instance_from_dict(doc):
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceError(f"schema error at {where}: {exc.message}") from None
    links = [Link(d["id"], float(d["capacity"])) for d in doc["links"]]
    requests = [Request(d["id"], tuple(d["route"]), float(d["weight"])) for d in doc["requests"]]
    return build_instance(links, requests)


def save_instance(instance, path):
    text = json.dumps(instance_to_dict(instance), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_instance(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed instance file {path}: line {exc.lineno}: {exc.msg}") from None
    return instance_from_dict(doc)
