"""Model-quality measures.

* :func:`pmax_bounded`: maximal probability of a (bounded) until property,
  computed by backward value iteration;
* :func:`kantorovich`: optimal transport cost between two finite distributions;
* :func:`bisim_distance`: discounted bisimilarity distance between the initial
  states of two MDPs, with distance 1 between differently labelled states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mdp import CHAOS, Mdp, PropertySpec


# -- model checking -----------------------------------------------------------------------


def _check_labels(m: Mdp, prop: PropertySpec, extra=()):
    known = set(m.outputs) | set(m.labels) | {CHAOS} | set(extra)
    unknown = sorted(({prop.goal} | set(prop.avoid)) - known)
    if unknown:
        raise ValueError(f"property {prop} uses unknown labels {unknown}; model outputs are {list(m.outputs)}")


def _transition_tensor(m: Mdp) -> np.ndarray:
    P = np.zeros((len(m.inputs), m.n_states, m.n_states))
    for q in m.states:
        for k, i in enumerate(m.inputs):
            for t, p in m.transitions[q].get(i, {}).items():
                P[k, q, t] += p
    return P


def pmax_values(m: Mdp, prop, tol: float = 1e-9, max_iter: int = 1_000_000, known_labels=()) -> np.ndarray:
    """Per-state maximal probabilities of ``prop`` (a :class:`PropertySpec` or its text).

    Labels in ``known_labels`` are accepted even if ``m`` never outputs them,
    e.g. when evaluating a learned model against the true model's alphabet.
    """
    if isinstance(prop, str):
        prop = PropertySpec.parse(prop)
    _check_labels(m, prop, known_labels)
    labels = np.array(m.labels, dtype=object)
    goal = labels == prop.goal
    avoid = np.isin(labels, list(prop.avoid)) if prop.avoid else np.zeros(m.n_states, dtype=bool)
    free = ~goal & ~avoid
    P = _transition_tensor(m)
    v = goal.astype(float)
    steps = prop.bound if prop.bound is not None else max_iter
    for _ in range(steps):
        new = np.where(free, np.max(P @ v, axis=0), v)
        if prop.bound is None and np.max(np.abs(new - v)) < tol:
            return new
        v = new
    return v


def pmax_bounded(m: Mdp, prop, tol: float = 1e-9, known_labels=()) -> float:
    """Maximal probability, over all schedulers, of satisfying ``prop`` from the initial state."""
    return float(pmax_values(m, prop, tol, known_labels=known_labels)[m.initial])


# -- optimal transport --------------------------------------------------------------------

_EPS = 1e-15


def kantorovich(d, mu1, mu2) -> float:
    """Minimal expected cost ``sum pi(x, y) d[x][y]`` over couplings ``pi`` of ``mu1`` and ``mu2``.

    ``mu1`` and ``mu2`` map points to probabilities (or are sequences indexed
    by point); ``d[x][y]`` is the cost of moving mass from ``x`` to ``y``.
    Solved exactly as a min-cost flow with successive shortest paths.
    """
    a = _as_items(mu1)
    b = _as_items(mu2)
    if not a or not b:
        return 0.0
    if len(a) == 1:
        x = a[0][0]
        return float(sum(p * d[x][y] for y, p in b))
    if len(b) == 1:
        y = b[0][0]
        return float(sum(p * d[x][y] for x, p in a))
    return _min_cost_flow([p for _, p in a], [p for _, p in b], [[d[x][y] for y, _ in b] for x, _ in a])


def _as_items(mu):
    if isinstance(mu, dict):
        items = mu.items()
    else:
        items = enumerate(mu)
    return [(k, float(p)) for k, p in items if p > _EPS]


def _min_cost_flow(supply, demand, cost) -> float:
    n, m = len(supply), len(demand)
    src, snk = n + m, n + m + 1
    graph = [[] for _ in range(n + m + 2)]
    # edge: [to, capacity, cost, index of reverse edge]

    def add(u, v, cap, c):
        graph[u].append([v, cap, c, len(graph[v])])
        graph[v].append([u, 0.0, -c, len(graph[u]) - 1])

    for x in range(n):
        add(src, x, supply[x], 0.0)
    for x in range(n):
        for y in range(m):
            add(x, n + y, float("inf"), float(cost[x][y]))
    for y in range(m):
        add(n + y, snk, demand[y], 0.0)
    target = min(sum(supply), sum(demand))
    flow, total = 0.0, 0.0
    size = len(graph)
    while target - flow > 1e-12:
        dist = [float("inf")] * size
        prev = [None] * size
        dist[src] = 0.0
        for _ in range(size - 1):
            changed = False
            for u in range(size):
                du = dist[u]
                if du == float("inf"):
                    continue
                for k, (v, cap, c, _) in enumerate(graph[u]):
                    if cap > 1e-12 and du + c < dist[v] - 1e-15:
                        dist[v] = du + c
                        prev[v] = (u, k)
                        changed = True
            if not changed:
                break
        if dist[snk] == float("inf"):
            break
        push = target - flow
        v = snk
        while v != src:
            u, k = prev[v]
            push = min(push, graph[u][k][1])
            v = u
        v = snk
        while v != src:
            u, k = prev[v]
            edge = graph[u][k]
            edge[1] -= push
            graph[v][edge[3]][1] += push
            v = u
        flow += push
        total += push * dist[snk]
    return float(total)


# -- bisimilarity distance ----------------------------------------------------------------


@dataclass
class DistanceConfig:
    lam: float = 0.9
    tol: float = 1e-6
    max_iters: int = 10_000

    def validate(self) -> "DistanceConfig":
        if not (0.0 < self.lam < 1.0):
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be positive")
        return self


def _relevant_pairs(m1, m2, start):
    """Label-equal state pairs whose distance influences ``start``."""
    seen = {start}
    queue = deque([start])
    while queue:
        a, b = queue.popleft()
        if m1.labels[a] != m2.labels[b]:
            continue
        for i in m1.inputs:
            for x, p in m1.transitions[a].get(i, {}).items():
                if p <= 0:
                    continue
                for y, r in m2.transitions[b].get(i, {}).items():
                    if r > 0 and (x, y) not in seen:
                        seen.add((x, y))
                        queue.append((x, y))
    return seen


def distance_matrix(m1: Mdp, m2: Mdp, config: Optional[DistanceConfig] = None, pairs=None, gaps=None) -> np.ndarray:
    """Fixed point of the discounted bisimilarity operator on ``states(m1) x states(m2)``.

    Only ``pairs`` (default: all) are iterated; the remaining entries keep
    their label-mismatch value.  The largest change of every iteration is
    appended to ``gaps`` if given.
    """
    config = (config or DistanceConfig()).validate()
    if set(m1.inputs) != set(m2.inputs):
        raise ValueError(f"input alphabets differ: {sorted(m1.inputs)} vs {sorted(m2.inputs)}")
    n1, n2 = m1.n_states, m2.n_states
    L1 = np.array(m1.labels, dtype=object)
    L2 = np.array(m2.labels, dtype=object)
    D = (L1[:, None] != L2[None, :]).astype(float)
    if pairs is None:
        pairs = [(a, b) for a in range(n1) for b in range(n2)]
    active = sorted((a, b) for a, b in pairs if m1.labels[a] == m2.labels[b])
    dists = [
        [
            (
                {t: p for t, p in m1.transitions[a].get(i, {}).items() if p > 0},
                {t: p for t, p in m2.transitions[b].get(i, {}).items() if p > 0},
            )
            for i in m1.inputs
        ]
        for a, b in active
    ]
    lam = config.lam
    for _ in range(int(config.max_iters)):
        new = D.copy()
        for (a, b), per_input in zip(active, dists):
            best = 0.0
            for mu1, mu2 in per_input:
                k = kantorovich(D, mu1, mu2)
                if k > best:
                    best = k
            new[a, b] = lam * best
        gap = float(np.max(np.abs(new - D))) if active else 0.0
        if gaps is not None:
            gaps.append(gap)
        D = new
        if gap < config.tol:
            break
    return D


def bisim_distance(m1: Mdp, m2: Mdp, config: Optional[DistanceConfig] = None, gaps=None) -> float:
    """Discounted bisimilarity distance between the initial states of ``m1`` and ``m2``."""
    config = (config or DistanceConfig()).validate()
    if set(m1.inputs) != set(m2.inputs):
        raise ValueError(f"input alphabets differ: {sorted(m1.inputs)} vs {sorted(m2.inputs)}")
    start = (m1.initial, m2.initial)
    if m1.labels[start[0]] != m2.labels[start[1]]:
        return 1.0
    pairs = _relevant_pairs(m1, m2, start)
    D = distance_matrix(m1, m2, config, pairs, gaps)
    return float(D[start])


def disjoint_union(m1: Mdp, m2: Mdp) -> Mdp:
    """Both models side by side; the initial state is that of ``m1``."""
    off = m1.n_states
    rows = [dict(r) for r in m1.transitions]
    rows += [{i: {t + off: p for t, p in d.items()} for i, d in r.items()} for r in m2.transitions]
    outputs = list(m1.outputs) + [o for o in m2.outputs if o not in m1.outputs]
    names = [f"a.{n}" for n in m1.state_names] + [f"b.{n}" for n in m2.state_names]
    return Mdp(m1.inputs, outputs, m1.labels + m2.labels, rows, m1.initial, names)


def pooled_distance_matrix(m1: Mdp, m2: Mdp, config: Optional[DistanceConfig] = None) -> np.ndarray:
    """Distances between all states of the disjoint union of ``m1`` and ``m2``."""
    u = disjoint_union(m1, m2)
    return distance_matrix(u, u, config)
