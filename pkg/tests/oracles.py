"""Independent reference computations used to cross-check the library.

Nothing here uses the library's successor maps, value iteration, flow solver
or distance iteration; everything is recomputed from ``Mdp.transitions``.
"""

import itertools

import numpy as np


# -- semantics ----------------------------------------------------------------------------


def forward_weights(m, trace):
    """Probability weights of the states reachable along ``trace`` (summed over state paths)."""
    w = {q: 1.0 for q in m.states if q == m.initial and m.labels[q] == trace[0]}
    for k in range(1, len(trace), 2):
        i, o = trace[k], trace[k + 1]
        nxt = {}
        for q, p in w.items():
            for t, r in m.transitions[q][i].items():
                if r > 0 and m.labels[t] == o:
                    nxt[t] = nxt.get(t, 0.0) + p * r
        w = nxt
    return w


def brute_semantics(m, seq):
    """Next-output distribution after test sequence ``seq``; {} if ``seq`` is unobservable."""
    seq = tuple(seq)
    if not seq:
        return {m.labels[m.initial]: 1.0}
    w = forward_weights(m, seq[:-1])
    total = sum(w.values())
    if total <= 0:
        return {}
    out = {}
    i = seq[-1]
    for q, p in w.items():
        for t, r in m.transitions[q][i].items():
            if r > 0:
                out[m.labels[t]] = out.get(m.labels[t], 0.0) + p * r / total
    return out


def brute_equivalent(m1, m2, depth, tol=1e-9):
    """Compare semantics on every test sequence with at most ``depth`` inputs."""
    if m1.labels[m1.initial] != m2.labels[m2.initial]:
        return False
    frontier = [(m1.labels[m1.initial],)]
    for _ in range(depth):
        nxt = []
        for t in frontier:
            for i in m1.inputs:
                d1 = brute_semantics(m1, t + (i,))
                d2 = brute_semantics(m2, t + (i,))
                for o in set(d1) | set(d2):
                    if abs(d1.get(o, 0.0) - d2.get(o, 0.0)) > tol:
                        return False
                nxt += [t + (i, o) for o in sorted(d1)]
        frontier = nxt
    return True


# -- maximal reachability by scheduler enumeration ----------------------------------------


def pmax_by_enumeration(m, goal, avoid, k):
    """Maximum over all deterministic step-dependent schedulers of P(!avoid U<=k goal)."""
    free = [q for q in m.states if m.labels[q] != goal and m.labels[q] not in avoid]
    if m.labels[m.initial] == goal:
        return 1.0
    if m.initial not in free:
        return 0.0
    # only (step, state) pairs that can actually occur need a decision
    slots, layer = [], {m.initial}
    for j in range(k):
        live = sorted(q for q in layer if q in free)
        slots += [(j, q) for q in live]
        layer = {t for q in live for i in m.inputs for t, p in m.transitions[q][i].items() if p > 0}
    best = 0.0
    for choice in itertools.product(m.inputs, repeat=len(slots)):
        sched = dict(zip(slots, choice))
        dist = {m.initial: 1.0}
        reached = 0.0
        for j in range(k):
            nxt = {}
            for q, p in dist.items():
                for t, r in m.transitions[q][sched[(j, q)]].items():
                    if r <= 0:
                        continue
                    if m.labels[t] == goal:
                        reached += p * r
                    elif m.labels[t] not in avoid:
                        nxt[t] = nxt.get(t, 0.0) + p * r
            dist = nxt
        best = max(best, reached)
    return best


# -- optimal transport by vertex enumeration ----------------------------------------------


def coupling_vertices(mu1, mu2):
    """All vertices of the transport polytope of two distributions (as dense matrices)."""
    a = np.asarray(mu1, dtype=float)
    b = np.asarray(mu2, dtype=float)
    n, m = len(a), len(b)
    cells = [(x, y) for x in range(n) for y in range(m)]
    A = np.zeros((n + m, len(cells)))
    for k, (x, y) in enumerate(cells):
        A[x, k] = 1.0
        A[n + y, k] = 1.0
    rhs = np.concatenate([a, b])
    verts = []
    size = min(n + m - 1, len(cells))
    for basis in itertools.combinations(range(len(cells)), size):
        sub = A[:, basis]
        sol, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ sol - rhs)) > 1e-9 or np.min(sol) < -1e-12:
            continue
        pi = np.zeros((n, m))
        for k, c in enumerate(basis):
            pi[cells[c]] = max(sol[k], 0.0)
        if not any(np.allclose(pi, v, atol=1e-12) for v in verts):
            verts.append(pi)
    return verts


def transport_by_enumeration(cost, mu1, mu2):
    cost = np.asarray(cost, dtype=float)
    return min(float(np.sum(v * cost)) for v in coupling_vertices(mu1, mu2))


def naive_distance(m1, m2, lam, iters=None):
    """Discounted bisimilarity distance by plain fixed-point iteration on all state pairs."""
    n1, n2 = m1.n_states, m2.n_states
    mismatch = np.array([[float(m1.labels[a] != m2.labels[b]) for b in range(n2)] for a in range(n1)])
    # coupling vertices do not depend on the distance, so they are computed once
    polys = {}
    for a in range(n1):
        for b in range(n2):
            if mismatch[a, b]:
                continue
            for i in m1.inputs:
                s1 = sorted(t for t, p in m1.transitions[a][i].items() if p > 0)
                s2 = sorted(t for t, p in m2.transitions[b][i].items() if p > 0)
                mu1 = [m1.transitions[a][i][t] for t in s1]
                mu2 = [m2.transitions[b][i][t] for t in s2]
                polys[(a, b, i)] = (s1, s2, np.array(coupling_vertices(mu1, mu2)))
    if iters is None:
        iters = int(np.ceil(np.log(1e-10) / np.log(lam))) + 1
    d = mismatch.copy()
    for _ in range(iters):
        new = mismatch.copy()
        for a in range(n1):
            for b in range(n2):
                if mismatch[a, b]:
                    continue
                best = 0.0
                for i in m1.inputs:
                    s1, s2, verts = polys[(a, b, i)]
                    sub = d[np.ix_(s1, s2)]
                    best = max(best, float(np.min(np.einsum("kxy,xy->k", verts, sub))))
                new[a, b] = lam * best
        d = new
    return d
