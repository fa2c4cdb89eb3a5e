"""Passive learning with IoAlergia-style state merging.

Traces are first arranged in a frequency prefix tree acceptor (FPTA).  Nodes
are then merged in red-blue order whenever their output frequencies are not
significantly different according to a Hoeffding bound, recursively over
their subtrees.  Transition probabilities of the result are normalised
frequencies.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .mdp import Mdp, check_mdp, equivalence_check, minimize
from .stats import hoeffding_bound
from .validation import check_trace


class FptaNode:
    __slots__ = ("trace", "label", "count", "freq", "children")

    def __init__(self, trace):
        self.trace = trace
        self.label = trace[-1]
        self.count = 0
        self.freq = {}  # input -> output -> count
        self.children = {}  # input -> output -> node

    def row(self, i) -> dict:
        return self.freq.get(i, {})


class Fpta:
    """Frequency prefix tree acceptor over ``(trace, multiplicity)`` data."""

    def __init__(self, root_label=None):
        self.root = FptaNode((root_label,)) if root_label is not None else None
        self.n_nodes = 1 if self.root is not None else 0
        self.n_outputs = 0
        self.inputs = []

    def add(self, trace, count: int = 1) -> None:
        trace = check_trace(trace)
        if self.root is None:
            self.root = FptaNode((trace[0],))
            self.n_nodes = 1
        if trace[0] != self.root.label:
            raise ValueError(f"trace starts with {trace[0]!r}, expected initial output {self.root.label!r}")
        node = self.root
        node.count += count
        for k in range(1, len(trace), 2):
            i, o = trace[k], trace[k + 1]
            if i not in self.inputs:
                self.inputs.append(i)
            row = node.freq.setdefault(i, {})
            row[o] = row.get(o, 0) + count
            kids = node.children.setdefault(i, {})
            child = kids.get(o)
            if child is None:
                child = kids[o] = FptaNode(node.trace + (i, o))
                self.n_nodes += 1
            child.count += count
            node = child
        self.n_outputs += count * ((len(trace) + 1) // 2)


def build_fpta(traces: Iterable, initial_output=None) -> Fpta:
    """FPTA from traces (or ``(trace, count)`` pairs, or a sample store)."""
    if hasattr(traces, "traces") and callable(traces.traces):
        traces = traces.traces()
    fpta = Fpta(initial_output)
    for item in traces:
        if len(item) == 2 and isinstance(item[0], (tuple, list)):
            fpta.add(tuple(item[0]), int(item[1]))
        else:
            fpta.add(tuple(item))
    return fpta


def default_eps(n_outputs: int) -> float:
    """Significance ``10000 / N`` for ``N`` observed outputs."""
    return 10000.0 / max(n_outputs, 1)


def _bound(n1, n2, eps):
    # for eps >= 2 the logarithm is not positive; every gap then counts as different
    if eps >= 2.0:
        return 0.0
    return hoeffding_bound(n1, n2, eps)


def _rows_differ(f1, f2, eps) -> bool:
    n1 = sum(f1.values())
    n2 = sum(f2.values())
    if n1 == 0 or n2 == 0:
        return False
    bound = _bound(n1, n2, eps)
    for o in set(f1) | set(f2):
        if abs(f1.get(o, 0) / n1 - f2.get(o, 0) / n2) > bound:
            return True
    return False


def _compatible(a: FptaNode, b: FptaNode, eps: float, inputs) -> bool:
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x.label != y.label:
            return False
        for i in inputs:
            fx, fy = x.row(i), y.row(i)
            if _rows_differ(fx, fy, eps):
                return False
            kx, ky = x.children.get(i, {}), y.children.get(i, {})
            for o, cy in ky.items():
                cx = kx.get(o)
                if cx is not None and cx is not cy:
                    stack.append((cx, cy))
    return True


def _fold(red: FptaNode, blue: FptaNode) -> None:
    stack = [(red, blue)]
    while stack:
        r, b = stack.pop()
        r.count += b.count
        for i, row in b.freq.items():
            rrow = r.freq.setdefault(i, {})
            for o, c in row.items():
                rrow[o] = rrow.get(o, 0) + c
        for i, kids in b.children.items():
            rkids = r.children.setdefault(i, {})
            for o, child in kids.items():
                target = rkids.get(o)
                if target is None:
                    rkids[o] = child
                elif target is not child:
                    stack.append((target, child))


def _order_key(node):
    return (len(node.trace), node.trace)


def ioalergia_learn(data, eps: Optional[float] = None, inputs=None) -> Mdp:
    """Learn an MDP from traces, a sample store or a prebuilt :class:`Fpta`.

    ``eps`` defaults to ``10000 / N`` for ``N`` observed outputs.  Inputs that
    were never observed in a state become probability-1 self-loops, listed in
    the model's ``metadata["padded"]``.
    """
    fpta = data if isinstance(data, Fpta) else build_fpta(data)
    if fpta.root is None:
        raise ValueError("cannot learn from an empty set of traces")
    if eps is None:
        eps = default_eps(fpta.n_outputs)
    if not eps > 0:
        raise ValueError("eps must be positive")
    inputs = list(inputs) if inputs is not None else list(fpta.inputs)
    red = [fpta.root]
    red_ids = {id(fpta.root)}

    def blue_nodes():
        out, seen = [], set()
        for r in red:
            for i in inputs:
                for child in r.children.get(i, {}).values():
                    if id(child) not in red_ids and id(child) not in seen:
                        seen.add(id(child))
                        out.append(child)
        out.sort(key=_order_key)
        return out

    blues = blue_nodes()
    while blues:
        b = blues[0]
        for r in red:
            if _compatible(r, b, eps, inputs):
                # redirect the edge into b, then fold b's subtree into r
                parent = _find_parent(red, b)
                pr, pi, po = parent
                pr.children[pi][po] = r
                _fold(r, b)
                break
        else:
            red.append(b)
            red_ids.add(id(b))
        blues = blue_nodes()

    index = {id(r): k for k, r in enumerate(red)}
    rows, padded = [], []
    outputs = set()
    for k, r in enumerate(red):
        outputs.add(r.label)
        row = {}
        for i in inputs:
            f = r.row(i)
            total = sum(f.values())
            if total == 0:
                row[i] = {k: 1.0}
                padded.append([k, i])
                continue
            dist = {}
            for o in sorted(f):
                if f[o] > 0:
                    t = index[id(r.children[i][o])]
                    dist[t] = dist.get(t, 0.0) + f[o] / total
                    outputs.add(o)
            row[i] = dist
        rows.append(row)
    meta = {"padded": padded} if padded else {}
    return check_mdp(Mdp(inputs, sorted(outputs), [r.label for r in red], rows, 0, None, meta))


def _find_parent(red, node):
    for r in red:
        for i, kids in r.children.items():
            for o, child in kids.items():
                if child is node:
                    return r, i, o
    raise AssertionError("blue node without a red parent")


# -- exact-frequency input ----------------------------------------------------------------


def exact_frequency_fpta(mdp: Mdp, scale: int = 1_000_000) -> Fpta:
    """A frequency tree whose rows are the true output probabilities times ``scale``.

    It contains the minimal model's shortest access traces, their one-step
    extensions, and below each of these the paths of a characterising set of
    continuations, which is enough for merging to recover the minimal model.
    """
    m = minimize(mdp)
    inputs = list(m.inputs)
    # shortest access traces in the order used for red-blue merging
    access = {m.initial: (m.labels[m.initial],)}
    frontier = [(m.labels[m.initial],)]
    while frontier:
        nxt = []
        for t in sorted(frontier):
            q = m.run_trace(t)
            for i in inputs:
                for o in sorted(m.output_distribution(q, i)):
                    u = m.successor(q, i, o)
                    if u not in access:
                        access[u] = t + (i, o)
                        nxt.append(t + (i, o))
        frontier = sorted(nxt)
    # characterising continuations
    W = set()
    for p in m.states:
        for q in m.states:
            if p < q and m.labels[p] == m.labels[q]:
                cex = equivalence_check(m, m, start=(p, q))
                if cex:
                    W.add(tuple(cex[1:]))
    roots = sorted(set(access.values()))
    nodes = set()
    for a in roots:
        nodes.update(_prefixes(a))
        q = m.run_trace(a)
        for i in inputs:
            for o in m.output_distribution(q, i):
                nodes.add(a + (i, o))
    for x in list(nodes):
        q = m.run_trace(x)
        for w in W:
            t, s = x, q
            for k in range(0, len(w) - 1, 2):
                s = m.successor(s, w[k], w[k + 1])
                if s is None:
                    break
                t = t + (w[k], w[k + 1])
                nodes.add(t)
    fpta = Fpta(m.labels[m.initial])
    fpta.inputs = list(inputs)
    made = {fpta.root.trace: fpta.root}
    for t in sorted(nodes, key=lambda t: (len(t), t)):
        if t not in made:
            parent = made[t[:-2]]
            node = FptaNode(t)
            parent.children.setdefault(t[-2], {})[t[-1]] = node
            made[t] = node
            fpta.n_nodes += 1
    for t, node in made.items():
        q = m.run_trace(t)
        node.count = scale
        for i in inputs:
            node.freq[i] = {o: int(round(p * scale)) for o, p in m.output_distribution(q, i).items() if p > 0}
            fpta.n_outputs += sum(node.freq[i].values())
    return fpta


def _prefixes(trace):
    return [trace[: k + 1] for k in range(0, len(trace), 2)]
