"""The sampling-based teacher.

The teacher owns a :class:`SampleStore` of traces observed on a
:class:`~lstar_mdp.sul.Sul` and answers

* frequency queries ``fq(s)``: how often each output followed test sequence ``s``;
* completeness queries ``cq(s)``: whether ``s`` has been sampled often enough;
* refine queries ``rfq(seqs)``: directed resampling of rarely observed sequences;
* equivalence queries ``eq(h)``: testing for a counterexample to a hypothesis.

:class:`ExactFrequencyTeacher` implements the same interface with
frequencies proportional to the true probabilities, for checking that the
sampling learner reduces to the exact one in the limit.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .mdp import Mdp, MemorylessScheduler, equivalence_check
from .stats import hoeffding_diff
from .sul import Sul, sample_trace
from .validation import check_probability, check_trace

from .mdp import CHAOS


class _Node:
    __slots__ = ("count", "children")

    def __init__(self):
        self.count = 0
        self.children: Dict[str, Dict[str, "_Node"]] = {}


class SampleStore:
    """Multiset of traces stored as a counting trie.

    Adding a trace increments the counts of all its trace prefixes, so
    ``count(t)`` is the number of stored traces having ``t`` as a prefix.
    """

    def __init__(self):
        self._roots: Dict[str, _Node] = {}
        self.n_traces = 0
        self.n_outputs = 0

    def add_trace(self, trace, count: int = 1) -> None:
        trace = check_trace(trace)
        if count < 1:
            raise ValueError("count must be positive")
        node = self._roots.get(trace[0])
        if node is None:
            node = self._roots[trace[0]] = _Node()
        node.count += count
        for k in range(1, len(trace), 2):
            by_out = node.children.get(trace[k])
            if by_out is None:
                by_out = node.children[trace[k]] = {}
            nxt = by_out.get(trace[k + 1])
            if nxt is None:
                nxt = by_out[trace[k + 1]] = _Node()
            nxt.count += count
            node = nxt
        self.n_traces += count
        self.n_outputs += count * ((len(trace) + 1) // 2)

    def _node(self, trace) -> Optional[_Node]:
        if not trace:
            return None
        node = self._roots.get(trace[0])
        for k in range(1, len(trace), 2):
            if node is None:
                return None
            node = node.children.get(trace[k], {}).get(trace[k + 1])
        return node

    def count(self, trace) -> int:
        node = self._node(tuple(trace))
        return 0 if node is None else node.count

    def fq(self, seq) -> Dict[str, int]:
        """Output frequencies observed after test sequence ``seq`` (zero entries omitted)."""
        seq = tuple(seq)
        if not seq:
            return {o: n.count for o, n in self._roots.items() if n.count > 0}
        node = self._node(seq[:-1])
        if node is None:
            return {}
        return {o: n.count for o, n in node.children.get(seq[-1], {}).items() if n.count > 0}

    def cq(self, seq, n_c: int) -> bool:
        """Whether ``seq`` is complete.

        A test sequence is complete if at least ``n_c`` outputs were observed
        after it, or if it extends a complete sequence by an output that was
        never observed there (so it can never be sampled).
        """
        seq = tuple(seq)
        # level 0: the empty test sequence, observed once per stored trace
        total = self.n_traces
        if not seq:
            return total >= n_c
        node = self._roots.get(seq[0])
        if total >= n_c and node is None:
            return True
        for k in range(1, len(seq), 2):
            by_out = node.children.get(seq[k], {}) if node is not None else {}
            total = sum(n.count for n in by_out.values())
            if k == len(seq) - 1:
                return total >= n_c
            node = by_out.get(seq[k + 1])
            if total >= n_c and node is None:
                return True
        raise AssertionError("unreachable")

    def traces(self):
        """``(trace, multiplicity)`` pairs reproducing the stored multiset, depth-first."""
        out = []
        for o, root in self._roots.items():
            stack = [((o,), root)]
            while stack:
                trace, node = stack.pop()
                ended = node.count - sum(c.count for by in node.children.values() for c in by.values())
                if ended > 0:
                    out.append((trace, ended))
                kids = [(trace + (i, oo), c) for i, by in node.children.items() for oo, c in by.items()]
                stack.extend(reversed(kids))
        return out

    def iter_nodes(self, min_count: int = 0):
        """Breadth-first ``(trace, node)`` pairs; subtrees below ``min_count`` are skipped."""
        queue = deque(((o,), n) for o, n in self._roots.items() if n.count >= min_count)
        while queue:
            trace, node = queue.popleft()
            yield trace, node
            for i, by in node.children.items():
                for o, c in by.items():
                    if c.count >= min_count:
                        queue.append((trace + (i, o), c))

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"trace": list(t), "count": c}) + "\n" for t, c in self.traces())

    @classmethod
    def from_jsonl(cls, text: str) -> "SampleStore":
        store = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                store.add_trace(tuple(rec["trace"]), int(rec.get("count", 1)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"line {lineno}: invalid trace record: {exc}") from None
        return store


# -- schedulers ---------------------------------------------------------------------------


def reachability_values(h: Mdp, tol: float = 1e-6, max_iter: int = 100_000) -> np.ndarray:
    """``V[q, t]``: maximal probability of eventually reaching ``t`` from ``q``."""
    n = h.n_states
    P = np.zeros((len(h.inputs), n, n))
    for q in h.states:
        for k, i in enumerate(h.inputs):
            for t, p in h.transitions[q].get(i, {}).items():
                P[k, q, t] += p
    V = np.eye(n)
    for _ in range(max_iter):
        new = np.max(P @ V, axis=0)
        np.fill_diagonal(new, 1.0)
        delta = np.max(np.abs(new - V)) if n else 0.0
        V = new
        if delta < tol:
            break
    return V, P


def compute_schedulers(h: Mdp, tol: float = 1e-6) -> dict:
    """One memoryless scheduler per target state, maximising the probability of reaching it.

    Values come from value iteration stopped when no value changes by more
    than ``tol``; among inputs of (numerically) equal value the earliest
    declared input is chosen.
    """
    V, P = reachability_values(h, tol)
    Q = P @ V  # Q[i, q, t]
    best = Q.max(axis=0)
    out = {}
    for t in h.states:
        choice = {}
        for q in h.states:
            k = int(np.argmax(Q[:, q, t] >= best[q, t] - 1e-12))
            choice[q] = h.inputs[k]
        out[t] = MemorylessScheduler(choice)
    return out


# -- teacher ------------------------------------------------------------------------------


@dataclass
class TeacherConfig:
    n_c: int = 20
    n_resample: int = 300
    n_test: int = 50
    n_retest: int = 300
    p_stop: float = 0.25
    p_rand: float = 0.25

    def validate(self) -> "TeacherConfig":
        if int(self.n_c) < 1:
            raise ValueError("n_c must be at least 1")
        for name in ("n_resample", "n_test", "n_retest"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be non-negative")
        check_probability(self.p_stop, "p_stop")
        check_probability(self.p_rand, "p_rand")
        return self


def chaos_state(h: Mdp) -> Optional[int]:
    for q in h.states:
        if h.labels[q] == CHAOS:
            return q
    return None


class SamplingTeacher:
    """Teacher that answers queries from traces sampled on a SUL."""

    def __init__(self, sul: Sul, config: Optional[TeacherConfig] = None, alpha: float = 0.05, store=None):
        self.sul = sul
        self.config = (config or TeacherConfig()).validate()
        self.alpha = alpha
        self.store = store if store is not None else SampleStore()

    @property
    def inputs(self):
        return self.sul.inputs

    @property
    def n_c(self) -> int:
        return self.config.n_c

    def initial_output(self) -> str:
        """The initial output, from the sample if possible, else from one reset."""
        init = self.store.fq(())
        if init:
            return max(sorted(init), key=init.__getitem__)
        o = self.sul.reset()
        self.store.add_trace((o,))
        return o

    def fq(self, seq) -> Dict[str, int]:
        return self.store.fq(seq)

    def cq(self, seq) -> bool:
        return self.store.cq(seq, self.config.n_c)

    def diff_fq(self, s1, s2, alpha: Optional[float] = None) -> bool:
        if not (self.cq(s1) and self.cq(s2)):
            return False
        return hoeffding_diff(self.fq(s1), self.fq(s2), self.alpha if alpha is None else alpha)

    # -- refine query ---------------------------------------------------------------------

    def rfq(self, incomplete) -> int:
        """Resample rarely observed test sequences; returns the number of traces added."""
        n = int(self.config.n_resample)
        trie: dict = {}
        for seq in incomplete:
            if not seq:
                continue
            node = trie.setdefault(seq[0], {})
            for k in range(1, len(seq), 2):
                by_out = node.setdefault(seq[k], {})
                if k + 1 < len(seq):
                    node = by_out.setdefault(seq[k + 1], {})
        if not trie:
            for _ in range(n):
                self.store.add_trace(sample_trace(self.sul, self.config.p_stop))
            return n
        order = {i: k for k, i in enumerate(self.sul.inputs)}
        for _ in range(n):
            o = self.sul.reset()
            trace = [o]
            node = trie.get(o)
            while node:
                avail = sorted(node, key=order.__getitem__)
                i = self.sul.choice(avail)
                o = self.sul.step(i)
                trace += [i, o]
                node = node[i].get(o)
            self.store.add_trace(tuple(trace))
        return n

    # -- equivalence query ----------------------------------------------------------------

    def eq(self, h: Mdp, representatives: Optional[dict] = None):
        """Search for a counterexample to ``h``; None if none was found.

        ``representatives`` maps hypothesis states to the stored traces they
        were derived from (default: their access traces).
        """
        cq_ = chaos_state(h)
        reach0 = h.reachable()
        if cq_ is not None and cq_ in reach0:
            return None
        cex = self._structure_test(h, cq_)
        if cex is not None:
            return cex
        return self._conformance_test(h, representatives or h.access_traces())

    def _targets(self, h, q, chaos):
        return [t for t in h.reachable(q) if t != chaos and t != q]

    def _structure_test(self, h, chaos):
        cfg = self.config
        schedulers = compute_schedulers(h)
        sul = self.sul
        for _ in range(int(cfg.n_test)):
            trace = [sul.reset()]
            q = h.initial
            cands = self._targets(h, q, chaos)
            target = sul.choice(cands) if cands else None
            while True:
                if target is None or sul.random() < cfg.p_rand:
                    i = sul.choice(h.inputs)
                else:
                    i = schedulers[target][q]
                o = sul.step(i)
                nxt = h.successor(q, i, o)
                if nxt is None:
                    cex = tuple(trace) + (i,)
                    self.store.add_trace(cex + (o,))
                    self._retest(cex)
                    return cex
                trace += [i, o]
                q = nxt
                if sul.random() < cfg.p_stop:
                    break
                cands = self._targets(h, q, chaos)
                if target is None or target == q or target not in cands:
                    target = sul.choice(cands) if cands else None
            self.store.add_trace(tuple(trace))
        return None

    def _retest(self, cex):
        """Execute the inputs of ``cex`` again until it is complete or ``n_retest`` runs were made."""
        for _ in range(int(self.config.n_retest)):
            if self.cq(cex):
                return
            trace = [self.sul.reset()]
            if trace[0] == cex[0]:
                for k in range(1, len(cex), 2):
                    o = self.sul.step(cex[k])
                    trace += [cex[k], o]
                    if k + 1 < len(cex) and o != cex[k + 1]:
                        break
            self.store.add_trace(tuple(trace))

    def _conformance_test(self, h, representatives):
        n_c = self.config.n_c
        # breadth-first over stored traces that are still observable in h
        root_label = h.labels[h.initial]
        root = self.store._roots.get(root_label)
        queue = deque([((root_label,), root, h.initial)]) if root is not None and root.count >= n_c else deque()
        while queue:
            trace, node, q = queue.popleft()
            rep = tuple(representatives.get(q, ()))
            for i, by_out in node.children.items():
                total = sum(c.count for c in by_out.values())
                if total < n_c:
                    continue
                seq = trace + (i,)
                # outputs seen in the samples but impossible in h
                for o, child in by_out.items():
                    nxt = h.successor(q, i, o)
                    if nxt is None and any(
                        sum(g.count for g in by.values()) >= n_c for by in child.children.values()
                    ):
                        return seq
                if rep and rep != trace and self.diff_fq(seq, rep + (i,)):
                    return seq
                for o, child in by_out.items():
                    nxt = h.successor(q, i, o)
                    if nxt is not None and child.count >= n_c:
                        queue.append((seq + (o,), child, nxt))
        return None

    # -- bookkeeping ----------------------------------------------------------------------

    @property
    def n_outputs(self) -> int:
        return self.sul.n_outputs

    @property
    def n_traces(self) -> int:
        return self.sul.n_resets


class ExactFrequencyTeacher:
    """Teacher whose frequencies are the true probabilities scaled by ``scale``.

    Every sequence counts as complete, refine queries do nothing and
    equivalence queries are answered by exact equivalence checking.
    """

    def __init__(self, mdp: Mdp, scale: int = 1_000_000):
        self.mdp = mdp
        self.scale = scale
        self.n_c = 1

    @property
    def inputs(self):
        return self.mdp.inputs

    def initial_output(self) -> str:
        return self.mdp.labels[self.mdp.initial]

    def fq(self, seq):
        dist = self.mdp.semantics(tuple(seq))
        if not dist:
            return {}
        return {o: int(round(p * self.scale)) for o, p in dist.items() if round(p * self.scale) > 0}

    def cq(self, seq) -> bool:
        return True

    def diff_fq(self, s1, s2, alpha: float = 0.05) -> bool:
        return hoeffding_diff(self.fq(s1), self.fq(s2), alpha)

    def rfq(self, incomplete) -> int:
        return 0

    def eq(self, h: Mdp, representatives=None):
        return equivalence_check(self.mdp, h)

    n_outputs = 0
    n_traces = 0
