"""Deterministic labelled Markov decision processes.

An :class:`Mdp` has dense integer states ``0..n-1``, an input alphabet, an
output alphabet, a label (output) per state and, for every state and input, a
distribution over successor states.  It is *deterministic* when no two
successors of the same state/input pair share a label, so that a trace
identifies at most one state.

Output distributions are plain ``dict`` objects mapping outputs to
probabilities; ``None`` stands for undefined behaviour (a test sequence whose
trace prefix cannot be observed).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Mapping, Optional

from .validation import check_test_sequence, check_trace

TOL = 1e-9
CHAOS = "chaos"

OutputDistribution = Optional[Dict[str, float]]


class InvalidMdpError(ValueError):
    """Raised when a model violates the MDP invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True, eq=False)
class Mdp:
    """A labelled MDP with integer states.

    ``transitions[q][i]`` maps successor states to probabilities.  Only
    positive entries need to be present.  Instances are treated as immutable.
    """

    inputs: tuple
    outputs: tuple
    labels: tuple
    transitions: tuple
    initial: int = 0
    state_names: Optional[tuple] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(
            self,
            "transitions",
            tuple({i: dict(d) for i, d in row.items()} for row in self.transitions),
        )
        if self.state_names is None:
            object.__setattr__(self, "state_names", tuple(f"q{k}" for k in range(len(self.labels))))
        else:
            object.__setattr__(self, "state_names", tuple(self.state_names))
        if len(self.transitions) != len(self.labels) or len(self.state_names) != len(self.labels):
            raise ValueError("labels, transitions and state_names must have one entry per state")

    @classmethod
    def from_named(cls, inputs, outputs, initial, labels: Mapping, transitions: Mapping, metadata=None):
        """Build from string state names.

        ``labels`` maps state name to output, ``transitions`` maps
        ``(state, input)`` to ``{successor: probability}``.
        """
        names = list(labels)
        index = {n: k for k, n in enumerate(names)}
        rows = [dict() for _ in names]
        for (src, inp), dist in transitions.items():
            rows[index[src]][inp] = {index[t]: float(p) for t, p in dist.items()}
        return cls(inputs, outputs, [labels[n] for n in names], rows, index[initial], names, dict(metadata or {}))

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def states(self) -> range:
        return range(len(self.labels))

    @cached_property
    def _successors(self):
        table = []
        for row in self.transitions:
            by_input = {}
            for i, dist in row.items():
                by_output = {}
                for q, p in dist.items():
                    if p > 0:
                        by_output.setdefault(self.labels[q], q)
                by_input[i] = by_output
            table.append(by_input)
        return table

    @cached_property
    def _output_dists(self):
        table = []
        for row in self.transitions:
            by_input = {}
            for i, dist in row.items():
                out = {}
                for q, p in dist.items():
                    if p > 0:
                        lab = self.labels[q]
                        out[lab] = out.get(lab, 0.0) + p
                by_input[i] = out
            table.append(by_input)
        return table

    def successor(self, q: int, i, o) -> Optional[int]:
        """The unique successor of ``q`` under ``i`` labelled ``o``, or None."""
        return self._successors[q].get(i, {}).get(o)

    def output_distribution(self, q: int, i) -> Dict[str, float]:
        return self._output_dists[q].get(i, {})

    def run_trace(self, trace) -> Optional[int]:
        """State reached by an observable trace, None if the trace is not observable."""
        if not trace or trace[0] != self.labels[self.initial]:
            return None
        q = self.initial
        succ = self._successors
        for k in range(1, len(trace), 2):
            q = succ[q].get(trace[k], {}).get(trace[k + 1])
            if q is None:
                return None
        return q

    def semantics(self, seq) -> OutputDistribution:
        """Output distribution after a test sequence (None when undefined)."""
        if len(seq) == 0:
            return {self.labels[self.initial]: 1.0}
        q = self.run_trace(seq[:-1])
        if q is None:
            return None
        return dict(self._output_dists[q].get(seq[-1], {}))

    def reachable(self, start: Optional[int] = None) -> list:
        """States reachable from ``start`` (default: initial) in BFS order."""
        start = self.initial if start is None else start
        seen = {start}
        order = [start]
        queue = deque([start])
        while queue:
            q = queue.popleft()
            for i in self.inputs:
                for t, p in self.transitions[q].get(i, {}).items():
                    if p > 0 and t not in seen:
                        seen.add(t)
                        order.append(t)
                        queue.append(t)
        return order

    def access_traces(self) -> dict:
        """Shortest, lexicographically least (declaration order) access trace per reachable state."""
        out_rank = {o: k for k, o in enumerate(self.outputs)}
        access = {self.initial: (self.labels[self.initial],)}
        queue = deque([self.initial])
        while queue:
            q = queue.popleft()
            for i in self.inputs:
                succ = self._successors[q].get(i, {})
                for o in sorted(succ, key=lambda o: out_rank.get(o, len(out_rank))):
                    t = succ[o]
                    if t not in access:
                        access[t] = access[q] + (i, o)
                        queue.append(t)
        return access

    def __repr__(self):
        return f"Mdp(n_states={self.n_states}, inputs={list(self.inputs)}, outputs={list(self.outputs)})"


# -- module-level forms of the core semantics ---------------------------------------------


def successor(m: Mdp, q: int, i, o) -> Optional[int]:
    return m.successor(q, i, o)


def run_trace(m: Mdp, trace) -> Optional[int]:
    trace = check_trace(trace)
    return m.run_trace(trace)


def semantics(m: Mdp, seq) -> OutputDistribution:
    seq = check_test_sequence(seq)
    return m.semantics(seq)


def dist_equal(d1: OutputDistribution, d2: OutputDistribution, tol: float = TOL) -> bool:
    """Equality of output distributions (or of undefined behaviour) up to ``tol``."""
    if d1 is None or d2 is None:
        return d1 is None and d2 is None
    for o in set(d1) | set(d2):
        if abs(d1.get(o, 0.0) - d2.get(o, 0.0)) > tol:
            return False
    return True


# -- schedulers and path probabilities ----------------------------------------------------


class MemorylessScheduler:
    """Deterministic scheduler choosing an input from the last state only."""

    def __init__(self, choice: Mapping[int, str]):
        self.choice = dict(choice)

    def __call__(self, path) -> Dict[str, float]:
        return {self.choice[path[-1]]: 1.0}

    def __getitem__(self, q):
        return self.choice[q]

    def __eq__(self, other):
        return isinstance(other, MemorylessScheduler) and self.choice == other.choice

    def __repr__(self):
        return f"MemorylessScheduler({self.choice})"


class RandomizedScheduler:
    """Scheduler given by an arbitrary function from path prefixes to input distributions."""

    def __init__(self, fn: Callable[[tuple], Mapping[str, float]]):
        self.fn = fn

    def __call__(self, path) -> Dict[str, float]:
        return dict(self.fn(tuple(path)))

    @classmethod
    def uniform(cls, inputs):
        inputs = tuple(inputs)
        return cls(lambda path: {i: 1.0 / len(inputs) for i in inputs})


def path_probability(m: Mdp, scheduler, length_dist, path) -> float:
    """Probability of a finite path ``q0 i1 q1 ... in qn`` under a scheduler.

    ``length_dist`` gives the probability of a path having ``n`` inputs; it may
    be a callable or a mapping.  The path alternates integer states and inputs
    and has to start in the initial state.
    """
    path = tuple(path)
    if len(path) % 2 != 1:
        raise ValueError("path must alternate states and inputs, starting and ending with a state")
    if path[0] != m.initial:
        raise ValueError(f"path must start in the initial state {m.initial}, got {path[0]!r}")
    n = len(path) // 2
    p_len = length_dist(n) if callable(length_dist) else length_dist.get(n, 0.0)
    prob = float(p_len)
    for j in range(1, n + 1):
        if prob == 0.0:
            break
        prefix = path[: 2 * j - 1]
        i, q_prev, q_next = path[2 * j - 1], path[2 * j - 2], path[2 * j]
        prob *= scheduler(prefix).get(i, 0.0) * m.transitions[q_prev].get(i, {}).get(q_next, 0.0)
    return prob


# -- properties ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertySpec:
    """Bounded (or unbounded) until property ``!avoid U<=bound goal``."""

    goal: str
    avoid: frozenset = frozenset()
    bound: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "avoid", frozenset(self.avoid))
        if self.goal in self.avoid:
            raise ValueError(f"goal label {self.goal!r} must not be avoided")
        if self.bound is not None and self.bound < 0:
            raise ValueError("step bound must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "PropertySpec":
        """Parse ``"F<=11 goal"``, ``"!G U<=14 goal"``, ``"F goal"`` or ``"!G U goal"``."""
        parts = text.split()
        avoid = set()
        if parts and parts[0].startswith("!"):
            while parts and parts[0].startswith("!"):
                avoid.update(a for a in parts.pop(0)[1:].split(",") if a)
            op = "U"
            if not parts or not parts[0].startswith("U"):
                raise ValueError(f"cannot parse property {text!r}: expected 'U' after avoided labels")
        else:
            op = "F"
            if not parts or not parts[0].startswith("F"):
                raise ValueError(f"cannot parse property {text!r}: expected 'F' or '!label U'")
        head = parts.pop(0)
        rest = head[1:]
        bound = None
        if rest:
            if not rest.startswith("<="):
                raise ValueError(f"cannot parse property {text!r}: bad bound {rest!r}")
            try:
                bound = int(rest[2:])
            except ValueError:
                raise ValueError(f"cannot parse property {text!r}: bad bound {rest!r}") from None
        if len(parts) != 1:
            raise ValueError(f"cannot parse property {text!r}: expected exactly one goal label")
        del op
        return cls(parts[0], frozenset(avoid), bound)

    def __str__(self):
        b = "" if self.bound is None else f"<={self.bound}"
        if self.avoid:
            return f"!{','.join(sorted(self.avoid))} U{b} {self.goal}"
        return f"F{b} {self.goal}"


# -- validation ---------------------------------------------------------------------------


def validate(m: Mdp, tol: float = TOL) -> list:
    """Every violated MDP invariant, as a list of :class:`Violation` (empty when valid)."""
    out = []
    n = m.n_states
    if n == 0:
        return [Violation("states", "model has no states")]
    if not (0 <= m.initial < n):
        out.append(Violation("initial", f"initial state {m.initial} does not exist"))
    if len(set(m.inputs)) != len(m.inputs):
        out.append(Violation("alphabet", "duplicate inputs"))
    if len(set(m.outputs)) != len(m.outputs):
        out.append(Violation("alphabet", "duplicate outputs"))
    outputs = set(m.outputs)
    for q in m.states:
        name = m.state_names[q]
        if m.labels[q] not in outputs:
            out.append(Violation("label", f"state {name} has label {m.labels[q]!r} outside the output alphabet"))
        row = m.transitions[q]
        for i in row:
            if i not in m.inputs:
                out.append(Violation("alphabet", f"state {name} has a transition on unknown input {i!r}"))
        for i in m.inputs:
            if i not in row:
                out.append(Violation("input-enabledness", f"state {name} has no transition for input {i!r}"))
                continue
            dist = row[i]
            total = 0.0
            seen = {}
            for t, p in dist.items():
                if not (isinstance(t, int) and 0 <= t < n):
                    out.append(Violation("unknown state", f"{name} --{i}--> {t!r} targets a missing state"))
                    continue
                if not (0.0 <= p <= 1.0):
                    out.append(Violation("probability range", f"{name} --{i}--> {m.state_names[t]} has probability {p}"))
                total += p
                if p > 0:
                    lab = m.labels[t]
                    if lab in seen and seen[lab] != t:
                        out.append(
                            Violation(
                                "determinism",
                                f"{name} --{i}--> {m.state_names[seen[lab]]} and {m.state_names[t]} share label {lab!r}",
                            )
                        )
                    seen.setdefault(lab, t)
            if abs(total - 1.0) > tol:
                out.append(Violation("distribution sum", f"{name} --{i}--> sums to {total!r}"))
    return out


def check_mdp(m: Mdp) -> Mdp:
    violations = validate(m)
    if violations:
        raise InvalidMdpError(violations)
    return m


# -- minimisation, equivalence and isomorphism --------------------------------------------


def _signature(m, q, block_of):
    sig = []
    for i in m.inputs:
        acc = {}
        for t, p in m.transitions[q].get(i, {}).items():
            if p > 0:
                b = block_of[t]
                acc[b] = acc.get(b, 0.0) + p
        sig.append(acc)
    return sig


def _sig_equal(s1, s2, tol):
    for a, b in zip(s1, s2):
        if a.keys() != b.keys():
            return False
        for k, p in a.items():
            if abs(p - b[k]) > tol:
                return False
    return True


def minimize(m: Mdp, tol: float = TOL) -> Mdp:
    """Quotient of the reachable part of ``m`` by output-distribution equivalence.

    Partition refinement starting from the label partition.  The block of the
    initial state becomes state 0; the other blocks are numbered by their
    shortest access traces.
    """
    reach = m.reachable()
    blocks = {}
    for q in reach:
        blocks.setdefault(m.labels[q], []).append(q)
    partition = list(blocks.values())
    while True:
        block_of = {q: b for b, qs in enumerate(partition) for q in qs}
        refined = []
        for qs in partition:
            groups = []
            for q in qs:
                sig = _signature(m, q, block_of)
                for g in groups:
                    if _sig_equal(g[0], sig, tol):
                        g[1].append(q)
                        break
                else:
                    groups.append((sig, [q]))
            refined.extend(g[1] for g in groups)
        if len(refined) == len(partition):
            break
        partition = refined
    block_of = {q: b for b, qs in enumerate(partition) for q in qs}

    # canonical numbering via the access traces of the original model
    access = m.access_traces()
    first = {}
    for q in reach:
        b = block_of[q]
        key = (len(access[q]), _trace_key(m, access[q]))
        if b not in first or key < first[b][0]:
            first[b] = (key, q)
    order = sorted(first, key=lambda b: first[b][0])
    new_id = {b: k for k, b in enumerate(order)}
    labels, rows, names = [], [], []
    for b in order:
        leader = first[b][1]
        labels.append(m.labels[leader])
        names.append(f"q{new_id[b]}")
        row = {}
        for i in m.inputs:
            acc = {}
            for t, p in m.transitions[leader].get(i, {}).items():
                if p > 0:
                    nb = new_id[block_of[t]]
                    acc[nb] = acc.get(nb, 0.0) + p
            row[i] = acc
        rows.append(row)
    return Mdp(m.inputs, m.outputs, labels, rows, new_id[block_of[m.initial]], names, dict(m.metadata))


def _trace_key(m, trace):
    in_rank = {i: k for k, i in enumerate(m.inputs)}
    out_rank = {o: k for k, o in enumerate(m.outputs)}
    return tuple(
        (out_rank.get(s, len(out_rank)) if k % 2 == 0 else in_rank.get(s, len(in_rank))) for k, s in enumerate(trace)
    )


def equivalence_check(m1: Mdp, m2: Mdp, tol: float = TOL, start=None):
    """Search for a test sequence on which ``m1`` and ``m2`` differ.

    Returns ``None`` when the models are output-distribution equivalent, and
    otherwise the shortest (then least, in declaration order) counterexample.
    Counterexamples are observable on ``m1``: when ``m2`` is a hypothesis and
    ``m1`` the system, the result is a valid answer to an equivalence query.
    ``start`` optionally overrides the pair of initial states.
    """
    if set(m1.inputs) != set(m2.inputs):
        raise ValueError(f"input alphabets differ: {sorted(m1.inputs)} vs {sorted(m2.inputs)}")
    q1, q2 = (m1.initial, m2.initial) if start is None else start
    if m1.labels[q1] != m2.labels[q2]:
        return ()
    out_rank = {o: k for k, o in enumerate(m1.outputs)}
    seen = {(q1, q2)}
    queue = deque([((q1, q2), (m1.labels[q1],))])
    while queue:
        (a, b), trace = queue.popleft()
        for i in m1.inputs:
            d1 = m1.output_distribution(a, i)
            d2 = m2.output_distribution(b, i)
            if not dist_equal(d1, d2, tol):
                return trace + (i,)
            for o in sorted(d1, key=lambda o: out_rank.get(o, len(out_rank))):
                pair = (m1.successor(a, i, o), m2.successor(b, i, o))
                if pair[1] is None:
                    # probability below tol on m2's side; the next level cannot be compared
                    continue
                if pair not in seen:
                    seen.add(pair)
                    queue.append((pair, trace + (i, o)))
    return None


def are_equivalent(m1: Mdp, m2: Mdp, tol: float = TOL) -> bool:
    return equivalence_check(m1, m2, tol) is None


def isomorphic(m1: Mdp, m2: Mdp, tol: float = TOL) -> bool:
    """Whether the reachable parts of two models are isomorphic (labels and probabilities)."""
    if set(m1.inputs) != set(m2.inputs):
        return False
    r1, r2 = m1.reachable(), m2.reachable()
    if len(r1) != len(r2):
        return False
    phi = {m1.initial: m2.initial}
    used = {m2.initial}
    queue = deque([m1.initial])
    if m1.labels[m1.initial] != m2.labels[m2.initial]:
        return False
    while queue:
        a = queue.popleft()
        b = phi[a]
        for i in m1.inputs:
            d1 = {t: p for t, p in m1.transitions[a].get(i, {}).items() if p > tol}
            d2 = {t: p for t, p in m2.transitions[b].get(i, {}).items() if p > tol}
            if len(d1) != len(d2):
                return False
            for t, p in d1.items():
                u = m2.successor(b, i, m1.labels[t])
                if u is None or abs(d2.get(u, 0.0) - p) > tol:
                    return False
                if t in phi:
                    if phi[t] != u:
                        return False
                else:
                    if u in used:
                        return False
                    phi[t] = u
                    used.add(u)
                    queue.append(t)
    return True


def support_graph(m: Mdp) -> Mdp:
    """Copy of ``m`` with every positive transition probability replaced by its support indicator.

    Each distribution is made uniform over its support, so that two models
    have equivalent support graphs exactly when they agree on structure.
    """
    rows = []
    for row in m.transitions:
        new = {}
        for i, dist in row.items():
            supp = [t for t, p in dist.items() if p > 0]
            new[i] = {t: 1.0 / len(supp) for t in supp}
        rows.append(new)
    return Mdp(m.inputs, m.outputs, m.labels, rows, m.initial, m.state_names, dict(m.metadata))
