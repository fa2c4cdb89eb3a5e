"""Learning with an exact teacher.

The teacher answers *output distribution queries* (the exact distribution of
the next output after a test sequence) and *equivalence queries* (a
counterexample test sequence or ``None``).  The learner maintains an
observation table whose rows are traces and whose columns are continuation
sequences, and derives a hypothesis MDP from it once the table is closed and
consistent.
"""

from __future__ import annotations

from typing import Optional

from .mdp import Mdp, dist_equal, equivalence_check, check_mdp
from .validation import check_test_sequence, trace_prefixes


class ExactTeacher:
    """Teacher backed by a known MDP."""

    def __init__(self, mdp: Mdp):
        self.mdp = mdp
        self.n_odq = 0
        self.n_eq = 0

    @property
    def inputs(self):
        return self.mdp.inputs

    @property
    def outputs(self):
        return self.mdp.outputs

    def odq(self, seq):
        """Exact output distribution after ``seq`` (None when undefined)."""
        self.n_odq += 1
        return self.mdp.semantics(seq)

    def eq(self, hypothesis: Mdp):
        """Counterexample observable on the system, or None if the hypothesis is equivalent."""
        self.n_eq += 1
        return equivalence_check(self.mdp, hypothesis)


class ExactObservationTable:
    """Observation table with exact output distributions in its cells.

    ``S`` and ``E`` are kept as insertion-ordered lists; the cells are
    fetched from the teacher on first access and cached, so the table is
    always filled.
    """

    def __init__(self, teacher, outputs=None):
        self.teacher = teacher
        self.inputs = tuple(teacher.inputs)
        self._out_order = {o: k for k, o in enumerate(outputs or getattr(teacher, "outputs", ()))}
        self._cells = {}
        init = self.query(())
        if not init:
            raise ValueError("the initial output distribution is empty")
        o0 = self._ordered(init)[0]
        if abs(init[o0] - 1.0) > 1e-9:
            raise ValueError(f"initial output is not deterministic: {init}")
        self.S = [(o0,)]
        self._S_set = {(o0,)}
        self.E = [(i,) for i in self.inputs]

    def _ordered(self, dist):
        return sorted(dist, key=lambda o: (self._out_order.get(o, len(self._out_order)), o))

    def query(self, seq):
        seq = tuple(seq)
        if seq not in self._cells:
            self._cells[seq] = self.teacher.odq(seq)
        return self._cells[seq]

    def cell(self, s, e):
        return self.query(tuple(s) + tuple(e))

    def row(self, s) -> tuple:
        return tuple(self.cell(s, e) for e in self.E)

    def long_rows(self) -> list:
        """``Lt(S)``: observable one-step extensions of ``S`` not already in ``S``."""
        out = []
        for s in self.S:
            for i in self.inputs:
                dist = self.cell(s, (i,)) or {}
                for o in self._ordered(dist):
                    if dist[o] > 0:
                        ext = s + (i, o)
                        if ext not in self._S_set:
                            out.append(ext)
        return out

    def eq_row(self, s1, s2) -> bool:
        if s1[-1] != s2[-1]:
            return False
        return all(dist_equal(self.cell(s1, e), self.cell(s2, e)) for e in self.E)

    def add_row(self, s) -> bool:
        s = tuple(s)
        if s in self._S_set:
            return False
        self.S.append(s)
        self._S_set.add(s)
        return True

    def add_column(self, e) -> bool:
        e = tuple(e)
        if e in self.E:
            return False
        # keep E suffix-closed
        for k in range(len(e) - 1, -1, -2):
            suffix = e[k:]
            if suffix not in self.E:
                self.E.append(suffix)
        return True

    # -- closedness and consistency -------------------------------------------------------

    def closedness_witness(self):
        for l in self.long_rows():
            if not any(self.eq_row(l, s) for s in self.S):
                return l
        return None

    def consistency_witness(self):
        """First ``(i, o, e)`` such that some equal rows disagree on ``i o e`` after extension."""
        for a in range(len(self.S)):
            s1 = self.S[a]
            for b in range(a + 1, len(self.S)):
                s2 = self.S[b]
                if not self.eq_row(s1, s2):
                    continue
                for i in self.inputs:
                    d1 = self.cell(s1, (i,)) or {}
                    for o in self._ordered(d1):
                        if d1[o] <= 0:
                            continue
                        # equal rows share the i-column, so s2 i o is observable as well
                        x1, x2 = s1 + (i, o), s2 + (i, o)
                        if x1[-1] != x2[-1]:
                            continue
                        for e in self.E:
                            if not dist_equal(self.cell(x1, e), self.cell(x2, e)):
                                return (i, o) + e
        return None

    def is_closed(self) -> bool:
        return self.closedness_witness() is None

    def is_consistent(self) -> bool:
        return self.consistency_witness() is None

    def make_closed_and_consistent(self) -> Optional[str]:
        """Apply at most one repair; returns ``"row"``, ``"column"`` or None when nothing was needed."""
        l = self.closedness_witness()
        if l is not None:
            self.add_row(l)
            return "row"
        col = self.consistency_witness()
        if col is not None:
            self.add_column(col)
            return "column"
        return None

    # -- hypothesis -----------------------------------------------------------------------

    def hypothesis(self) -> Mdp:
        if not self.is_closed() or not self.is_consistent():
            raise ValueError("observation table must be closed and consistent")
        reps = []
        state_of = {}
        for s in self.S:
            for k, r in enumerate(reps):
                if self.eq_row(s, r):
                    state_of[s] = k
                    break
            else:
                state_of[s] = len(reps)
                reps.append(s)

        def find(trace):
            if trace in state_of:
                return state_of[trace]
            for k, r in enumerate(reps):
                if self.eq_row(trace, r):
                    state_of[trace] = k
                    return k
            raise AssertionError("closed table has a long row without a matching short row")

        outputs = list(self._out_order)
        rows = []
        for r in reps:
            row = {}
            for i in self.inputs:
                dist = self.cell(r, (i,)) or {}
                acc = {}
                for o in self._ordered(dist):
                    if dist[o] > 0:
                        t = find(r + (i, o))
                        acc[t] = acc.get(t, 0.0) + dist[o]
                        if o not in outputs:
                            outputs.append(o)
                row[i] = acc
            rows.append(row)
        labels = [r[-1] for r in reps]
        for lab in labels:
            if lab not in outputs:
                outputs.append(lab)
        return check_mdp(Mdp(self.inputs, outputs, labels, rows, state_of[self.S[0]]))

    def sizes(self) -> dict:
        return {"S": len(self.S), "Lt": len(self.long_rows()), "E": len(self.E)}


def counterexample_rows(cex) -> list:
    """Trace prefixes ``t`` of every prefix ``t i`` of a counterexample test sequence."""
    cex = check_test_sequence(cex)
    return trace_prefixes(cex[:-1]) if cex else []


def learn_exact(teacher, max_rounds: int = 10_000, outputs=None):
    """Run the exact learner against ``teacher``.

    Returns ``(hypothesis, table, log)`` where ``log`` is a list of per-round
    dictionaries (table sizes, hypothesis size and counterexample).
    """
    table = ExactObservationTable(teacher, outputs=outputs)
    log = []
    for rnd in range(1, max_rounds + 1):
        repairs = 0
        while table.make_closed_and_consistent() is not None:
            repairs += 1
        hyp = table.hypothesis()
        cex = teacher.eq(hyp)
        entry = {"round": rnd, **table.sizes(), "hypothesis_states": hyp.n_states, "repairs": repairs}
        entry["counterexample"] = None if cex is None else list(cex)
        log.append(entry)
        if cex is None:
            return hyp, table, log
        for t in counterexample_rows(cex):
            table.add_row(t)
    raise RuntimeError(f"exact learning did not converge within {max_rounds} rounds")
