"""Learning from sampled traces.

The learner keeps an observation table whose cells are output *frequencies*
obtained from a sampling teacher (see :mod:`lstar_mdp.teacher`).  Rows are
grouped into compatibility classes with Hoeffding-bound tests; every class
representative becomes a hypothesis state.  Transitions whose frequencies are
not yet reliable lead to a ``chaos`` sink.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .mdp import Mdp, check_mdp, equivalence_check
from .stats import hoeffding_diff
from .mdp import CHAOS
from .validation import check_probability, trace_prefixes


@dataclass
class LearnerConfig:
    alpha: float = 0.05
    t_unamb: float = 0.99
    r_min: int = 500
    r_max: int = 4000
    alpha_schedule: Optional[float] = None
    trim: bool = True

    def validate(self) -> "LearnerConfig":
        check_probability(self.alpha, "alpha", high_open=True)
        check_probability(self.t_unamb, "t_unamb", low_open=False)
        if int(self.r_min) < 1 or int(self.r_max) < 1:
            raise ValueError("r_min and r_max must be positive")
        if int(self.r_min) > int(self.r_max):
            raise ValueError(f"r_min ({self.r_min}) must not exceed r_max ({self.r_max})")
        if self.alpha_schedule is not None and float(self.alpha_schedule) <= 0:
            raise ValueError("alpha_schedule exponent must be positive")
        return self


def is_prefix(a, b) -> bool:
    return len(a) <= len(b) and tuple(b[: len(a)]) == tuple(a)


class SampledObservationTable:
    """Observation table with frequency cells.

    Cells are read from the teacher on first use and cached until
    :meth:`refresh` is called, which corresponds to refilling the table from
    the teacher's current sample.
    """

    def __init__(self, teacher, alpha: float = 0.05):
        self.teacher = teacher
        self.inputs = tuple(teacher.inputs)
        self.alpha = alpha
        self._cells = {}
        self._complete = {}
        self._compat = {}
        o0 = teacher.initial_output()
        self.S = [(o0,)]
        self._S_set = {(o0,)}
        self.E = [(i,) for i in self.inputs]
        self.R = []
        self.rep = {}
        self.rank = {}

    # -- cells ----------------------------------------------------------------------------

    def refresh(self) -> None:
        self._cells.clear()
        self._complete.clear()
        self._compat.clear()

    def freq(self, seq) -> dict:
        seq = tuple(seq)
        f = self._cells.get(seq)
        if f is None:
            f = self._cells[seq] = self.teacher.fq(seq)
        return f

    def complete(self, seq) -> bool:
        seq = tuple(seq)
        c = self._complete.get(seq)
        if c is None:
            c = self._complete[seq] = bool(self.teacher.cq(seq))
        return c

    def cell_diff(self, c1, c2) -> bool:
        """Statistically different cells; both have to be complete."""
        if not (self.complete(c1) and self.complete(c2)):
            return False
        return hoeffding_diff(self.freq(c1), self.freq(c2), self.alpha)

    def compatible(self, s1, s2) -> bool:
        if s1[-1] != s2[-1]:
            return False
        if s1 == s2:
            return True
        key = (s1, s2) if s1 < s2 else (s2, s1)
        res = self._compat.get(key)
        if res is None:
            res = not any(self.cell_diff(s1 + e, s2 + e) for e in self.E)
            self._compat[key] = res
        return res

    # -- rows -----------------------------------------------------------------------------

    def long_rows(self) -> list:
        out = []
        for s in self.S:
            for i in self.inputs:
                f = self.freq(s + (i,))
                for o in sorted(f):
                    if f[o] > 0 and s + (i, o) not in self._S_set:
                        out.append(s + (i, o))
        return out

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
        for k in range(len(e) - 1, -1, -2):
            if e[k:] not in self.E:
                self.E.append(e[k:])
        self._compat.clear()
        return True

    def incomplete(self) -> list:
        """Cells ``s e`` with ``s`` a short or long row that are not yet complete (live query)."""
        seen, out = set(), []
        for s in self.S + self.long_rows():
            for e in self.E:
                seq = s + e
                if seq not in seen:
                    seen.add(seq)
                    if not self.teacher.cq(seq):
                        out.append(seq)
        return out

    # -- compatibility classes ------------------------------------------------------------

    def row_rank(self, s) -> int:
        return sum(sum(self.freq(s + (i,)).values()) for i in self.inputs)

    def compute_classes(self):
        """Partition ``S`` into compatibility classes led by the highest-ranked rows."""
        self.rank = {s: self.row_rank(s) for s in self.S}
        unpartitioned = sorted(self.S, key=lambda s: (-self.rank[s], s))
        R, rep, cg = [], {}, {}
        while unpartitioned:
            r = unpartitioned[0]
            R.append(r)
            members = [s for s in unpartitioned if self.compatible(s, r)]
            cg[r] = members
            for s in members:
                rep[s] = r
            member_set = set(members)
            unpartitioned = [s for s in unpartitioned if s not in member_set]
        self.R, self.rep = R, rep
        return R, rep, cg

    def representative(self, trace):
        """Representative of a short row, or of a long row (highest-ranked compatible one)."""
        if trace in self.rep:
            return self.rep[trace]
        for r in self.R:
            if self.compatible(trace, r):
                return r
        return None

    def closedness_witness(self):
        for l in self.long_rows():
            if not any(self.compatible(l, r) for r in self.R):
                return l
        return None

    def consistency_witness(self):
        S = self.S
        for a in range(len(S)):
            for b in range(a + 1, len(S)):
                s1, s2 = S[a], S[b]
                if not self.compatible(s1, s2):
                    continue
                for i in self.inputs:
                    f1, f2 = self.freq(s1 + (i,)), self.freq(s2 + (i,))
                    for o in sorted(f1):
                        if f1[o] <= 0 or f2.get(o, 0) <= 0:
                            continue
                        x1, x2 = s1 + (i, o), s2 + (i, o)
                        if self.compatible(x1, x2):
                            continue
                        for e in self.E:
                            if self.cell_diff(x1 + e, x2 + e):
                                return (i, o) + e
        return None

    def make_closed_and_consistent(self) -> Optional[str]:
        """Recompute classes and apply at most one repair (``"row"``/``"column"``/None)."""
        self.compute_classes()
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
        """Hypothesis from the current classes: one state per representative plus ``chaos``."""
        if not self.R:
            self.compute_classes()
        index = {r: k for k, r in enumerate(self.R)}
        chaos = len(self.R)
        labels = [r[-1] for r in self.R] + [CHAOS]
        rows = []
        outputs = set(labels[:-1])
        for r in self.R:
            row = {}
            for i in self.inputs:
                seq = r + (i,)
                f = self.freq(seq)
                total = sum(f.values())
                if not self.complete(seq) or total == 0:
                    row[i] = {chaos: 1.0}
                    continue
                dist = {}
                for o in sorted(f):
                    if f[o] <= 0:
                        continue
                    target = self.representative(seq + (o,))
                    if target is None:
                        raise ValueError(f"observation table is not closed: no representative for {seq + (o,)}")
                    t = index[target]
                    dist[t] = dist.get(t, 0.0) + f[o] / total
                    outputs.add(o)
                row[i] = dist
            rows.append(row)
        rows.append({i: {chaos: 1.0} for i in self.inputs})
        h = Mdp(self.inputs, sorted(outputs) + [CHAOS], labels, rows, index[self.rep[self.S[0]]])
        return check_mdp(h)

    def state_representatives(self) -> dict:
        return {k: r for k, r in enumerate(self.R)}

    # -- trimming and stopping ------------------------------------------------------------

    def trim(self, h: Mdp) -> list:
        """Remove rows (with their extensions) that cannot change the hypothesis; returns removed rows."""
        chaos = len(self.R)
        reps = self.state_representatives()
        removed = []
        gone = set()
        for s in list(self.S):
            if s in gone or s in self._R_set() or any(is_prefix(s, r) for r in self.R):
                continue
            if sum(1 for r in self.R if self.compatible(s, r)) != 1:
                continue
            exts = [x for x in self.S if x not in gone and is_prefix(s, x)]
            keep = False
            for x in exts:
                q = h.run_trace(x)
                if q is None or q == chaos:
                    keep = True
                    break
                r = reps[q]
                if any(self.teacher.diff_fq(x + (i,), r + (i,), self.alpha) for i in self.inputs):
                    keep = True
                    break
            if keep:
                continue
            gone.update(exts)
            removed.extend(exts)
        if gone:
            self.S = [s for s in self.S if s not in gone]
            self._S_set = set(self.S)
            for s in gone:
                self.rep.pop(s, None)
        return removed

    def _R_set(self):
        return set(self.R)

    def unambiguity_ratio(self) -> float:
        rows = self.S + self.long_rows()
        unamb = sum(1 for s in rows if sum(1 for r in self.R if self.compatible(s, r)) == 1)
        return unamb / len(rows)

    def sizes(self) -> dict:
        return {"S": len(self.S), "Lt": len(self.long_rows()), "E": len(self.E), "R": len(self.R)}


def chaos_reachable(h: Mdp) -> bool:
    return any(h.labels[q] == CHAOS for q in h.reachable())


def should_stop(table: SampledObservationTable, h: Mdp, rnd: int, config: LearnerConfig, ratio=None) -> bool:
    if rnd >= config.r_max:
        return True
    if rnd < config.r_min or chaos_reachable(h):
        return False
    ratio = table.unambiguity_ratio() if ratio is None else ratio
    return ratio >= config.t_unamb


def _alpha_for(config: LearnerConfig, teacher) -> float:
    if config.alpha_schedule is None:
        return config.alpha
    n = max(int(getattr(teacher, "n_traces", 0)), 2)
    return min(config.alpha, 1.0 / n ** float(config.alpha_schedule))


def _repair(table, limit=100_000):
    for _ in range(limit):
        if table.make_closed_and_consistent() is None:
            return
    raise RuntimeError("observation table repair did not terminate")


def learn_sampling(teacher, config: Optional[LearnerConfig] = None):
    """Run the sampling learner; returns ``(hypothesis, table, log)``."""
    config = (config or LearnerConfig()).validate()
    table = SampledObservationTable(teacher, _alpha_for(config, teacher))
    teacher.rfq(table.incomplete())
    table.refresh()
    log = []
    rnd = 0
    while True:
        rnd += 1
        table.alpha = _alpha_for(config, teacher)
        _repair(table)
        h = table.hypothesis()
        entry = {"round": rnd, **table.sizes()}
        if config.trim:
            removed = table.trim(h)
            h_after = table.hypothesis()
            entry["trimmed"] = len(removed)
            entry["trim_neutral"] = equivalence_check(h, h_after) is None
        cex = teacher.eq(h, table.state_representatives())
        if cex is not None:
            for t in trace_prefixes(cex[:-1]) if cex else []:
                table.add_row(t)
        teacher.rfq(table.incomplete())
        table.refresh()
        ratio = table.unambiguity_ratio()
        entry.update(
            {
                "hypothesis_states": h.n_states - 1,
                "chaos_reachable": chaos_reachable(h),
                "r_unamb": ratio,
                "counterexample": None if cex is None else list(cex),
                "traces": int(getattr(teacher, "n_traces", 0)),
                "outputs": int(getattr(teacher, "n_outputs", 0)),
            }
        )
        log.append(entry)
        if should_stop(table, h, rnd, config, ratio):
            break
    _repair(table)
    return table.hypothesis(), table, log
