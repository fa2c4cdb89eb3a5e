"""Simulated systems under learning and benchmark models.

A :class:`Sul` wraps a hidden :class:`~lstar_mdp.mdp.Mdp` and only exposes
``reset`` and ``step``.  All randomness is drawn from a counter-based
``numpy`` Philox generator so that runs are reproducible from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Optional

import numpy as np

from .io import parse_mdp
from .mdp import Mdp, check_mdp
from .validation import check_probability


def make_rng(seed=None) -> np.random.Generator:
    """Philox generator from an int seed, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class _UniformStream:
    """Buffered uniform draws from a generator (same values as drawing one at a time)."""

    __slots__ = ("rng", "_buf", "_pos")

    def __init__(self, rng, size=4096):
        self.rng = rng
        self._buf = rng.random(size)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self.rng.random(len(self._buf))
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


class Sul:
    """A black-box view of an MDP: ``reset`` and ``step`` only.

    Parameters
    ----------
    mdp : Mdp
        The hidden model.
    seed : int, SeedSequence or Generator, optional
        Source of randomness for successor sampling.  Learners and teachers
        draw their own random choices from the same stream through
        :meth:`random` and :meth:`choice`.
    """

    def __init__(self, mdp: Mdp, seed=None):
        self._mdp = mdp
        self._uniform = _UniformStream(make_rng(seed))
        self._state: Optional[int] = None
        self.n_resets = 0
        self.n_steps = 0
        self._input_set = frozenset(mdp.inputs)
        self._table = []
        for q in mdp.states:
            row = {}
            for i in mdp.inputs:
                items = [(t, p) for t, p in mdp.transitions[q].get(i, {}).items() if p > 0]
                targets = [t for t, _ in items]
                cum = np.cumsum([p for _, p in items]).tolist()
                row[i] = (targets, cum)
            self._table.append(row)

    @property
    def inputs(self) -> tuple:
        return self._mdp.inputs

    @property
    def outputs(self) -> tuple:
        return self._mdp.outputs

    @property
    def hidden_model(self) -> Mdp:
        """The wrapped model; for white-box checks in tests only."""
        return self._mdp

    @property
    def n_outputs(self) -> int:
        """Outputs observed so far, counting the initial output of every reset."""
        return self.n_resets + self.n_steps

    def random(self) -> float:
        return self._uniform()

    def choice(self, items):
        items = tuple(items)
        k = int(self._uniform() * len(items))
        return items[min(k, len(items) - 1)]

    def reset(self) -> str:
        self._state = self._mdp.initial
        self.n_resets += 1
        return self._mdp.labels[self._state]

    def step(self, i) -> str:
        if self._state is None:
            raise RuntimeError("step called before reset")
        if i not in self._input_set:
            raise ValueError(f"unknown input {i!r}; known inputs are {list(self._mdp.inputs)}")
        targets, cum = self._table[self._state][i]
        u = self._uniform() * cum[-1]
        k = 0
        while k < len(cum) - 1 and u >= cum[k]:
            k += 1
        self._state = targets[k]
        self.n_steps += 1
        return self._mdp.labels[self._state]


def sample_trace(sul: Sul, p_stop: float) -> tuple:
    """Reset, then apply uniformly random inputs, stopping after each step with ``p_stop``."""
    p_stop = check_probability(p_stop, "p_stop")
    trace = [sul.reset()]
    while True:
        i = sul.choice(sul.inputs)
        trace.append(i)
        trace.append(sul.step(i))
        if sul.random() < p_stop:
            return tuple(trace)


# -- benchmark models ---------------------------------------------------------------------


def _data_text(name: str) -> str:
    return resources.files("lstar_mdp").joinpath("data", name).read_text()


def build_coffee_machine() -> Mdp:
    """The faulty coffee machine: pressing the button after paying fails with probability 0.2."""
    return parse_mdp(_data_text("coffee.json"))


def random_deterministic_mdp(rng, n_states: int, inputs=("a", "b"), outputs=("x", "y", "z")) -> Mdp:
    """A random valid deterministic MDP; probabilities are normalised small integer weights."""
    rng = make_rng(rng)
    labels = [outputs[int(k)] for k in rng.integers(0, len(outputs), n_states)]
    by_label: Dict[str, list] = {}
    for q, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(q)
    present = [o for o in outputs if o in by_label]
    rows = []
    for _ in range(n_states):
        row = {}
        for i in inputs:
            k = int(rng.integers(1, len(present) + 1))
            chosen = sorted(rng.choice(len(present), size=k, replace=False).tolist())
            targets = []
            for c in chosen:
                cands = by_label[present[c]]
                targets.append(cands[int(rng.integers(0, len(cands)))])
            weights = rng.integers(1, 10, size=len(targets)).astype(float)
            probs = weights / weights.sum()
            row[i] = {t: float(p) for t, p in zip(targets, probs)}
        rows.append(row)
    return check_mdp(Mdp(inputs, outputs, labels, rows, 0))


# -- gridworlds ---------------------------------------------------------------------------

TERRAINS = {"C": "Concrete", "S": "Sand", "M": "Mud", "G": "Grass"}
DEFAULT_ERROR_PROB = {"C": 0.0, "G": 0.1, "S": 0.2, "M": 0.4}
DIRECTIONS = {"north": (-1, 0), "east": (0, 1), "south": (1, 0), "west": (0, -1)}


@dataclass
class GridworldSpec:
    """A tile world.

    ``tiles`` holds one string per row; each character is a terrain code
    (``C``, ``S``, ``M``, ``G``) or ``#`` for a wall.  ``start`` is a
    ``(row, column)`` coordinate and ``goals`` the set of goal coordinates.
    """

    tiles: list
    start: tuple
    goals: frozenset = frozenset()
    error_prob: dict = field(default_factory=lambda: dict(DEFAULT_ERROR_PROB))
    absorbing_goal: bool = True

    @property
    def height(self) -> int:
        return len(self.tiles)

    @property
    def width(self) -> int:
        return len(self.tiles[0]) if self.tiles else 0

    def terrain(self, pos) -> str:
        r, c = pos
        return self.tiles[r][c]

    def is_wall(self, pos) -> bool:
        r, c = pos
        if not (0 <= r < self.height and 0 <= c < self.width):
            return True
        return self.tiles[r][c] == "#"

    def validate(self) -> None:
        if not self.tiles or any(len(row) != self.width for row in self.tiles):
            raise ValueError("gridworld rows must be non-empty and of equal width")
        for r, row in enumerate(self.tiles):
            for c, ch in enumerate(row):
                if ch != "#" and ch not in TERRAINS:
                    raise ValueError(f"unknown tile {ch!r} at row {r}, column {c}")
                border = r in (0, self.height - 1) or c in (0, self.width - 1)
                if border and ch != "#":
                    raise ValueError(f"border tile at row {r}, column {c} must be a wall")
        if self.is_wall(self.start):
            raise ValueError(f"start {self.start} is a wall")
        for g in self.goals:
            if self.is_wall(g):
                raise ValueError(f"goal {g} is a wall")
        for t in {ch for row in self.tiles for ch in row if ch != "#"}:
            if t not in self.error_prob:
                raise ValueError(f"no error probability for terrain {t!r}")
            e = float(self.error_prob[t])
            if not (0.0 <= e < 1.0):
                raise ValueError(f"error probability of terrain {t!r} must lie in [0, 1), got {e}")
        if float(self.error_prob.get("C", 0.0)) != 0.0:
            raise ValueError("concrete must have error probability 0")


def parse_gridworld(text: str, error_prob: Optional[dict] = None, absorbing_goal: bool = True) -> GridworldSpec:
    """Parse the map text format.

    Map rows use ``C S M G`` for terrain, ``#`` for walls, ``@`` for the start
    and ``X`` for goal tiles.  The terrain beneath ``@`` and ``X`` is given by
    annotation lines ``start <code>`` and ``goal <code>``.
    """
    rows, notes = [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 2 and parts[0] in ("start", "goal"):
            if parts[1] not in TERRAINS:
                raise ValueError(f"line {lineno}: unknown terrain {parts[1]!r}")
            notes[parts[0]] = parts[1]
        elif len(parts) == 1 and set(line) <= set("CSMG#@X"):
            rows.append(line)
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    start, goals, tiles = None, set(), []
    for r, row in enumerate(rows):
        out = []
        for c, ch in enumerate(row):
            if ch == "@":
                if start is not None:
                    raise ValueError("map has more than one start tile")
                start = (r, c)
                out.append(notes.get("start", "C"))
            elif ch == "X":
                goals.add((r, c))
                out.append(notes.get("goal", "C"))
            else:
                out.append(ch)
        tiles.append("".join(out))
    if start is None:
        raise ValueError("map has no start tile '@'")
    spec = GridworldSpec(tiles, start, frozenset(goals), dict(error_prob or DEFAULT_ERROR_PROB), absorbing_goal)
    spec.validate()
    return spec


def build_gridworld(spec: GridworldSpec) -> Mdp:
    """Build the gridworld MDP.

    States are pairs of a tile and the output observed on arrival: the tile's
    terrain code, ``goal`` on goal tiles, or ``wall`` after bumping into a
    wall.  A move towards tile ``t`` succeeds with probability ``1 - e`` where
    ``e`` is the error probability of ``t``'s terrain; otherwise the agent
    lands on one of the two tiles diagonally adjacent to the intended
    direction (``e / 2`` each).  A deviation into a wall leaves the agent in
    place with output ``wall``, as does any move into a wall.  With
    ``absorbing_goal`` (the default) goal tiles are sinks.

    If two different tiles with the same output could be reached by one move,
    the later tile (in row-major order) gets a disambiguated output such as
    ``S_3_2``; the affected tiles are listed in ``metadata["relabelled"]``.
    """
    spec.validate()
    labels = {}
    for r, row in enumerate(spec.tiles):
        for c, ch in enumerate(row):
            if ch != "#":
                labels[(r, c)] = "goal" if (r, c) in spec.goals else ch
    relabelled = []
    while True:
        moves = _grid_moves(spec, labels)
        clash = _find_clash(moves, labels)
        if clash is None:
            break
        labels[clash] = f"{labels[clash]}_{clash[0]}_{clash[1]}"
        relabelled.append(list(clash))

    # reachable (tile, output) states
    init = (spec.start, labels[spec.start])
    order = [init]
    index = {init: 0}
    rows = []
    k = 0
    while k < len(order):
        pos, _ = order[k]
        row = {}
        for d in DIRECTIONS:
            dist = {}
            for tgt, p in moves[(pos, d)].items():
                if tgt not in index:
                    index[tgt] = len(order)
                    order.append(tgt)
                dist[index[tgt]] = dist.get(index[tgt], 0.0) + p
            row[d] = dist
        rows.append(row)
        k += 1
    terrain_out = [t for t in "CSMG" if any(v == t for v in labels.values())]
    extra = sorted({v for v in labels.values()} - set(terrain_out) - {"goal"})
    outputs = terrain_out + extra + (["goal"] if spec.goals else []) + ["wall"]
    names = [f"{lab}@{pos[0]},{pos[1]}" for pos, lab in order]
    meta = {"relabelled": relabelled} if relabelled else {}
    return check_mdp(Mdp(tuple(DIRECTIONS), outputs, [lab for _, lab in order], rows, 0, names, meta))


def _grid_moves(spec, labels):
    moves = {}
    for pos in labels:
        for d, (dr, dc) in DIRECTIONS.items():
            tgt = (pos[0] + dr, pos[1] + dc)
            dist = {}

            def add(state, p):
                if p > 0:
                    dist[state] = dist.get(state, 0.0) + p

            if spec.absorbing_goal and pos in spec.goals:
                add((pos, labels[pos]), 1.0)
            elif spec.is_wall(tgt):
                add((pos, "wall"), 1.0)
            else:
                e = float(spec.error_prob[spec.terrain(tgt)])
                add((tgt, labels[tgt]), 1.0 - e)
                # the two diagonal neighbours adjacent to the intended direction
                for pr, pc in ((dc, dr), (-dc, -dr)):
                    diag = (tgt[0] + pr, tgt[1] + pc)
                    if spec.is_wall(diag):
                        add((pos, "wall"), e / 2)
                    else:
                        add((diag, labels[diag]), e / 2)
            moves[(pos, d)] = dist
    return moves


def _find_clash(moves, labels):
    for (pos, d), dist in moves.items():
        seen = {}
        for tile, lab in dist:
            if lab in seen and seen[lab] != tile:
                return max(tile, seen[lab])
            seen.setdefault(lab, tile)
    return None


def load_gridworld(name_or_text: str, error_prob: Optional[dict] = None) -> Mdp:
    return build_gridworld(parse_gridworld(name_or_text, error_prob))


BUILTIN_MODELS = {
    "coffee": lambda: build_coffee_machine(),
    "gridworld": lambda: build_gridworld(parse_gridworld(_data_text("gridworld_large.txt"))),
    "gridworld-small": lambda: build_gridworld(parse_gridworld(_data_text("gridworld_small.txt"))),
    "gridworld-desk": lambda: build_gridworld(parse_gridworld(_data_text("gridworld_desk.txt"))),
}


def builtin_model(name: str) -> Mdp:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None


def builtin_map_text(name: str) -> str:
    files = {
        "gridworld": "gridworld_large.txt",
        "gridworld-small": "gridworld_small.txt",
        "gridworld-desk": "gridworld_desk.txt",
    }
    return _data_text(files[name])
