from collections import Counter

import numpy as np
import pytest

from lstar_mdp import Sul, builtin_model, load_gridworld, random_deterministic_mdp, validate
from lstar_mdp.sul import build_gridworld, make_rng, parse_gridworld, sample_trace

TINY = """
#####
#@SX#
#####
start C
goal C
"""


def test_sul_counts_and_reset(coffee):
    sul = Sul(coffee, 1)
    assert sul.reset() == "init"
    assert sul.step("coin") == "beep"
    sul.step("but")
    assert (sul.n_resets, sul.n_steps, sul.n_outputs) == (1, 2, 3)
    with pytest.raises(ValueError):
        sul.step("kick")


def test_step_before_reset(coffee):
    with pytest.raises(RuntimeError):
        Sul(coffee, 0).step("coin")


def test_sul_frequencies_match_probabilities(coffee):
    sul = Sul(coffee, 7)
    counts = Counter()
    for _ in range(20000):
        sul.reset()
        sul.step("coin")
        counts[sul.step("but")] += 1
    assert counts["coffee"] / 20000 == pytest.approx(0.8, abs=0.01)


def test_same_seed_same_traces(coffee):
    s1, s2 = Sul(coffee, 5), Sul(coffee, 5)
    assert [sample_trace(s1, 0.25) for _ in range(50)] == [sample_trace(s2, 0.25) for _ in range(50)]


def test_make_rng_accepts_seed_kinds():
    g = make_rng(4)
    assert make_rng(g) is g
    x = make_rng(np.random.SeedSequence(4)).random()
    assert x == make_rng(4).random()


def test_sample_trace_takes_a_step(coffee):
    sul = Sul(coffee, 0)
    lengths = [len(sample_trace(sul, 0.9)) for _ in range(200)]
    assert min(lengths) == 3
    with pytest.raises(ValueError):
        sample_trace(sul, 0.0)


def test_random_models_are_valid():
    for seed in range(30):
        m = random_deterministic_mdp(seed, 1 + seed % 6)
        assert validate(m) == []
        assert m.n_states == 1 + seed % 6


def test_tiny_gridworld():
    m = load_gridworld(TINY)
    names = set(m.state_names)
    assert {"C@1,1", "S@1,2", "goal@1,3", "wall@1,1"} <= names
    q = m.state_names.index("C@1,1")
    east = m.transitions[q]["east"]
    # both diagonals of the sand tile are walls
    assert {m.state_names[t]: p for t, p in east.items()} == pytest.approx({"S@1,2": 0.8, "wall@1,1": 0.2})
    g = m.state_names.index("goal@1,3")
    assert all(m.transitions[g][d] == {g: 1.0} for d in m.inputs)


def test_gridworld_error_prob_override():
    m = load_gridworld(TINY, {"C": 0.0, "S": 0.0, "M": 0.0, "G": 0.0})
    q = m.state_names.index("C@1,1")
    assert len(m.transitions[q]["east"]) == 1


def test_gridworld_rejects_bad_maps():
    with pytest.raises(ValueError, match="border"):
        parse_gridworld("#@S#\n#S##\n####\n")
    with pytest.raises(ValueError, match="start"):
        parse_gridworld("####\n#SS#\n####\n")
    with pytest.raises(ValueError, match="concrete"):
        parse_gridworld(TINY, {"C": 0.1, "S": 0.2})
    with pytest.raises(ValueError, match="unknown terrain"):
        parse_gridworld(TINY + "goal Q\n")


def test_non_absorbing_goal():
    spec = parse_gridworld(TINY, absorbing_goal=False)
    m = build_gridworld(spec)
    g = m.state_names.index("goal@1,3")
    west = {m.state_names[t]: p for t, p in m.transitions[g]["west"].items()}
    assert west == pytest.approx({"S@1,2": 0.8, "wall@1,3": 0.2})


def test_builtin_models():
    assert builtin_model("coffee").n_states == 3
    assert builtin_model("gridworld-small").n_states == 16
    assert builtin_model("gridworld").n_states == 35
    assert builtin_model("gridworld-desk").n_states == 16
    for name in ("gridworld", "gridworld-small"):
        m = builtin_model(name)
        assert validate(m) == []
        assert "goal" in m.outputs and "wall" in m.outputs
    with pytest.raises(ValueError, match="unknown builtin"):
        builtin_model("nope")
