import pytest

from lstar_mdp import SampleStore, Sul, build_fpta, builtin_model, exact_frequency_fpta, ioalergia_learn, isomorphic
from lstar_mdp import minimize, validate
from lstar_mdp.alergia import default_eps
from lstar_mdp.mdp import are_equivalent, support_graph
from lstar_mdp.sul import sample_trace

BEEP = ("init", "coin", "beep")


def test_fpta_counts():
    f = build_fpta([BEEP, BEEP])
    assert f.n_nodes == 2
    child = f.root.children["coin"]["beep"]
    assert child.count == 2 and f.root.freq["coin"] == {"beep": 2}
    assert f.n_outputs == 4


def test_fpta_root_only():
    f = build_fpta([], initial_output="init")
    assert f.n_nodes == 1 and f.root.count == 0


def test_fpta_branches_on_outputs():
    f = build_fpta([BEEP + ("but", "coffee"), BEEP + ("but", "init")])
    node = f.root.children["coin"]["beep"]
    assert set(node.children["but"]) == {"coffee", "init"}
    assert node.freq["but"] == {"coffee": 1, "init": 1}


def test_fpta_from_store_and_pairs():
    store = SampleStore()
    store.add_trace(BEEP, 3)
    store.add_trace(("init", "but", "init"))
    a = build_fpta(store)
    b = build_fpta([(BEEP, 3), (("init", "but", "init"), 1)])
    assert (a.n_nodes, a.n_outputs) == (b.n_nodes, b.n_outputs) == (3, 8)
    with pytest.raises(ValueError):
        build_fpta([("beep", "coin", "beep")], initial_output="init")


def test_default_eps():
    assert default_eps(10000) == 1.0
    assert default_eps(100000) == pytest.approx(0.1)


def test_single_state_self_loop():
    traces = [("x",) + ("a", "x") * k for k in range(1, 30)] * 20
    m = ioalergia_learn(traces)
    assert m.n_states == 1
    assert m.transitions[0]["a"] == {0: 1.0}


def test_coffee_from_uniform_traces(coffee):
    sul = Sul(coffee, 0)
    traces = [sample_trace(sul, 0.125) for _ in range(100_000)]
    m = ioalergia_learn(traces)
    assert validate(m) == []
    assert m.n_states == 3
    assert are_equivalent(support_graph(minimize(m)), support_graph(coffee))
    q1 = m.successor(m.initial, "coin", "beep")
    assert m.output_distribution(q1, "but")["coffee"] == pytest.approx(0.8, abs=0.05)


def test_disjoint_supports_never_merge():
    # after x.a the outputs are y or z only; the y and z nodes answer disjointly
    traces = [("x", "a", "y", "a", "y")] * 500 + [("x", "a", "z", "a", "w")] * 500
    m = ioalergia_learn(traces)
    ys = [q for q in m.states if m.labels[q] == "y"]
    assert len(ys) == 1
    traces = [("x", "a", "y", "a", "u")] * 500 + [("x", "b", "y", "a", "w")] * 500
    m = ioalergia_learn(traces)
    assert sum(1 for q in m.states if m.labels[q] == "y") == 2


def test_unobserved_inputs_are_padded():
    m = ioalergia_learn([("x", "a", "x")] * 10, inputs=["a", "b"])
    assert m.metadata["padded"] == [[0, "b"]]
    assert m.transitions[0]["b"] == {0: 1.0}


def test_empty_data_rejected():
    with pytest.raises(ValueError):
        ioalergia_learn([])
    with pytest.raises(ValueError):
        ioalergia_learn([BEEP], eps=0.0)


@pytest.mark.parametrize("name", ["coffee", "gridworld-small", "gridworld"])
def test_exact_frequencies_give_minimal_model(name):
    truth = builtin_model(name)
    m = ioalergia_learn(exact_frequency_fpta(truth))
    assert isomorphic(m, minimize(truth), tol=1e-6)
