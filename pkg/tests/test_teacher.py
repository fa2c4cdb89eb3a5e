import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lstar_mdp import Mdp, SampleStore, SamplingTeacher, Sul, TeacherConfig
from lstar_mdp.mdp import CHAOS
from lstar_mdp.sampling import SampledObservationTable
from lstar_mdp.sul import sample_trace
from lstar_mdp.teacher import compute_schedulers, reachability_values

BEEP = ("init", "coin", "beep")
BREW = BEEP + ("but", "coffee")


def test_store_counts_prefixes():
    store = SampleStore()
    store.add_trace(BEEP, 2)
    assert store.fq(("init", "coin")) == {"beep": 2}
    store.add_trace(BREW)
    assert store.fq(("init", "coin")) == {"beep": 3}
    assert store.fq(BEEP + ("but",)) == {"coffee": 1}
    assert store.count(("init",)) == 3
    assert store.n_traces == 3 and store.n_outputs == 2 * 2 + 3
    assert store.fq(()) == {"init": 3}


def test_empty_store():
    store = SampleStore()
    assert store.fq(("init", "coin")) == {}
    assert store.fq(()) == {}
    assert store.count(BEEP) == 0
    with pytest.raises(ValueError):
        store.add_trace(("init", "coin"))
    with pytest.raises(ValueError):
        store.add_trace(BEEP, 0)


def test_cq_threshold():
    store = SampleStore()
    store.add_trace(BEEP, 4)
    assert not store.cq(("init", "coin"), 5)
    store.add_trace(BEEP)
    assert store.cq(("init", "coin"), 5)


def test_cq_vacuous_clause():
    store = SampleStore()
    store.add_trace(BEEP, 5)
    # init coin was complete and never produced coffee
    assert store.cq(("init", "coin", "coffee", "but"), 5)
    assert store.cq(("init", "coin", "coffee", "but", "init", "coin"), 5)
    # the observed branch is not complete yet
    assert not store.cq(BEEP + ("but",), 5)
    # wrong initial output after enough resets
    assert store.cq(("beep", "coin"), 5)
    assert not SampleStore().cq(("beep", "coin"), 5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.sampled_from(["x", "y"]), min_size=1, max_size=4), min_size=1, max_size=30))
def test_prefix_dominance_and_fq(walks):
    store = SampleStore()
    for w in walks:
        trace = ("o",)
        for s in w:
            trace += ("a", s)
        store.add_trace(trace)
    for trace, node in store.iter_nodes():
        for i, by in node.children.items():
            assert store.fq(trace + (i,)) == {o: c.count for o, c in by.items()}
            for c in by.values():
                assert c.count <= node.count


def test_jsonl_roundtrip(coffee):
    sul = Sul(coffee, 3)
    store = SampleStore()
    for _ in range(200):
        store.add_trace(sample_trace(sul, 0.3))
    again = SampleStore.from_jsonl(store.to_jsonl())
    assert again.traces() == store.traces()
    assert (again.n_traces, again.n_outputs) == (store.n_traces, store.n_outputs)
    assert sum(c for _, c in store.traces()) == 200
    with pytest.raises(ValueError, match="line 1"):
        SampleStore.from_jsonl('{"trace": ["init", "coin"]}\n')


def test_fresh_coffee_table_rfq(coffee):
    teacher = SamplingTeacher(Sul(coffee, 0), TeacherConfig(n_resample=300))
    table = SampledObservationTable(teacher)
    assert set(table.incomplete()) == {("init", "but"), ("init", "coin")}
    assert teacher.rfq(table.incomplete()) == 300
    assert teacher.fq(("init", "but")) and teacher.fq(("init", "coin"))
    # one reset for the initial output, then one step per resampled trace
    assert sorted((len(t), c) for t, c in teacher.store.traces())[0] == (1, 1)
    assert {len(t) for t, _ in teacher.store.traces()} == {1, 3}


def test_rfq_single_chain_follows_trie(coffee):
    teacher = SamplingTeacher(Sul(coffee, 1), TeacherConfig(n_resample=50))
    teacher.rfq([BEEP + ("but",)])
    for trace, _ in teacher.store.traces():
        assert trace[:3] == BEEP and trace[3] == "but" and len(trace) == 5


def test_rfq_zero_resample(coffee):
    teacher = SamplingTeacher(Sul(coffee, 1), TeacherConfig(n_resample=0))
    assert teacher.rfq([("init", "coin")]) == 0
    assert teacher.store.n_traces == 0


def test_scheduler_for_coffee(coffee):
    V, _ = reachability_values(coffee)
    q1 = coffee.successor(0, "coin", "beep")
    q2 = coffee.successor(q1, "but", "coffee")
    assert V[0, q2] == pytest.approx(1.0, abs=1e-5) and V[q1, q2] == pytest.approx(1.0, abs=1e-5)
    sched = compute_schedulers(coffee)[q2]
    assert sched[0] == "coin" and sched[q1] == "but"
    assert V[0, 0] == 1.0


def test_unreachable_target_has_zero_value():
    m = Mdp(("a",), ("x", "y"), ("x", "y"), [{"a": {0: 1.0}}, {"a": {0: 1.0}}])
    V, _ = reachability_values(m)
    assert V[0, 1] == 0.0 and V[1, 1] == 1.0


def _filled_teacher(coffee, seed=0, n=3000):
    sul = Sul(coffee, seed)
    store = SampleStore()
    for _ in range(n):
        store.add_trace(sample_trace(sul, 0.2))
    return SamplingTeacher(sul, TeacherConfig(n_c=20), store=store)


def test_eq_accepts_truth(coffee):
    teacher = _filled_teacher(coffee)
    assert teacher.eq(coffee) is None


def test_eq_finds_missing_edge(coffee):
    teacher = _filled_teacher(coffee)
    rows = [dict(r) for r in coffee.transitions]
    rows[1] = {"but": {2: 1.0}, "coin": {1: 1.0}}
    wrong = Mdp(coffee.inputs, coffee.outputs, coffee.labels, rows)
    cex = teacher.eq(wrong)
    assert cex[-2:] == ("beep", "but")
    assert coffee.semantics(cex) != wrong.semantics(cex)


def test_eq_with_reachable_chaos_returns_none(coffee):
    teacher = _filled_teacher(coffee)
    h = Mdp(coffee.inputs, ("init", CHAOS), ("init", CHAOS), [{"but": {0: 1.0}, "coin": {1: 1.0}}, {"but": {1: 1.0}, "coin": {1: 1.0}}])
    before = teacher.store.n_traces
    assert teacher.eq(h) is None
    assert teacher.store.n_traces == before


def test_teacher_config_validation():
    with pytest.raises(ValueError):
        TeacherConfig(n_c=0).validate()
    with pytest.raises(ValueError):
        TeacherConfig(p_stop=1.5).validate()
