from hypothesis import given, strategies as st
import pytest

from tmrm.automata import DBMM, EMPTY_LABEL, TransitionMachine, make_label
from tmrm.db_rpni import infer
from tmrm.envs import generate_traces, rollout
from tmrm.oracle import check_resolvent
from tmrm.supplement import (SupplementError, strip_supplement, supplement_corpus,
                             supplement_trace, tm_state_sequence, transition_conflicts)
from tmrm.traces import LabeledTrace, make_step, to_rm_samples

KEY = make_label(["key"])


def key_tm():
    """q0 until the key label is read, then q1 for good."""
    trans = {(0, EMPTY_LABEL): 0, (0, KEY): 1, (1, EMPTY_LABEL): 1, (1, KEY): 1}
    return TransitionMachine(DBMM(2, 0, transitions=trans, emissions={(0, ("c", "up")): "c"}))


def trace(*labels):
    return LabeledTrace(tuple(make_step(l, f"o{i}", "up", 0) for i, l in enumerate(labels)))


def test_single_step_pairs_initial_state():
    out = supplement_trace(key_tm(), trace(["key"]))
    assert out.steps[0].obs == ("o0", "q0")


def test_state_sequence_hand_simulated():
    t = trace(None, ["key"], None)
    assert tm_state_sequence(key_tm(), t) == [0, 0, 1]
    out = supplement_trace(key_tm(), t)
    assert [s.obs[1] for s in out.steps] == ["q0", "q0", "q1"]


def test_corridor_visits_split_by_key(fig1_machines, fig1_env):
    tm, _, _ = fig1_machines
    steps = [("corridor", "left"), ("orangeroom", "down"), ("corridor", "sit")]
    t = LabeledTrace(tuple(make_step(fig1_env.label(o), o, a, 0) for o, a in steps))
    out = supplement_trace(tm, t)
    assert out.steps[0].obs[0] == out.steps[2].obs[0] == "corridor"
    assert out.steps[0].obs[1] != out.steps[2].obs[1]


def test_empty_corpus():
    assert supplement_corpus(key_tm(), []) == []


def test_single_state_tm_adds_nothing(fig1_traces):
    one = TransitionMachine(DBMM(1, 0, transitions={(0, b): 0 for t in fig1_traces for b in
                                                    {s.label for s in t}}))
    out = supplement_corpus(one, fig1_traces)
    assert all(s.obs[1] == "q0" for t in out for s in t)
    plain = infer(to_rm_samples(fig1_traces))
    supp = infer(to_rm_samples(out))
    assert plain.n_states == supp.n_states


def test_undefined_transition_reports_position():
    tm = key_tm()
    t = trace(None, ["toilet"], None)
    with pytest.raises(SupplementError) as info:
        supplement_corpus(tm, [trace(None), t])
    assert info.value.trace_index == 1 and info.value.step == 1


@given(st.lists(st.sampled_from([None, ["key"]]), min_size=1, max_size=10))
def test_projection_and_determinism(labels):
    t = trace(*labels)
    out = supplement_trace(key_tm(), t)
    assert strip_supplement(out) == t
    assert supplement_trace(key_tm(), t) == out


def test_markovization(fig1_env, fig1_machines, fig1_traces):
    tm, _, _ = fig1_machines
    assert check_resolvent(tm, fig1_env, 8).ok
    # raw observations are not Markov: (corridor, up) leads to two rooms
    assert transition_conflicts(fig1_traces)
    assert transition_conflicts(supplement_corpus(tm, fig1_traces)) == []
    extra = generate_traces(fig1_env, 200, 40, seed=99)
    assert transition_conflicts(supplement_corpus(tm, extra)) == []


def test_rollout_feeds_supplement(fig1_env, fig1_machines):
    import numpy as np
    tm, _, _ = fig1_machines
    t = rollout(fig1_env, np.random.default_rng(5), 30)
    assert len(supplement_trace(tm, t)) == len(t)
