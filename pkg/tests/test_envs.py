import networkx as nx
import pytest

from tmrm.automata import EMPTY_LABEL
from tmrm.envs import (GroundTruthSpec, build_phase_grid, constraint_violations,
                       env_from_json, env_to_json, generate_random_env, generate_traces,
                       ground_truth_rm, ground_truth_tm, step, trace_stats)
from tmrm.envs.generator import rm_cycles, tm_graph
from tmrm.errors import ConfigError, GenerationError
from tmrm.oracle import brute_force_minimal
from tmrm.pipeline import infer_machines
from tmrm.supplement import supplement_corpus
from tmrm.traces import to_rm_samples


@pytest.mark.parametrize("toilet", [0, 1])
def test_locked_door(fig1_env, toilet):
    assert step(fig1_env, ("corridor", 0, toilet), "up").obs == "corridor"
    res = step(fig1_env, ("corridor", 1, toilet), "up")
    assert res.obs == "cyanroom" and res.label == frozenset({"toilet"})


def test_sofa_reward(fig1_env):
    for key in (0, 1):
        paid = step(fig1_env, ("limegreenroom", key, 1), "sit")
        assert paid.reward == 1 and paid.done
        early = step(fig1_env, ("limegreenroom", key, 0), "sit")
        assert early.reward == 0 and early.done


def test_fig1_sizes(fig1_env):
    assert len(fig1_env.all_states()) == 16
    assert len(fig1_env.observations()) == 4
    assert fig1_env.label("corridor") == EMPTY_LABEL


def test_unknown_action(fig1_env):
    with pytest.raises(ValueError):
        step(fig1_env, fig1_env.initial_state, "jump")


def test_phase_grid_single_phase():
    env = build_phase_grid(2, 1)
    traces = generate_traces(env, 300, 30, seed=4)
    _, rm, _ = infer_machines(traces)
    assert rm.machine.n_states <= 2
    # independent exact search on the same (unsupplemented) RM corpus
    exact = brute_force_minimal(to_rm_samples(traces), 3)
    assert exact is not None and exact.n_states <= 2


def test_phase_grid_completion():
    env = build_phase_grid(3, 3, seed=1)
    assert env.actions[-1] == "sit"
    assert env.n_rm_states == 4
    # sit only pays in the final phase
    s = env.initial_state
    assert env.reward(s, "sit") == 0 and not env.ends_episode(s, "sit")
    done = (s[0], 0, 3)
    assert env.reward(done, "sit") == 1 and env.ends_episode(done, "sit")


@pytest.mark.parametrize("size, phases", [(1, 1), (3, 0), (2, 4)])
def test_phase_grid_rejects_bad_params(size, phases):
    with pytest.raises(ConfigError):
        build_phase_grid(size, phases)


@pytest.mark.parametrize("seed", range(6))
def test_generator_constraints(seed):
    env, spec = generate_random_env(seed=seed)
    assert constraint_violations(spec) == []
    assert spec.n_tm == 7 and spec.n_rm == 3
    assert nx.is_strongly_connected(tm_graph(spec))
    # every labelled position is passable in at least one controller state
    assert not frozenset.intersection(*spec.impassable)
    # label cells sit on odd coordinates
    assert all(r % 2 == 1 and c % 2 == 1 for r, c in spec.label_cells.values())
    for cycle, total in rm_cycles(spec):
        assert total < 0, cycle
    for (u, p), (v, r) in spec.rm_transitions.items():
        if v == spec.rm_terminal:
            assert r > 0


def test_rm_cycles_enumerated_independently():
    _, spec = generate_random_env(seed=3)
    # brute-force: every simple cycle over at most 3 states, using the best-paying parallel edge
    best = {}
    for (u, _), (v, r) in spec.rm_transitions.items():
        best[(u, v)] = max(best.get((u, v), r), r)
    n = spec.n_rm
    for u in range(n):
        if (u, u) in best:
            assert best[(u, u)] < 0
        for v in range(n):
            if u < v and (u, v) in best and (v, u) in best:
                assert best[(u, v)] + best[(v, u)] < 0
            for w in range(n):
                if len({u, v, w}) == 3 and all(k in best for k in [(u, v), (v, w), (w, u)]):
                    assert best[(u, v)] + best[(v, w)] + best[(w, u)] < 0


def test_generator_is_deterministic():
    a = generate_random_env(seed=11)[1].to_json()
    b = generate_random_env(seed=11)[1].to_json()
    assert a == b
    assert generate_random_env(seed=12)[1].to_json() != a


def test_generator_spec_round_trip():
    env, spec = generate_random_env(seed=2, label_window=4)
    back = GroundTruthSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()
    assert env_from_json(env_to_json(env)).to_json() == env.to_json()


def test_generator_rejects_bad_params():
    with pytest.raises((ConfigError, GenerationError)):
        generate_random_env(grid=5, labels=40)


@pytest.mark.parametrize("seed", [0, 1])
def test_ground_truth_consistency(seed):
    env, _ = generate_random_env(seed=seed, label_window=4)
    traces = generate_traces(env, 40, 150, seed=seed)
    tm = ground_truth_tm(env)
    rm = ground_truth_rm(env, tm)
    for t in supplement_corpus(tm, traces):
        q, u = tm.machine.initial, rm.machine.initial
        steps = t.steps
        for i, s in enumerate(steps):
            obs, tag = s.obs
            if i + 1 < len(steps):
                assert tm.machine.output_alpha(q, (obs, s.action)) == steps[i + 1].obs[0]
            assert rm.machine.output_alpha(u, (s.obs, s.action)) == s.reward
            q = tm.machine.step_beta(q, s.label)
            u = rm.machine.step_beta(u, s.label)


def test_traces_are_reproducible(fig1_env):
    a = generate_traces(fig1_env, 30, 40, seed=7)
    assert a == generate_traces(fig1_env, 30, 40, seed=7)
    assert a == generate_traces(fig1_env, 30, 40, seed=7, jobs=2)
    assert a != generate_traces(fig1_env, 30, 40, seed=8)


def test_zero_traces(fig1_env):
    assert generate_traces(fig1_env, 0, 10) == []


def test_traces_stop_at_episode_end(fig1_env):
    for t in generate_traces(fig1_env, 100, 60, seed=3):
        assert len(t) <= 60
        ends = [i for i, s in enumerate(t) if s.obs == "limegreenroom" and s.action == "sit"]
        assert ends in ([], [len(t) - 1])


def test_trace_stats(fig1_env):
    traces = generate_traces(fig1_env, 20, 30, seed=1)
    stats = trace_stats(traces)
    assert stats["traces"] == 20
    assert stats["mean_length"] == pytest.approx(sum(len(t) for t in traces) / 20)


def test_mean_length_small_grid():
    # uniform random play on a 3x3, three-phase grid with a 50-step cap
    env = build_phase_grid(3, 3)
    traces = generate_traces(env, 275, 50, seed=0)
    mean = sum(len(t) for t in traces) / len(traces)
    assert 10 < mean <= 50
