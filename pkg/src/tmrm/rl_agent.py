"""Tabular Q-learning over (observation, RM state, TM state).

After acting on observation ``o_t`` both machines consume ``L(o_t)``, which
matches the trace layout the machines were learned from: the machine state
paired with ``o_t`` has read the labels of ``o_0 .. o_{t-1}``.
"""

from dataclasses import asdict, dataclass, field
import csv
import json
import math

import numpy as np

from .automata import encode_symbol
from .errors import ConfigError, UndefinedStepError


@dataclass
class QLearningConfig:
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon: float = 0.3
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.01
    episodes: int = 1500
    max_steps: int = 200
    seed: int = 0
    tie_break: str = "lowest"   # or "random": uniform among the maximal actions while training

    def validate(self):
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if not 0 <= self.discount <= 1:
            raise ConfigError("discount must lie in [0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")
        if not 0 < self.epsilon_decay <= 1:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if not 0 <= self.epsilon_min <= self.epsilon:
            raise ConfigError("epsilon_min must lie in [0, epsilon]")
        if self.tie_break not in ("lowest", "random"):
            raise ConfigError("tie_break must be 'lowest' or 'random'")
        if self.episodes < 0 or self.max_steps < 1:
            raise ConfigError("episodes must be >= 0 and max_steps >= 1")
        return self


@dataclass
class TrainingResult:
    q_table: dict
    curve: list
    markov_violations: int = 0
    violation_examples: list = field(default_factory=list)
    final_epsilon: float = 0.0
    steps: int = 0


class _Tracker:
    """Advances the TM and RM state on each consumed label."""

    def __init__(self, tm, rm):
        self.tm = tm.machine
        self.rm = rm.machine

    def start(self):
        return self.rm.initial, self.tm.initial

    def advance(self, u, q, label):
        nu = self.rm._trans[u].get(label)
        nq = self.tm._trans[q].get(label)
        if nu is None or nq is None:
            which = "RM" if nu is None else "TM"
            state = self.rm.names[u] if nu is None else self.tm.names[q]
            raise UndefinedStepError(f"{which} has no transition from {state} on label {sorted(label)}")
        return nu, nq


def greedy(values):
    # lowest index wins ties
    return int(np.argmax(values))


def train(env, tm, rm, cfg=None):
    cfg = (cfg or QLearningConfig()).validate()
    rng = np.random.default_rng(cfg.seed)
    n_actions = len(env.actions)
    tracker = _Tracker(tm, rm)
    table = {}
    successors = {}
    violations = []
    curve = []
    eps = cfg.epsilon
    total_steps = 0
    random_ties = cfg.tie_break == "random"

    def row(key):
        v = table.get(key)
        if v is None:
            v = table[key] = [0.0] * n_actions
        return v

    for _ in range(cfg.episodes):
        s = env.reset()
        obs = env.observe(s)
        u, q = tracker.start()
        key = (obs, u, q)
        total = 0.0
        for _ in range(cfg.max_steps):
            values = row(key)
            if rng.random() < eps:
                k = int(rng.integers(n_actions))
            elif random_ties:
                best = max(values)
                ties = [i for i, x in enumerate(values) if x == best]
                k = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
            else:
                k = greedy(values)
            res = env.step(s, env.actions[k])
            u, q = tracker.advance(u, q, env.label(obs))
            nkey = (res.obs, u, q)
            r = float(res.reward)
            seen = successors.setdefault((key, k), nkey)
            if seen != nkey:
                violations.append((key, env.actions[k], seen, nkey))
            target = r if res.done else r + cfg.discount * max(row(nkey))
            values[k] += cfg.learning_rate * (target - values[k])
            if not math.isfinite(values[k]):
                raise FloatingPointError(f"Q-value diverged at {key!r}")
            total += r
            total_steps += 1
            s, obs, key = res.state, res.obs, nkey
            if res.done:
                break
        curve.append(total)
        eps = max(cfg.epsilon_min, eps * cfg.epsilon_decay)
    return TrainingResult(table, curve, len(violations), violations[:10], eps, total_steps)


def evaluate_greedy(env, tm, rm, q_table, episodes=1, max_steps=200, seed=0):
    """Mean undiscounted return of the greedy policy; unseen states act like all-zero rows."""
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    tracker = _Tracker(tm, rm)
    zero = [0.0] * len(env.actions)
    returns = []
    for _ in range(episodes):
        s = env.reset()
        obs = env.observe(s)
        u, q = tracker.start()
        total = 0.0
        for _ in range(max_steps):
            k = greedy(q_table.get((obs, u, q), zero))
            res = env.step(s, env.actions[k])
            u, q = tracker.advance(u, q, env.label(obs))
            total += float(res.reward)
            s, obs = res.state, res.obs
            if res.done:
                break
        returns.append(total)
    # the environments are deterministic, so ``seed`` only matters for API symmetry
    return sum(returns) / len(returns)


# -- reference solution on the hidden MDP ------------------------------------------------


@dataclass
class ValueIterationResult:
    values: dict
    policy: dict
    iterations: int
    optimal_return: float


def value_iteration(env, discount=None, tol=1e-10, max_iter=100_000, max_steps=1000):
    """Optimal values on the underlying (fully observed) MDP, plus the undiscounted
    return of following the optimal policy from the initial state."""
    gamma = env.discount if discount is None else discount
    states = env.states()
    index = {s: i for i, s in enumerate(states)}
    n, m = len(states), len(env.actions)
    nxt = np.zeros((n, m), dtype=np.int64)
    rew = np.zeros((n, m))
    cont = np.zeros((n, m))
    for i, s in enumerate(states):
        for k, a in enumerate(env.actions):
            rew[i, k] = float(env.reward(s, a))
            if env.ends_episode(s, a):
                nxt[i, k] = i
            else:
                nxt[i, k] = index[env.transition(s, a)]
                cont[i, k] = 1.0
    v = np.zeros(n)
    it = 0
    for it in range(1, max_iter + 1):
        qv = rew + gamma * cont * v[nxt]
        nv = qv.max(axis=1)
        delta = np.abs(nv - v).max() if n else 0.0
        v = nv
        if delta < tol:
            break
    qv = rew + gamma * cont * v[nxt]
    best = qv.argmax(axis=1)
    policy = {s: env.actions[best[i]] for i, s in enumerate(states)}
    s = env.initial_state
    total = 0.0
    for _ in range(max_steps):
        a = policy[s]
        total += float(env.reward(s, a))
        if env.ends_episode(s, a):
            break
        s = env.transition(s, a)
    return ValueIterationResult({s: float(v[i]) for i, s in enumerate(states)}, policy, it, total)


# -- output files -----------------------------------------------------------------------------


def moving_average(curve, window=100):
    out = []
    acc = 0.0
    for i, x in enumerate(curve):
        acc += x
        if i >= window:
            acc -= curve[i - window]
        out.append(acc / min(i + 1, window))
    return out


def write_curve_csv(path, curve, window=100):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "total_reward", "moving_avg"])
        for i, (r, m) in enumerate(zip(curve, moving_average(curve, window))):
            w.writerow([i, r, round(m, 6)])


def q_table_to_json(table, actions):
    rows = []
    for (obs, u, q), values in sorted(table.items(), key=lambda kv: repr(kv[0])):
        rows.append({"obs": encode_symbol(obs), "u": u, "q": q, "values": values})
    return {"actions": list(actions), "rows": rows}


def q_table_from_json(d):
    def dec(x):
        return tuple(dec(y) for y in x) if isinstance(x, list) else x
    return {(dec(r["obs"]), r["u"], r["q"]): list(r["values"]) for r in d["rows"]}


def dumps_q_table(table, actions):
    return json.dumps(q_table_to_json(table, actions), indent=1)


def config_to_json(cfg):
    return asdict(cfg)
