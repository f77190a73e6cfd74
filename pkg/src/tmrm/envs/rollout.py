"""Random-agent trace collection."""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..traces import LabeledTrace, Step


def episode_rng(seed, index):
    # one independent stream per episode so that parallel runs match serial ones
    return np.random.default_rng([seed, index])


def rollout(env, rng, max_len):
    """One uniform-random episode.  Step ``i`` carries the label of observation ``o_i``."""
    s = env.reset()
    obs = env.observe(s)
    label = env.label(obs)
    picks = rng.integers(len(env.actions), size=max_len)
    steps = []
    for k in picks:
        a = env.actions[k]
        res = env.step(s, a)
        steps.append(Step(label, obs, a, res.reward))
        if res.done:
            break
        s, obs, label = res.state, res.obs, res.label
    return LabeledTrace(tuple(steps))


def _chunk(args):
    env, seed, indices, max_len = args
    return [rollout(env, episode_rng(seed, i), max_len) for i in indices]


def generate_traces(env, n, max_len, seed=0, policy="random", jobs=1):
    if policy != "random":
        raise ValueError(f"unsupported policy {policy!r}")
    if n < 0 or max_len < 1:
        raise ValueError("n must be >= 0 and max_len >= 1")
    if jobs <= 1 or n < 2 * jobs:
        return _chunk((env, seed, range(n), max_len))
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    parts = [(env, seed, range(lo, hi), max_len) for lo, hi in zip(bounds, bounds[1:])]
    with ProcessPoolExecutor(jobs) as pool:
        return [t for chunk in pool.map(_chunk, parts) for t in chunk]


def trace_stats(traces):
    lengths = [len(t) for t in traces]
    if not lengths:
        return {"traces": 0, "steps": 0, "mean_length": 0.0, "max_length": 0}
    return {"traces": len(lengths), "steps": sum(lengths),
            "mean_length": sum(lengths) / len(lengths), "max_length": max(lengths)}
