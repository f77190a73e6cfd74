"""Environments: the house example, phase grids, random controller grids, rollouts."""

from ..errors import ConfigError
from .base import DetPOMDP, StepResult, step
from .fig1 import HouseEnv, build_fig1_env, minimal_reward_machine, minimal_transition_machine
from .generator import (GeneratorParams, GroundTruthSpec, constraint_violations,
                        generate_random_env, ground_truth_rm, ground_truth_tm)
from .grid import GridEnv, build_phase_grid
from .rollout import episode_rng, generate_traces, rollout, trace_stats


def env_to_json(env):
    return env.to_json()


def env_from_json(d):
    kind = d.get("kind")
    if kind == "fig1":
        return build_fig1_env(float(d.get("discount", 0.95)))
    if kind == "grid":
        return GridEnv.from_json(d)
    raise ConfigError(f"unknown environment kind {kind!r}")


__all__ = [
    "DetPOMDP", "StepResult", "step", "HouseEnv", "build_fig1_env", "minimal_reward_machine",
    "minimal_transition_machine", "GeneratorParams", "GroundTruthSpec", "constraint_violations",
    "generate_random_env", "ground_truth_rm", "ground_truth_tm", "GridEnv", "build_phase_grid",
    "episode_rng", "generate_traces", "rollout", "trace_stats", "env_to_json", "env_from_json",
]
