"""Deterministic partially observable environments."""

from collections import deque
from typing import NamedTuple

from ..automata import EMPTY_LABEL


class StepResult(NamedTuple):
    state: object
    obs: object
    label: frozenset
    reward: object  # Decimal
    done: bool


class DetPOMDP:
    """Base class; subclasses provide the five maps.

    ``transition``, ``reward``, ``observe`` and ``label`` are total.
    ``ends_episode(s, a)`` marks steps after which the episode stops; the
    environment models termination on the step rather than on a state so that
    the state space stays exactly the product the task describes.
    """

    actions = ()
    discount = 0.95
    initial_state = None
    propositions = frozenset()

    def transition(self, s, a):
        raise NotImplementedError

    def reward(self, s, a):
        raise NotImplementedError

    def observe(self, s):
        raise NotImplementedError

    def label(self, obs):
        return EMPTY_LABEL

    def ends_episode(self, s, a):
        return False

    def reset(self):
        return self.initial_state

    def step(self, s, a):
        nxt = self.transition(s, a)
        obs = self.observe(nxt)
        return StepResult(nxt, obs, self.label(obs), self.reward(s, a), self.ends_episode(s, a))

    def states(self):
        """All states reachable from the initial state, breadth-first."""
        start = self.initial_state
        seen = {start}
        order = [start]
        queue = deque(order)
        while queue:
            s = queue.popleft()
            for a in self.actions:
                if self.ends_episode(s, a):
                    continue
                t = self.transition(s, a)
                if t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
        return order

    def observations(self):
        return sorted({self.observe(s) for s in self.states()}, key=str)


def step(env, state, action):
    """``(P(s,a), Z(P(s,a)), L(Z(P(s,a))), R(s,a))`` plus the episode-end flag."""
    if action not in env.actions:
        raise ValueError(f"unknown action {action!r}")
    return env.step(state, action)
