"""The four-area key/toilet/sofa house.

Topology: the corridor connects left to the orangeroom (key), up to the
cyanroom (toilet, locked until the key is held) and right to the
limegreenroom (sofa).  Each side room leads back down/left/down to the
corridor.  Moves without a door are no-ops.  ``sit`` on the sofa ends the
episode and pays 1 only if the toilet was visited.
"""

from decimal import Decimal

from ..automata import DBMM, EMPTY_LABEL, RewardMachine, TransitionMachine, make_label
from .base import DetPOMDP

ORANGE, CORRIDOR, CYAN, LIME = "orangeroom", "corridor", "cyanroom", "limegreenroom"
ROOMS = (ORANGE, CORRIDOR, CYAN, LIME)
MOVES = ("up", "down", "left", "right")
ACTIONS = MOVES + ("sit",)

DOORS = {
    (CORRIDOR, "left"): ORANGE,
    (CORRIDOR, "up"): CYAN,
    (CORRIDOR, "right"): LIME,
    (ORANGE, "down"): CORRIDOR,
    (CYAN, "down"): CORRIDOR,
    (LIME, "left"): CORRIDOR,
}

LABELS = {
    ORANGE: make_label(["key"]),
    CORRIDOR: EMPTY_LABEL,
    CYAN: make_label(["toilet"]),
    LIME: make_label(["sofa"]),
}

ZERO, ONE = Decimal(0), Decimal(1)


class HouseEnv(DetPOMDP):
    """States are ``(room, has_key, visited_toilet)``."""

    actions = ACTIONS
    propositions = frozenset({"key", "toilet", "sofa"})

    def __init__(self, discount=0.95):
        self.discount = discount
        self.initial_state = (CORRIDOR, 0, 0)

    def transition(self, s, a):
        room, key, toilet = s
        nxt = DOORS.get((room, a), room)
        if nxt == CYAN and not key:
            nxt = room
        return (nxt, key or int(nxt == ORANGE), toilet or int(nxt == CYAN))

    def reward(self, s, a):
        room, _, toilet = s
        return ONE if (room == LIME and a == "sit" and toilet) else ZERO

    def observe(self, s):
        return s[0]

    def label(self, obs):
        return LABELS[obs]

    def ends_episode(self, s, a):
        return s[0] == LIME and a == "sit"

    def all_states(self):
        return [(r, k, t) for r in ROOMS for k in (0, 1) for t in (0, 1)]

    def to_json(self):
        return {"kind": "fig1", "discount": self.discount}


def build_fig1_env(discount=0.95):
    return HouseEnv(discount)


def minimal_reward_machine():
    """Two states: toilet not yet reached / reached.  Pays 1 for sitting afterwards."""
    labels = [LABELS[r] for r in ROOMS]
    toilet = LABELS[CYAN]
    trans = {}
    for lab in labels:
        trans[(0, lab)] = 1 if lab == toilet else 0
        trans[(1, lab)] = 1
    emis = {}
    for u in (0, 1):
        for room in ROOMS:
            for a in ACTIONS:
                emis[(u, (room, a))] = ONE if (u == 1 and room == LIME and a == "sit") else ZERO
    return RewardMachine(DBMM(2, 0, transitions=trans, emissions=emis, names=["no_toilet", "toilet"]))


def minimal_transition_machine():
    """Two states: key not yet held / held.  Only ``(corridor, up)`` depends on it."""
    labels = [LABELS[r] for r in ROOMS]
    key = LABELS[ORANGE]
    trans = {}
    for lab in labels:
        trans[(0, lab)] = 1 if lab == key else 0
        trans[(1, lab)] = 1
    emis = {}
    for q in (0, 1):
        for room in ROOMS:
            for a in ACTIONS:
                nxt = DOORS.get((room, a), room)
                if nxt == CYAN and q == 0:
                    nxt = room
                emis[(q, (room, a))] = nxt
    return TransitionMachine(DBMM(2, 0, transitions=trans, emissions=emis, names=["no_key", "key"]))
