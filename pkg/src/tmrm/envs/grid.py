"""Grid worlds driven by a hidden transition controller and a reward controller.

The hidden state is ``(cell, tm_state, rm_state)``.  After every step both
controllers consume the label of the cell the agent now stands on (staying
in place counts).  A labelled cell may be impassable in some controller
states; moving into it then leaves the agent where it was.  Rewards are paid
on controller edges taken while entering a labelled cell, plus an optional
completion action that pays in designated reward states and ends the episode.
"""

from decimal import Decimal
import random

from ..automata import EMPTY_LABEL
from ..errors import ConfigError
from .base import DetPOMDP, StepResult

MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
ZERO = Decimal(0)


def cell_name(cell):
    return f"{cell[0]},{cell[1]}"


class GridEnv(DetPOMDP):
    def __init__(self, size, start, labels, tm_transitions=None, impassable=None,
                 rm_transitions=None, rm_terminal=(), completion=None, discount=0.95,
                 n_tm_states=1, n_rm_states=1):
        """
        labels: cell -> proposition name.
        tm_transitions: (q, prop) -> q'; missing entries are self-loops.
        impassable: per TM state, the set of labelled cells that block entry.
        rm_transitions: (u, prop) -> (u', reward); missing entries are reward-0 self-loops.
        completion: ``(action, {u: reward})``; taking ``action`` in a listed RM
        state pays and ends the episode; elsewhere it is a no-op.
        """
        self.size = size
        self.start = tuple(start)
        self.labels = {tuple(c): p for c, p in labels.items()}
        self.tm_transitions = dict(tm_transitions or {})
        self.n_tm_states = n_tm_states
        self.impassable = [frozenset(map(tuple, s)) for s in (impassable or [()] * n_tm_states)]
        self.rm_transitions = {k: (v[0], Decimal(v[1])) for k, v in (rm_transitions or {}).items()}
        self.n_rm_states = n_rm_states
        self.rm_terminal = frozenset(rm_terminal)
        if completion is not None:
            completion = (completion[0], {u: Decimal(r) for u, r in completion[1].items()})
        self.completion = completion
        self.discount = discount
        self.actions = tuple(MOVES) + ((completion[0],) if completion else ())
        self.propositions = frozenset(self.labels.values())
        if self.start in self.labels:
            raise ConfigError("the start cell must be unlabelled")
        self.initial_state = (self.start, 0, 0)
        self._names = {(r, c): cell_name((r, c)) for r in range(size) for c in range(size)}
        self._cells = {v: k for k, v in self._names.items()}
        self._label_of = {self._names[c]: frozenset([p]) for c, p in self.labels.items()}

    # -- dynamics --------------------------------------------------------------

    def _target(self, cell, q, a):
        d = MOVES.get(a)
        if d is None:
            return cell
        r, c = cell[0] + d[0], cell[1] + d[1]
        if not (0 <= r < self.size and 0 <= c < self.size):
            return cell
        nxt = (r, c)
        if nxt in self.impassable[q]:
            return cell
        return nxt

    def _outcome(self, s, a):
        cell, q, u = s
        if self.completion and a == self.completion[0] and u in self.completion[1]:
            return s, self.completion[1][u], True
        nxt = self._target(cell, q, a)
        prop = self.labels.get(nxt)
        reward = ZERO
        if prop is not None:
            q = self.tm_transitions.get((q, prop), q)
            edge = self.rm_transitions.get((u, prop))
            if edge is not None:
                u, reward = edge
        return (nxt, q, u), reward, u in self.rm_terminal

    def transition(self, s, a):
        return self._outcome(s, a)[0]

    def reward(self, s, a):
        return self._outcome(s, a)[1]

    def ends_episode(self, s, a):
        return self._outcome(s, a)[2]

    def step(self, s, a):
        nxt, reward, done = self._outcome(s, a)
        obs = self._names[nxt[0]]
        return StepResult(nxt, obs, self._label_of.get(obs, EMPTY_LABEL), reward, done)

    def observe(self, s):
        return self._names[s[0]]

    def label(self, obs):
        return self._label_of.get(obs, EMPTY_LABEL)

    def cell_of(self, obs):
        return self._cells[obs]

    # -- serialization -----------------------------------------------------------

    def to_json(self):
        d = {
            "kind": "grid",
            "size": self.size,
            "start": list(self.start),
            "discount": self.discount,
            "labels": [[c[0], c[1], p] for c, p in sorted(self.labels.items())],
            "tm": {
                "states": self.n_tm_states,
                "transitions": [[q, p, t] for (q, p), t in sorted(self.tm_transitions.items())],
                "impassable": [sorted(list(c) for c in s) for s in self.impassable],
            },
            "rm": {
                "states": self.n_rm_states,
                "transitions": [[u, p, v, _num(r)] for (u, p), (v, r) in sorted(self.rm_transitions.items())],
                "terminal": sorted(self.rm_terminal),
            },
        }
        if self.completion:
            d["completion"] = {"action": self.completion[0],
                               "rewards": [[u, _num(r)] for u, r in sorted(self.completion[1].items())]}
        return d

    @classmethod
    def from_json(cls, d):
        tm, rm = d.get("tm", {}), d.get("rm", {})
        completion = None
        if "completion" in d:
            completion = (d["completion"]["action"], {int(u): r for u, r in d["completion"]["rewards"]})
        return cls(
            size=int(d["size"]), start=tuple(d["start"]),
            labels={(int(r), int(c)): p for r, c, p in d["labels"]},
            tm_transitions={(int(q), p): int(t) for q, p, t in tm.get("transitions", [])},
            impassable=[[tuple(c) for c in s] for s in tm.get("impassable", [[]])],
            rm_transitions={(int(u), p): (int(v), str(r)) for u, p, v, r in rm.get("transitions", [])},
            rm_terminal=[int(u) for u in rm.get("terminal", [])],
            completion=completion, discount=float(d.get("discount", 0.95)),
            n_tm_states=int(tm.get("states", 1)), n_rm_states=int(rm.get("states", 1)),
        )


def _num(r):
    return int(r) if r == r.to_integral_value() else float(r)


def build_phase_grid(size, phases, seed=0, action="sit", discount=0.95):
    """``size`` x ``size`` grid with ``phases`` labelled cells that must be visited in order.

    Phase labels ``p1..pk`` go on distinct shuffled cells; the start cell is the
    top-left corner.  Taking ``action`` once the last phase is reached pays 1.
    """
    if size < 2 or phases < 1 or phases > size * size - 1:
        raise ConfigError(f"invalid phase grid parameters size={size} phases={phases}")
    rng = random.Random(seed)
    start = (0, 0)
    cells = [(r, c) for r in range(size) for c in range(size) if (r, c) != start]
    rng.shuffle(cells)
    labels = {cells[i]: f"p{i + 1}" for i in range(phases)}
    rm = {(i, f"p{i + 1}"): (i + 1, 0) for i in range(phases)}
    return GridEnv(size, start, labels, rm_transitions=rm, completion=(action, {phases: 1}),
                   discount=discount, n_rm_states=phases + 1)
