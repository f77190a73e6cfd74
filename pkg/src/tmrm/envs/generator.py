"""Random 25x25-style grid environments with a hidden TM and RM.

Ground-truth machines are also exported as DBMMs in trace layout, i.e. the
state before step ``i`` has consumed the labels of observations ``0..i-1``;
their alpha-outputs fold in the label of the current cell themselves.
"""

from dataclasses import dataclass, field
from decimal import Decimal
import itertools
import random

import networkx as nx

from ..automata import DBMM, EMPTY_LABEL, RewardMachine, TransitionMachine
from ..errors import GenerationError
from .grid import GridEnv, cell_name


@dataclass
class GeneratorParams:
    grid: int = 25
    tm_states: int = 7
    rm_states: int = 3
    labels: int = 5
    extra_edge_prob: float = 0.3
    impassable_frac: float = 0.3
    forward_edge_prob: float = 0.4
    back_edge_prob: float = 0.5
    label_window: int = None     # labels within this Chebyshev distance of the start
    seed: int = 0
    max_retries: int = 2000

    def validate(self):
        if self.grid < 3 or self.tm_states < 1 or self.rm_states < 2 or self.labels < 1:
            raise GenerationError("grid >= 3, tm_states >= 1, rm_states >= 2 and labels >= 1 are required")
        odd = len(label_sites(self.grid, self.label_window))
        if self.labels > odd:
            raise GenerationError(f"{self.labels} labels do not fit on the {odd} odd-coordinate cells")
        for name in ("extra_edge_prob", "impassable_frac", "forward_edge_prob", "back_edge_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise GenerationError(f"{name} must lie in [0, 1]")


@dataclass
class GroundTruthSpec:
    grid: int
    start: tuple
    label_cells: dict            # prop -> cell
    tm_transitions: dict         # (q, prop) -> q'
    impassable: list             # per TM state: frozenset of props
    rm_transitions: dict         # (u, prop) -> (u', reward)
    rm_terminal: int
    n_tm: int
    n_rm: int
    seed: int = 0
    attempts: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def props(self):
        return sorted(self.label_cells)

    def build_env(self, discount=0.95):
        return GridEnv(
            self.grid, self.start, {c: p for p, c in self.label_cells.items()},
            tm_transitions=self.tm_transitions,
            impassable=[[self.label_cells[p] for p in s] for s in self.impassable],
            rm_transitions=self.rm_transitions, rm_terminal=[self.rm_terminal],
            discount=discount, n_tm_states=self.n_tm, n_rm_states=self.n_rm,
        )

    def to_json(self):
        return {
            "grid": self.grid, "start": list(self.start), "seed": self.seed,
            "label_cells": {p: list(c) for p, c in sorted(self.label_cells.items())},
            "tm_transitions": [[q, p, t] for (q, p), t in sorted(self.tm_transitions.items())],
            "impassable": [sorted(s) for s in self.impassable],
            "rm_transitions": [[u, p, v, int(r)] for (u, p), (v, r) in sorted(self.rm_transitions.items())],
            "rm_terminal": self.rm_terminal, "n_tm": self.n_tm, "n_rm": self.n_rm,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            grid=d["grid"], start=tuple(d["start"]), seed=d.get("seed", 0),
            label_cells={p: tuple(c) for p, c in d["label_cells"].items()},
            tm_transitions={(q, p): t for q, p, t in d["tm_transitions"]},
            impassable=[frozenset(s) for s in d["impassable"]],
            rm_transitions={(u, p): (v, Decimal(r)) for u, p, v, r in d["rm_transitions"]},
            rm_terminal=d["rm_terminal"], n_tm=d["n_tm"], n_rm=d["n_rm"],
        )


def start_cell(size):
    half = size // 2
    return (half - half % 2, half - half % 2)


def label_sites(size, window=None):
    """Odd-coordinate cells, optionally restricted to a square window around the start."""
    sr, sc = start_cell(size)
    return [(r, c) for r in range(1, size, 2) for c in range(1, size, 2)
            if window is None or (abs(r - sr) <= window and abs(c - sc) <= window)]


# -- constraint checks -----------------------------------------------------------


def tm_graph(spec, feasible=False):
    g = nx.MultiDiGraph()
    g.add_nodes_from(range(spec.n_tm))
    for (q, p), t in spec.tm_transitions.items():
        if feasible and p in spec.impassable[q]:
            continue
        g.add_edge(q, t, label=p)
    return g


def rm_cycles(spec):
    """Reward sum of every simple cycle over explicit RM edges."""
    g = nx.DiGraph()
    g.add_nodes_from(range(spec.n_rm))
    edges = {}
    for (u, p), (v, r) in spec.rm_transitions.items():
        edges.setdefault((u, v), []).append(r)
    for (u, v) in edges:
        g.add_edge(u, v)
    totals = []
    for cycle in nx.simple_cycles(g):
        pairs = list(zip(cycle, cycle[1:] + cycle[:1]))
        # the worst case for exploitation is the best-paying parallel edge
        totals.append((cycle, sum(max(edges[e]) for e in pairs)))
    return totals


def constraint_violations(spec):
    """Human-readable list of broken generator guarantees (empty when all hold)."""
    problems = []
    if not nx.is_strongly_connected(tm_graph(spec)):
        problems.append("TM is not strongly connected")
    missing = [(q, p) for q in range(spec.n_tm) for p in spec.props if (q, p) not in spec.tm_transitions]
    if missing:
        problems.append(f"TM is incomplete: {missing[:5]}")
    if spec.impassable and frozenset.intersection(*spec.impassable):
        problems.append("some labelled cell is impassable in every TM state")
    term = spec.rm_terminal
    g = nx.DiGraph()
    g.add_nodes_from(range(spec.n_rm))
    for (u, p), (v, r) in spec.rm_transitions.items():
        g.add_edge(u, v)
        if u == term:
            problems.append("terminal RM state has outgoing edges")
        if v == term and r <= 0:
            problems.append(f"edge {u}-{p}->{v} into the terminal state has reward {r}")
    for u in range(spec.n_rm):
        if u != term and not nx.has_path(g, u, term):
            problems.append(f"RM state {u} cannot reach the terminal state")
        if not nx.has_path(g, 0, u):
            problems.append(f"RM state {u} is unreachable from the initial state")
    forward = nx.DiGraph([(u, v) for (u, _), (v, _) in spec.rm_transitions.items() if v > u])
    if forward.number_of_nodes() and not nx.is_directed_acyclic_graph(forward):
        problems.append("forward RM edges are not acyclic")
    for cycle, total in rm_cycles(spec):
        if total >= 0:
            problems.append(f"RM cycle {cycle} has non-negative reward {total}")
    return problems


# -- generation --------------------------------------------------------------------


def _make_tm(rng, n, props, extra_prob):
    trans = {}
    order = list(range(n))
    rng.shuffle(order)
    for i, q in enumerate(order):
        if n == 1:
            break
        t = order[(i + 1) % n]
        trans[(q, rng.choice(props))] = t
    for q in range(n):
        for p in props:
            if (q, p) not in trans and rng.random() < extra_prob:
                trans[(q, p)] = rng.randrange(n)
    for q in range(n):
        for p in props:
            if (q, p) not in trans:
                trans[(q, p)] = rng.randrange(n)
    return trans


def _make_impassable(rng, n, props, frac):
    k = max(1, round(frac * len(props))) if len(props) > 1 else 0
    return [frozenset(rng.sample(props, k)) for _ in range(n)]


def _max_forward_path(edges, src, dst):
    """Largest reward sum over forward (increasing-index) RM paths src -> dst, or None."""
    best = {src: Decimal(0)}
    for u in range(src, dst + 1):
        if u not in best:
            continue
        for (a, _), (v, r) in edges.items():
            if a == u and u < v <= dst:
                cand = best[u] + r
                if v not in best or cand > best[v]:
                    best[v] = cand
    return best.get(dst)


def _make_rm(rng, m, props, fwd_prob, back_prob):
    term = m - 1
    edges = {}
    for u in range(term):
        for p in props:
            if rng.random() < fwd_prob:
                v = rng.randrange(u + 1, m)
                r = rng.randint(1, 5) if v == term else rng.randint(0, 2)
                edges[(u, p)] = (v, Decimal(r))
    # repair dead ends, highest first so lower states can route through repaired ones
    for u in reversed(range(term)):
        g = nx.DiGraph([(a, v) for (a, _), (v, _) in edges.items()])
        g.add_nodes_from(range(m))
        if not nx.has_path(g, u, term):
            free = [p for p in props if (u, p) not in edges]
            if not free:
                raise GenerationError("no free label for a reachability repair edge")
            edges[(u, rng.choice(free))] = (term, Decimal(rng.randint(1, 5)))
    for u in range(1, term):
        for p in props:
            if (u, p) in edges or rng.random() >= back_prob:
                continue
            v = rng.randrange(0, u)
            best = _max_forward_path(edges, v, u)
            edges[(u, p)] = (v, -((best or Decimal(0)) + 1))
    return edges


def _product_reaches_terminal(spec):
    """Can some label walk take (q0, u0) to the terminal RM state, honouring passability?"""
    start = (0, 0)
    seen = {start}
    stack = [start]
    while stack:
        q, u = stack.pop()
        if u == spec.rm_terminal:
            return True
        for p in spec.props:
            if p in spec.impassable[q]:
                continue
            nq = spec.tm_transitions.get((q, p), q)
            nu = spec.rm_transitions.get((u, p), (u, 0))[0]
            if (nq, nu) not in seen:
                seen.add((nq, nu))
                stack.append((nq, nu))
    return False


def generate_random_env(params=None, **overrides):
    """Returns ``(env, spec)``.

    Beyond the structural guarantees checked by :func:`constraint_violations`,
    each TM state gets a distinct impassable set (so no two TM states are
    behaviourally equal), every TM state is reachable through passable labels,
    and the terminal RM state is reachable in the product.
    """
    params = params or GeneratorParams()
    for k, v in overrides.items():
        setattr(params, k, v)
    params.validate()
    rng = random.Random(params.seed)
    size = params.grid
    start = start_cell(size)
    odd = label_sites(size, params.label_window)
    props = [f"l{i}" for i in range(params.labels)]
    for attempt in range(1, params.max_retries + 1):
        cells = rng.sample(odd, params.labels)
        tm = _make_tm(rng, params.tm_states, props, params.extra_edge_prob)
        impassable = _make_impassable(rng, params.tm_states, props, params.impassable_frac)
        try:
            rm = _make_rm(rng, params.rm_states, props, params.forward_edge_prob, params.back_edge_prob)
        except GenerationError:
            continue
        spec = GroundTruthSpec(size, start, dict(zip(props, cells)), tm, impassable, rm,
                               params.rm_states - 1, params.tm_states, params.rm_states,
                               seed=params.seed, attempts=attempt)
        if constraint_violations(spec):
            continue
        if params.tm_states > 1 and len(set(impassable)) < params.tm_states:
            continue
        if not nx.is_strongly_connected(tm_graph(spec, feasible=True)):
            continue
        if not _product_reaches_terminal(spec):
            continue
        return spec.build_env(), spec
    raise GenerationError(f"no environment satisfied the constraints after {params.max_retries} attempts")


# -- ground-truth machines in trace layout ---------------------------------------------


def _grid_props(env):
    return sorted(set(env.labels.values()))


def ground_truth_tm(env):
    """Layout TM of a :class:`GridEnv`: outputs next observations."""
    props = _grid_props(env)
    labels = [EMPTY_LABEL] + [frozenset([p]) for p in props]
    n = env.n_tm_states
    trans = {}
    for q in range(n):
        trans[(q, EMPTY_LABEL)] = q
        for p in props:
            trans[(q, frozenset([p]))] = env.tm_transitions.get((q, p), q)
    emis = {}
    cells = [(r, c) for r in range(env.size) for c in range(env.size)]
    for q in range(n):
        for cell in cells:
            obs = cell_name(cell)
            prop = env.labels.get(cell)
            q_env = env.tm_transitions.get((q, prop), q) if prop else q
            for a in env.actions:
                if env.completion and a == env.completion[0]:
                    nxt = cell
                else:
                    nxt = env._target(cell, q_env, a)
                emis[(q, (obs, a))] = cell_name(nxt)
    return TransitionMachine(DBMM(n, 0, beta=labels, transitions=trans, emissions=emis))


def ground_truth_rm(env, tm=None):
    """Layout RM over supplemented observations ``(obs, tm_state_name)``."""
    tm = tm or ground_truth_tm(env)
    props = _grid_props(env)
    labels = [EMPTY_LABEL] + [frozenset([p]) for p in props]
    m = env.n_rm_states
    trans = {}
    for u in range(m):
        trans[(u, EMPTY_LABEL)] = u
        for p in props:
            trans[(u, frozenset([p]))] = env.rm_transitions.get((u, p), (u, 0))[0]
    emis = {}
    cells = [(r, c) for r in range(env.size) for c in range(env.size)]
    for u, q, cell in itertools.product(range(m), range(env.n_tm_states), cells):
        obs = cell_name(cell)
        prop = env.labels.get(cell)
        q_env, u_env = q, u
        if prop:
            q_env = env.tm_transitions.get((q, prop), q)
            u_env = env.rm_transitions.get((u, prop), (u, 0))[0]
        for a in env.actions:
            _, reward, _ = env._outcome((cell, q_env, u_env), a)
            emis[(u, ((obs, tm.name(q)), a))] = reward
    return RewardMachine(DBMM(m, 0, beta=labels, transitions=trans, emissions=emis), supplemented=True)
